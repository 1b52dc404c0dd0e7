// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <string>

#include "setsdb/error.hpp"
#include "setsdb/kernels.hpp"

namespace setsdb::kernels {

namespace {

const KernelTable* best_table() {
  if (const KernelTable* t = detail::avx2_table()) return t;
  if (const KernelTable* t = detail::neon_table()) return t;
  return &detail::kScalarTable;
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{best_table()};
  return slot;
}

const KernelTable& active() { return *active_slot().load(std::memory_order_acquire); }

void require_same_size(std::size_t a, std::size_t b, std::size_t out) {
  if (a != b || a != out) {
    throw Error(ErrorCode::kInvalidArgument, "kernel operands differ in length");
  }
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
    case Isa::kNeon: return "neon";
  }
  return "unknown";
}

const KernelTable* table_for(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return &detail::kScalarTable;
    case Isa::kAvx2: return detail::avx2_table();
    case Isa::kNeon: return detail::neon_table();
  }
  return nullptr;
}

Isa detected_isa() { return best_table()->isa; }

Isa active_isa() { return active().isa; }

void force_isa(std::optional<Isa> isa) {
  const KernelTable* table = isa ? table_for(*isa) : best_table();
  if (table == nullptr) {
    throw Error(ErrorCode::kInvalidArgument,
                "kernel variant '" + std::string(isa_name(*isa)) + "' is not available on this CPU");
  }
  active_slot().store(table, std::memory_order_release);
}

void scale(std::span<const double> in, double factor, std::span<double> out) {
  require_same_size(in.size(), in.size(), out.size());
  active().scale(in.data(), in.size(), factor, out.data());
}

double sum(std::span<const double> in) { return active().sum(in.data(), in.size()); }

double shifted_sum(std::span<const double> in, double pivot) {
  return active().shifted_sum(in.data(), in.size(), pivot);
}

double min(std::span<const double> in) {
  if (in.empty()) throw Error(ErrorCode::kInvalidArgument, "min of an empty span");
  return active().min(in.data(), in.size());
}

double max(std::span<const double> in) {
  if (in.empty()) throw Error(ErrorCode::kInvalidArgument, "max of an empty span");
  return active().max(in.data(), in.size());
}

void add(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  require_same_size(a.size(), b.size(), out.size());
  active().add(a.data(), b.data(), a.size(), out.data());
}

void sub(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  require_same_size(a.size(), b.size(), out.size());
  active().sub(a.data(), b.data(), a.size(), out.data());
}

void mul(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  require_same_size(a.size(), b.size(), out.size());
  active().mul(a.data(), b.data(), a.size(), out.data());
}

void div(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  require_same_size(a.size(), b.size(), out.size());
  active().div(a.data(), b.data(), a.size(), out.data());
}

double mean(std::span<const double> in) {
  if (in.empty()) throw Error(ErrorCode::kInvalidArgument, "mean of an empty span");
  const double pivot = in[0];
  return pivot + shifted_sum(in, pivot) / static_cast<double>(in.size());
}

}  // namespace setsdb::kernels
