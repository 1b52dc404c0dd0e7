// SPDX-License-Identifier: Apache-2.0
#pragma once

// Numeric inner loops used by down-sampling, unit conversion, pointwise
// expression arithmetic and cross-series aggregation.
//
// Every kernel has a scalar reference implementation. Vector variants
// (AVX2 on x86-64, NEON on aarch64) are selected at runtime from the CPU
// feature set; equivalence against the scalar table is covered by
// tests/kernels_test.cpp. Element-wise kernels are bit-identical across
// variants. Reductions that add (sum, shifted_sum) may differ in the last
// bits because lanes are combined in a different order; min/max are exact.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

namespace setsdb::kernels {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;
  // out[i] = in[i] * factor
  void (*scale)(const double* in, std::size_t n, double factor, double* out);
  double (*sum)(const double* in, std::size_t n);
  // sum(in[i] - pivot); exact zero for a constant input equal to pivot
  double (*shifted_sum)(const double* in, std::size_t n, double pivot);
  double (*min)(const double* in, std::size_t n);
  double (*max)(const double* in, std::size_t n);
  void (*add)(const double* a, const double* b, std::size_t n, double* out);
  void (*sub)(const double* a, const double* b, std::size_t n, double* out);
  void (*mul)(const double* a, const double* b, std::size_t n, double* out);
  void (*div)(const double* a, const double* b, std::size_t n, double* out);
};

// nullptr when the variant is not compiled in or the CPU lacks it.
const KernelTable* table_for(Isa isa);

// Best variant supported by this CPU.
Isa detected_isa();

// Variant used by the dispatching functions below. Defaults to
// detected_isa(); tests pin it with force_isa().
Isa active_isa();
void force_isa(std::optional<Isa> isa);

void scale(std::span<const double> in, double factor, std::span<double> out);
double sum(std::span<const double> in);
double shifted_sum(std::span<const double> in, double pivot);
double min(std::span<const double> in);
double max(std::span<const double> in);
void add(std::span<const double> a, std::span<const double> b, std::span<double> out);
void sub(std::span<const double> a, std::span<const double> b, std::span<double> out);
void mul(std::span<const double> a, std::span<const double> b, std::span<double> out);
void div(std::span<const double> a, std::span<const double> b, std::span<double> out);

// Mean computed as pivot + shifted_sum / n with pivot = in[0]; a constant
// input yields exactly that constant. Requires a non-empty span.
double mean(std::span<const double> in);

namespace detail {
extern const KernelTable kScalarTable;
const KernelTable* avx2_table();
const KernelTable* neon_table();
}  // namespace detail

}  // namespace setsdb::kernels
