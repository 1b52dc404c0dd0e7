// SPDX-License-Identifier: Apache-2.0
#include <algorithm>

#include "setsdb/kernels.hpp"

namespace setsdb::kernels::detail {

namespace {

void scale(const double* in, std::size_t n, double factor, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = in[i] * factor;
}

double sum(const double* in, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += in[i];
  return acc;
}

double shifted_sum(const double* in, std::size_t n, double pivot) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += in[i] - pivot;
  return acc;
}

double min(const double* in, std::size_t n) {
  double m = in[0];
  for (std::size_t i = 1; i < n; ++i) m = std::min(m, in[i]);
  return m;
}

double max(const double* in, std::size_t n) {
  double m = in[0];
  for (std::size_t i = 1; i < n; ++i) m = std::max(m, in[i]);
  return m;
}

void add(const double* a, const double* b, std::size_t n, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(const double* a, const double* b, std::size_t n, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul(const double* a, const double* b, std::size_t n, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void div(const double* a, const double* b, std::size_t n, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] / b[i];
}

}  // namespace

const KernelTable kScalarTable{Isa::kScalar, scale, sum, shifted_sum, min, max, add, sub, mul, div};

}  // namespace setsdb::kernels::detail
