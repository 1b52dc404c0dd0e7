// SPDX-License-Identifier: Apache-2.0
#include "setsdb/kernels.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>
#endif

namespace setsdb::kernels::detail {

#if defined(__aarch64__)

// Advanced SIMD is mandatory on AArch64, so no runtime probe is needed.
namespace {

void scale(const double* in, std::size_t n, double factor, double* out) {
  const float64x2_t f = vdupq_n_f64(factor);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vmulq_f64(vld1q_f64(in + i), f));
  for (; i < n; ++i) out[i] = in[i] * factor;
}

double sum(const double* in, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(in + i));
  double total = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
  for (; i < n; ++i) total += in[i];
  return total;
}

double shifted_sum(const double* in, std::size_t n, double pivot) {
  const float64x2_t p = vdupq_n_f64(pivot);
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vsubq_f64(vld1q_f64(in + i), p));
  double total = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
  for (; i < n; ++i) total += in[i] - pivot;
  return total;
}

double min(const double* in, std::size_t n) {
  double m = in[0];
  std::size_t i = 0;
  if (n >= 2) {
    float64x2_t acc = vld1q_f64(in);
    for (i = 2; i + 2 <= n; i += 2) acc = vminq_f64(acc, vld1q_f64(in + i));
    double a = vgetq_lane_f64(acc, 0);
    double b = vgetq_lane_f64(acc, 1);
    m = b < a ? b : a;
  }
  for (; i < n; ++i) m = in[i] < m ? in[i] : m;
  return m;
}

double max(const double* in, std::size_t n) {
  double m = in[0];
  std::size_t i = 0;
  if (n >= 2) {
    float64x2_t acc = vld1q_f64(in);
    for (i = 2; i + 2 <= n; i += 2) acc = vmaxq_f64(acc, vld1q_f64(in + i));
    double a = vgetq_lane_f64(acc, 0);
    double b = vgetq_lane_f64(acc, 1);
    m = b > a ? b : a;
  }
  for (; i < n; ++i) m = in[i] > m ? in[i] : m;
  return m;
}

#define SETSDB_NEON_BINARY(name, intrinsic, op)                                                \
  void name(const double* a, const double* b, std::size_t n, double* out) {                    \
    std::size_t i = 0;                                                                         \
    for (; i + 2 <= n; i += 2) vst1q_f64(out + i, intrinsic(vld1q_f64(a + i), vld1q_f64(b + i))); \
    for (; i < n; ++i) out[i] = a[i] op b[i];                                                  \
  }

SETSDB_NEON_BINARY(add, vaddq_f64, +)
SETSDB_NEON_BINARY(sub, vsubq_f64, -)
SETSDB_NEON_BINARY(mul, vmulq_f64, *)
SETSDB_NEON_BINARY(div, vdivq_f64, /)

#undef SETSDB_NEON_BINARY

const KernelTable kNeonTable{Isa::kNeon, scale, sum, shifted_sum, min, max, add, sub, mul, div};

}  // namespace

const KernelTable* neon_table() { return &kNeonTable; }

#else

const KernelTable* neon_table() { return nullptr; }

#endif

}  // namespace setsdb::kernels::detail
