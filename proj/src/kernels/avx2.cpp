// SPDX-License-Identifier: Apache-2.0
#include "setsdb/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define SETSDB_HAVE_AVX2_KERNELS 1
#include <immintrin.h>
#endif

namespace setsdb::kernels::detail {

#if defined(SETSDB_HAVE_AVX2_KERNELS)

// Compiled with a per-function target attribute instead of -mavx2 so no
// inline helper from a shared header gets AVX2 code generated into it.
#define SETSDB_AVX2 __attribute__((target("avx2")))

namespace {

SETSDB_AVX2 double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

SETSDB_AVX2 void scale(const double* in, std::size_t n, double factor, double* out) {
  const __m256d f = _mm256_set1_pd(factor);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(in + i), f));
  for (; i < n; ++i) out[i] = in[i] * factor;
}

SETSDB_AVX2 double sum(const double* in, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(in + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(in + i + 4));
  }
  for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(in + i));
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += in[i];
  return acc;
}

SETSDB_AVX2 double shifted_sum(const double* in, std::size_t n, double pivot) {
  const __m256d p = _mm256_set1_pd(pivot);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_sub_pd(_mm256_loadu_pd(in + i), p));
  double total = hsum(acc);
  for (; i < n; ++i) total += in[i] - pivot;
  return total;
}

SETSDB_AVX2 double min(const double* in, std::size_t n) {
  double m = in[0];
  std::size_t i = 0;
  if (n >= 4) {
    __m256d acc = _mm256_loadu_pd(in);
    for (i = 4; i + 4 <= n; i += 4) acc = _mm256_min_pd(acc, _mm256_loadu_pd(in + i));
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    m = lanes[0];
    for (double v : lanes) m = v < m ? v : m;
  }
  for (; i < n; ++i) m = in[i] < m ? in[i] : m;
  return m;
}

SETSDB_AVX2 double max(const double* in, std::size_t n) {
  double m = in[0];
  std::size_t i = 0;
  if (n >= 4) {
    __m256d acc = _mm256_loadu_pd(in);
    for (i = 4; i + 4 <= n; i += 4) acc = _mm256_max_pd(acc, _mm256_loadu_pd(in + i));
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    m = lanes[0];
    for (double v : lanes) m = v > m ? v : m;
  }
  for (; i < n; ++i) m = in[i] > m ? in[i] : m;
  return m;
}

#define SETSDB_AVX2_BINARY(name, intrinsic, op)                                         \
  SETSDB_AVX2 void name(const double* a, const double* b, std::size_t n, double* out) { \
    std::size_t i = 0;                                                                  \
    for (; i + 4 <= n; i += 4) {                                                        \
      _mm256_storeu_pd(out + i, intrinsic(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i))); \
    }                                                                                   \
    for (; i < n; ++i) out[i] = a[i] op b[i];                                           \
  }

SETSDB_AVX2_BINARY(add, _mm256_add_pd, +)
SETSDB_AVX2_BINARY(sub, _mm256_sub_pd, -)
SETSDB_AVX2_BINARY(mul, _mm256_mul_pd, *)
SETSDB_AVX2_BINARY(div, _mm256_div_pd, /)

#undef SETSDB_AVX2_BINARY

const KernelTable kAvx2Table{Isa::kAvx2, scale, sum, shifted_sum, min, max, add, sub, mul, div};

}  // namespace

const KernelTable* avx2_table() {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") ? &kAvx2Table : nullptr;
}

#else

const KernelTable* avx2_table() { return nullptr; }

#endif

}  // namespace setsdb::kernels::detail
