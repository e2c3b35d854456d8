// AVX2 variants of the elementwise solver kernels. This translation unit is
// compiled with -mavx2 on x86-64; dispatch in kernels.cpp only routes here
// after a runtime CPU check.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cstddef>

namespace rhdi::kernels::avx2 {

namespace {
const __m256d kSignMask = _mm256_set1_pd(-0.0);
}

void clamp_abs(const double* x, double* y, std::size_t n, double radius) {
  const __m256d hi = _mm256_set1_pd(radius);
  const __m256d lo = _mm256_set1_pd(-radius);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_loadu_pd(x + i);
    v = _mm256_min_pd(_mm256_max_pd(v, lo), hi);
    _mm256_storeu_pd(y + i, v);
  }
  for (; i < n; ++i) {
    const double v = x[i];
    y[i] = v < -radius ? -radius : (v > radius ? radius : v);
  }
}

void soft_threshold(const double* x, double* y, std::size_t n, double lambda) {
  const __m256d lam = _mm256_set1_pd(lambda);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    const __m256d absv = _mm256_andnot_pd(kSignMask, v);
    const __m256d a = _mm256_sub_pd(absv, lam);
    const __m256d pos = _mm256_cmp_pd(a, zero, _CMP_GT_OQ);
    // a > 0 has a clear sign bit, so restoring the sign of v is an OR.
    const __m256d signed_a = _mm256_or_pd(a, _mm256_and_pd(kSignMask, v));
    _mm256_storeu_pd(y + i, _mm256_and_pd(pos, signed_a));
  }
  for (; i < n; ++i) {
    const double v = x[i];
    const double a = (v < 0 ? -v : v) - lambda;
    y[i] = a > 0.0 ? (v < 0 ? -a : a) : 0.0;
  }
}

void prox_check(const double* x, double* y, std::size_t n, double tau, double w) {
  const double hi_s = tau * w;
  const double lo_s = -(1.0 - tau) * w;
  const __m256d hi = _mm256_set1_pd(hi_s);
  const __m256d lo = _mm256_set1_pd(lo_s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    const __m256d above = _mm256_cmp_pd(v, hi, _CMP_GT_OQ);
    const __m256d below = _mm256_cmp_pd(v, lo, _CMP_LT_OQ);
    const __m256d upper = _mm256_and_pd(above, _mm256_sub_pd(v, hi));
    const __m256d lower = _mm256_and_pd(below, _mm256_sub_pd(v, lo));
    _mm256_storeu_pd(y + i, _mm256_or_pd(upper, lower));
  }
  for (; i < n; ++i) {
    const double v = x[i];
    y[i] = v > hi_s ? v - hi_s : (v < lo_s ? v - lo_s : 0.0);
  }
}

double check_loss_sum(const double* x, std::size_t n, double tau) {
  const __m256d tp = _mm256_set1_pd(tau);
  const __m256d tm = _mm256_set1_pd(tau - 1.0);
  const __m256d zero = _mm256_setzero_pd();
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d t = _mm256_loadu_pd(x + i);
    const __m256d pos = _mm256_cmp_pd(t, zero, _CMP_GT_OQ);
    const __m256d coef = _mm256_blendv_pd(tm, tp, pos);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(coef, t));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double sum = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) {
    const double t = x[i];
    sum += t > 0.0 ? tau * t : (tau - 1.0) * t;
  }
  return sum;
}

}  // namespace rhdi::kernels::avx2

#endif  // x86-64
