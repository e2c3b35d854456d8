// NEON variants of the elementwise solver kernels (aarch64 only).

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cstddef>

namespace rhdi::kernels::neon {

void clamp_abs(const double* x, double* y, std::size_t n, double radius) {
  const float64x2_t hi = vdupq_n_f64(radius);
  const float64x2_t lo = vdupq_n_f64(-radius);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t v = vld1q_f64(x + i);
    v = vminq_f64(vmaxq_f64(v, lo), hi);
    vst1q_f64(y + i, v);
  }
  for (; i < n; ++i) {
    const double v = x[i];
    y[i] = v < -radius ? -radius : (v > radius ? radius : v);
  }
}

void soft_threshold(const double* x, double* y, std::size_t n, double lambda) {
  const float64x2_t lam = vdupq_n_f64(lambda);
  const float64x2_t zero = vdupq_n_f64(0.0);
  const uint64x2_t sign = vdupq_n_u64(0x8000000000000000ull);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t v = vld1q_f64(x + i);
    const float64x2_t a = vsubq_f64(vabsq_f64(v), lam);
    const uint64x2_t pos = vcgtq_f64(a, zero);
    const uint64x2_t signed_a =
        vorrq_u64(vreinterpretq_u64_f64(a),
                  vandq_u64(sign, vreinterpretq_u64_f64(v)));
    vst1q_f64(y + i, vreinterpretq_f64_u64(vandq_u64(pos, signed_a)));
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
  const float64x2_t hi = vdupq_n_f64(hi_s);
  const float64x2_t lo = vdupq_n_f64(lo_s);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t v = vld1q_f64(x + i);
    const uint64x2_t above = vcgtq_f64(v, hi);
    const uint64x2_t below = vcltq_f64(v, lo);
    const uint64x2_t upper =
        vandq_u64(above, vreinterpretq_u64_f64(vsubq_f64(v, hi)));
    const uint64x2_t lower =
        vandq_u64(below, vreinterpretq_u64_f64(vsubq_f64(v, lo)));
    vst1q_f64(y + i, vreinterpretq_f64_u64(vorrq_u64(upper, lower)));
  }
  for (; i < n; ++i) {
    const double v = x[i];
    y[i] = v > hi_s ? v - hi_s : (v < lo_s ? v - lo_s : 0.0);
  }
}

double check_loss_sum(const double* x, std::size_t n, double tau) {
  const float64x2_t tp = vdupq_n_f64(tau);
  const float64x2_t tm = vdupq_n_f64(tau - 1.0);
  const float64x2_t zero = vdupq_n_f64(0.0);
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t t = vld1q_f64(x + i);
    const uint64x2_t pos = vcgtq_f64(t, zero);
    const float64x2_t coef = vbslq_f64(pos, tp, tm);
    acc = vfmaq_f64(acc, coef, t);
  }
  double sum = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
  for (; i < n; ++i) {
    const double t = x[i];
    sum += t > 0.0 ? tau * t : (tau - 1.0) * t;
  }
  return sum;
}

}  // namespace rhdi::kernels::neon

#endif  // aarch64
