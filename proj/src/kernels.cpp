#include "rhdi/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace rhdi::kernels {

namespace scalar {

void clamp_abs(const double* x, double* y, std::size_t n, double radius) {
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = std::min(std::max(x[i], -radius), radius);
  }
}

void soft_threshold(const double* x, double* y, std::size_t n, double lambda) {
  for (std::size_t i = 0; i < n; ++i) {
    const double a = std::abs(x[i]) - lambda;
    y[i] = a > 0.0 ? std::copysign(a, x[i]) : 0.0;
  }
}

void prox_check(const double* x, double* y, std::size_t n, double tau, double w) {
  const double hi = tau * w;
  const double lo = -(1.0 - tau) * w;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x[i];
    y[i] = v > hi ? v - hi : (v < lo ? v - lo : 0.0);
  }
}

double check_loss_sum(const double* x, std::size_t n, double tau) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = x[i];
    acc += t > 0.0 ? tau * t : (tau - 1.0) * t;
  }
  return acc;
}

}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define RHDI_X86 1
namespace avx2 {
void clamp_abs(const double* x, double* y, std::size_t n, double radius);
void soft_threshold(const double* x, double* y, std::size_t n, double lambda);
void prox_check(const double* x, double* y, std::size_t n, double tau, double w);
double check_loss_sum(const double* x, std::size_t n, double tau);
}  // namespace avx2
#endif

#if defined(__aarch64__)
#define RHDI_ARM64 1
namespace neon {
void clamp_abs(const double* x, double* y, std::size_t n, double radius);
void soft_threshold(const double* x, double* y, std::size_t n, double lambda);
void prox_check(const double* x, double* y, std::size_t n, double tau, double w);
double check_loss_sum(const double* x, std::size_t n, double tau);
}  // namespace neon
#endif

namespace {

struct Table {
  void (*clamp_abs)(const double*, double*, std::size_t, double);
  void (*soft_threshold)(const double*, double*, std::size_t, double);
  void (*prox_check)(const double*, double*, std::size_t, double, double);
  double (*check_loss_sum)(const double*, std::size_t, double);
};

constexpr Table kScalarTable{scalar::clamp_abs, scalar::soft_threshold,
                             scalar::prox_check, scalar::check_loss_sum};

Table table_for(Isa isa) {
  switch (isa) {
#ifdef RHDI_X86
    case Isa::Avx2:
      return Table{avx2::clamp_abs, avx2::soft_threshold, avx2::prox_check,
                   avx2::check_loss_sum};
#endif
#ifdef RHDI_ARM64
    case Isa::Neon:
      return Table{neon::clamp_abs, neon::soft_threshold, neon::prox_check,
                   neon::check_loss_sum};
#endif
    default:
      return kScalarTable;
  }
}

Isa detect() {
#ifdef RHDI_X86
  if (__builtin_cpu_supports("avx2")) return Isa::Avx2;
#endif
#ifdef RHDI_ARM64
  return Isa::Neon;
#endif
  return Isa::Scalar;
}

Isa g_isa = detect();
Table g_table = table_for(g_isa);

}  // namespace

Isa active_isa() { return g_isa; }

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#ifdef RHDI_X86
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Isa::Neon:
#ifdef RHDI_ARM64
      return true;
#else
      return false;
#endif
  }
  return false;
}

bool force_isa(Isa isa) {
  if (!isa_supported(isa)) return false;
  g_isa = isa;
  g_table = table_for(isa);
  return true;
}

std::string isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
    case Isa::Neon:
      return "neon";
  }
  return "?";
}

void clamp_abs(const double* x, double* y, std::size_t n, double radius) {
  g_table.clamp_abs(x, y, n, radius);
}

void soft_threshold(const double* x, double* y, std::size_t n, double lambda) {
  g_table.soft_threshold(x, y, n, lambda);
}

void prox_check(const double* x, double* y, std::size_t n, double tau, double w) {
  g_table.prox_check(x, y, n, tau, w);
}

double check_loss_sum(const double* x, std::size_t n, double tau) {
  return g_table.check_loss_sum(x, n, tau);
}

}  // namespace rhdi::kernels
