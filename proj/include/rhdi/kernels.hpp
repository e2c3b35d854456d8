#pragma once

#include <cstddef>
#include <string>

namespace rhdi::kernels {

// Elementwise kernels used in the solver inner loops. Each has a scalar
// reference implementation and, where the hardware supports it, a SIMD
// variant selected once at startup. The elementwise kernels are bit-exact
// across implementations; the reductions may differ by rounding only.

enum class Isa { Scalar, Avx2, Neon };

Isa active_isa();
bool isa_supported(Isa isa);
// Selects an implementation; returns false (and keeps the current one) if
// the requested ISA is not available on this machine.
bool force_isa(Isa isa);
std::string isa_name(Isa isa);

// y[i] = min(max(x[i], -radius), radius)
void clamp_abs(const double* x, double* y, std::size_t n, double radius);

// y[i] = sign(x[i]) * max(|x[i]| - lambda, 0)
void soft_threshold(const double* x, double* y, std::size_t n, double lambda);

// Proximal map of w * phi_tau, phi_tau(t) = tau*t+ + (1-tau)*t-:
// y[i] = x[i] - tau*w      if x[i] >  tau*w
//        x[i] + (1-tau)*w  if x[i] < -(1-tau)*w
//        0                 otherwise
void prox_check(const double* x, double* y, std::size_t n, double tau, double w);

// sum_i phi_tau(x[i])
double check_loss_sum(const double* x, std::size_t n, double tau);

namespace scalar {
void clamp_abs(const double* x, double* y, std::size_t n, double radius);
void soft_threshold(const double* x, double* y, std::size_t n, double lambda);
void prox_check(const double* x, double* y, std::size_t n, double tau, double w);
double check_loss_sum(const double* x, std::size_t n, double tau);
}  // namespace scalar

}  // namespace rhdi::kernels
