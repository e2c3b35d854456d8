#pragma once

#include <optional>

#include <Eigen/Dense>

#include "rhdi/core.hpp"

namespace rhdi {

// How the noise density at the K residual quantiles is obtained.
struct DensityMode {
  enum class Kind { Known, Estimated };

  Kind kind = Kind::Estimated;
  std::optional<NoiseModel> noise;  // Known: density evaluated at b_hat
  double bandwidth = 0.0;           // Estimated: 0 means use default_bandwidth
  int s_hat = 1;                    // sparsity plugged into the default bandwidth
  int p = 0;                        // ambient dimension for the default bandwidth

  static DensityMode known(NoiseModel m);
  static DensityMode estimated(int s_hat, int p, double bandwidth = 0.0);
};

struct NuisanceEstimates {
  QuantileGrid grid;
  Eigen::VectorXd b_hat;  // residual quantiles at the grid levels
  Eigen::VectorXd f_hat;  // density at those quantiles, floored/ceiled
  double theta_hat = 0.0;
  double sigma_K = 0.0;
  DensityMode::Kind mode = DensityMode::Kind::Known;
  double bandwidth = 0.0;  // 0 in known mode
  int s_used = 1;
};

// Density estimates are clipped into [floor, ceiling] to keep theta_hat and
// the derived variances finite.
inline constexpr double kDensityFloor = 1e-4;
inline constexpr double kDensityCeiling = 1e4;

// sum over pairs (k, k') of min(tau_k, tau_k') * (1 - max(tau_k, tau_k')).
double sigma_k_sq(const QuantileGrid& grid);

// (max(s_hat,1) * log(max(p,n)) / n)^(1/6), clipped so that every tau_k +- h
// stays inside (0.01, 0.99).
double default_bandwidth(int s_hat, int n, int p, const QuantileGrid& grid);

// Difference quotient 2h / (Q(tau_k + h) - Q(tau_k - h)) on the empirical
// residual quantiles.
Eigen::VectorXd estimate_density_at_quantiles(const Eigen::VectorXd& residuals,
                                              const QuantileGrid& grid, double h);

NuisanceEstimates estimate_nuisance(const Eigen::VectorXd& residuals,
                                    const QuantileGrid& grid, const DensityMode& mode);

// Asymptotic relative efficiency vs the square-loss de-biased estimator:
// variance(noise) * theta_K^2 / sigma_K^2 with theta_K from the exact noise
// density at its exact quantiles. Errors when the variance does not exist.
double are_vs_square(const QuantileGrid& grid, const NoiseModel& noise);

}  // namespace rhdi
