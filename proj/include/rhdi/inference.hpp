#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rhdi/decorrelate.hpp"

namespace rhdi {

struct ConfidenceInterval {
  int j = 0;
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.0;
  double half_width = 0.0;

  bool contains(double v) const { return lo <= v && v <= hi; }
};

// Standard normal quantile at probability q in (0,1).
double normal_quantile(double q);

// beta_d_j +- z_{1-alpha/2} sqrt(var_diag_j / n).
ConfidenceInterval coordinate_ci(const DebiasedEstimate& est, int j, double alpha);

struct WaldResult {
  Eigen::MatrixXd Q;
  Eigen::VectorXd omega;
  Eigen::VectorXd standardized;  // A^{-1/2}-whitened statistic
  double threshold = 0.0;        // per-coordinate box threshold
  bool reject = false;
  double level = 0.0;
};

// Tests Q beta = omega with A = Q M Sigma M' Q'; the acceptance region is the
// axis-aligned box whose standard-normal mass is 1 - alpha, so each
// coordinate is compared against z_{1-(1-(1-alpha)^{1/q})/2}.
WaldResult wald_test(const DebiasedEstimate& est, const DecorrelationMatrix& M,
                     const Dataset& data, const Eigen::MatrixXd& Q,
                     const Eigen::VectorXd& omega, double alpha);

// Rejects H0: beta_j = 0 iff 0 falls outside coordinate_ci(est, j, alpha).
bool single_coord_test(const DebiasedEstimate& est, int j, double alpha);

// Two-sided normal power Phi(x - t) + Phi(-x - t) with
// x = a n^{1/2-gamma} theta_K / (sigma_K sqrt(omega_jj)) and t = z_{1-alpha/2}.
double power_gn(double alpha, double gamma_exp, double a, int n, double theta_K,
                double sigma_K, double omega_jj);

struct SimultaneousTestResult {
  enum class Mode { MultiplierGaussian, SimulatedPsi, MultiplierGaussianTwoSided };

  Mode mode = Mode::MultiplierGaussian;
  std::vector<int> G;
  double T_G = 0.0;
  double c_alpha = 0.0;
  int B = 0;
  bool reject = false;
  double level = 0.0;
  std::uint64_t seed = 0;
};

std::string to_json(const SimultaneousTestResult& r);

// Multiplier bootstrap of the one-sided max statistic
// T_G = max_{j in G} sqrt(n) (beta_d_j - beta0_j), calibrated by B draws of
// U_G = max_j n^{-1/2} sum_i sigma_K theta^{-1} mu_j' x_i g_i with g ~ N(0, I_n).
// The estimate must come from the l1-minimal decorrelation variant.
SimultaneousTestResult simultaneous_test(const DebiasedEstimate& est,
                                         const DecorrelationMatrix& M, const Dataset& data,
                                         const NuisanceEstimates& nuisance,
                                         const std::vector<int>& G,
                                         const Eigen::VectorXd& beta0_G, double alpha,
                                         int B, std::uint64_t seed);

// Distribution-free calibration: per draw simulates u_i ~ U(0,1), forms
// Psi_i = sum_k (tau_k - 1{u_i <= tau_k}) and V_G = max_j n^{-1/2} sum_i
// theta^{-1} mu_j' x_i Psi_i. Same T_G as above.
SimultaneousTestResult simulated_psi_test(const DebiasedEstimate& est,
                                          const DecorrelationMatrix& M, const Dataset& data,
                                          const NuisanceEstimates& nuisance,
                                          const std::vector<int>& G,
                                          const Eigen::VectorXd& beta0_G, double alpha,
                                          int B, std::uint64_t seed);

// Convenience two-sided variant (max of |deviations| against |U_G| draws).
// Not part of the printed procedure.
SimultaneousTestResult simultaneous_test_twosided(const DebiasedEstimate& est,
                                                  const DecorrelationMatrix& M,
                                                  const Dataset& data,
                                                  const NuisanceEstimates& nuisance,
                                                  const std::vector<int>& G,
                                                  const Eigen::VectorXd& beta0_G,
                                                  double alpha, int B, std::uint64_t seed);

}  // namespace rhdi
