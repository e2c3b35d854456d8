#pragma once

#include <utility>

#include <Eigen/Dense>

#include "rhdi/core.hpp"
#include "rhdi/optim.hpp"

namespace rhdi {

enum class FitMethod { PCQR, PQR, PLAD, Lasso };

const char* fit_method_name(FitMethod m);

struct FirstStageFit {
  FitMethod method = FitMethod::PCQR;
  Eigen::VectorXd beta_hat;
  Eigen::VectorXd b_hat;  // K intercepts; empty for Lasso
  QuantileGrid grid;      // empty for Lasso
  double lambda = 0.0;
  int trunc_s = 0;  // 0 means no truncation was applied
  SolveReport report;

  // Support under the |beta_j| > 1e-6 nonzero convention.
  std::vector<int> support() const;
};

// Coordinates are counted as nonzero when their magnitude exceeds this.
inline constexpr double kNonzeroTol = 1e-6;

// K = 1 gives the single-quantile (PLAD/PQR) default; the composite
// subgradient grows linearly in K, so the penalty must too.
double default_pcqr_lambda(int n, int p, int K = 1);
double default_scaled_lasso_lambda(int n, int p);
// Effective penalty for the unnormalized lasso objective given a noise scale.
double default_lasso_lambda(int n, int p, double sigma_hat);

// Penalized composite quantile regression:
//   min over (beta, b)  sum_k (1/n) sum_i check(y_i - x_i' beta - b_k, tau_k)
//                       + lambda ||beta||_1.
// Intercepts are not penalized. Throws SolverError when ADMM fails to reach
// tolerance within the iteration budget.
FirstStageFit fit_pcqr(const Dataset& data, const QuantileGrid& grid, double lambda,
                       const SolverSettings& settings = {});

// Single-quantile special case (K = 1).
FirstStageFit fit_pqr(const Dataset& data, double tau, double lambda,
                      const SolverSettings& settings = {});

// Median regression, i.e. penalized least absolute deviations.
FirstStageFit fit_plad(const Dataset& data, double lambda,
                       const SolverSettings& settings = {});

// Intercepts implied by a coefficient vector: the tau_k-th empirical
// quantiles of the residuals y - X beta.
Eigen::VectorXd derive_b_from_beta(const Dataset& data, const Eigen::VectorXd& beta,
                                   const QuantileGrid& grid);

// Unnormalized lasso, min ||y - X beta||^2 + lambda ||beta||_1, by cyclic
// coordinate descent. No intercept.
FirstStageFit fit_lasso(const Dataset& data, double lambda,
                        const SolverSettings& settings = {});

// Scaled lasso: alternate sigma <- ||y - X beta|| / sqrt(n) and a lasso fit
// with effective penalty 2 n sigma lambda_tilde. Returns the fit and sigma.
std::pair<FirstStageFit, double> scaled_lasso(const Dataset& data, double lambda_tilde,
                                              const SolverSettings& settings = {});

// Keeps the s largest-magnitude coordinates (ties resolved toward lower
// index), zeroing the rest. Intercepts are left untouched.
FirstStageFit truncate_to_s(const FirstStageFit& fit, int s);

struct KktResult {
  double max_violation = 0.0;
  double tol = 0.0;
  bool passes = false;
};

// Certifies stationarity of a PCQR/PQR fit. Residuals on the kink are given
// free dual weights inside [tau_k - 1, tau_k], chosen to minimize the
// violation; off-kink residuals pin their weights.
KktResult kkt_check_pcqr(const Dataset& data, const QuantileGrid& grid, double lambda,
                         const FirstStageFit& fit);

double pcqr_objective(const Dataset& data, const QuantileGrid& grid, double lambda,
                      const Eigen::VectorXd& beta, const Eigen::VectorXd& b);

}  // namespace rhdi
