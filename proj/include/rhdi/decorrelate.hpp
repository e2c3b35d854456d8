#pragma once

#include <vector>

#include <Eigen/Dense>

#include "rhdi/core.hpp"
#include "rhdi/first_stage.hpp"
#include "rhdi/nuisance.hpp"
#include "rhdi/optim.hpp"

namespace rhdi {

struct GammaParams {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double gamma3 = 0.0;
  double escalation_factor = 1.5;
  int max_escalations = 8;

  GammaParams scaled(double f) const {
    GammaParams g = *this;
    g.gamma1 *= f;
    g.gamma2 *= f;
    g.gamma3 *= f;
    return g;
  }
};

// gamma1 = 0.5 sqrt(log p / n), gamma2 = gamma3 = 5 sqrt(log p).
GammaParams default_gammas(int n, int p);

enum class MVariant { VarianceMin, L1Min };

struct ColumnRecord {
  bool feasible = false;
  int escalations_used = 0;
  // Achieved constraint values: ||Sigma mu - e_j||_inf, ||X mu||_inf,
  // |n^{-1/2} sum_i mu' x_i|.
  double c1 = 0.0, c2 = 0.0, c3 = 0.0;
  double objective = 0.0;
  GammaParams gammas_final;
  SolveReport report;
};

// Rows mu_j' of the decorrelation matrix, possibly restricted to a subset of
// coordinates (used when only a group G of coordinates is tested).
struct DecorrelationMatrix {
  Eigen::MatrixXd rows;  // one row per entry of `columns`
  MVariant variant = MVariant::VarianceMin;
  std::vector<int> columns;
  std::vector<ColumnRecord> per_column;
  std::vector<int> row_index;  // length p; -1 where not solved

  int p() const { return static_cast<int>(row_index.size()); }
  bool covers(int j) const { return j >= 0 && j < p() && row_index[static_cast<std::size_t>(j)] >= 0; }
  Eigen::VectorXd mu(int j) const;
  // Dense p x p matrix; requires full coverage.
  Eigen::MatrixXd dense() const;
};

// Constraint slack used when certifying a stored row against its gammas.
inline constexpr double kMuFeasTol = 1e-6;

std::pair<Eigen::VectorXd, ColumnRecord> solve_mu_column(
    const Eigen::MatrixXd& Sigma_hat, const Eigen::MatrixXd& X, int j,
    const GammaParams& gammas, MVariant variant, const SolverSettings& settings = {});

// Solves every requested column (all of them by default); columns are
// independent and are distributed over `threads` workers with results
// identical to a single-threaded run.
DecorrelationMatrix build_M(const Dataset& data, const GammaParams& gammas,
                            MVariant variant, const SolverSettings& settings = {},
                            const std::vector<int>* columns = nullptr, int threads = 1);

// kappa = sum_k n^{-1} sum_i (1{y_i <= x_i' beta + b_k} - tau_k) x_i.
Eigen::VectorXd compute_kappa(const Dataset& data, const Eigen::VectorXd& beta,
                              const Eigen::VectorXd& b, const QuantileGrid& grid);

struct DebiasedEstimate {
  enum class Kind { CQ, Square };

  Kind kind = Kind::CQ;
  Eigen::VectorXd beta_hat;
  Eigen::VectorXd beta_d;        // NaN at coordinates M does not cover
  Eigen::VectorXd kappa;         // empty for square de-biasing
  Eigen::VectorXd mu_sigma_mu;   // mu_j' Sigma_hat mu_j
  Eigen::VectorXd var_diag;      // per-coordinate asymptotic variance
  double theta_hat = 0.0;
  double sigma_K = 0.0;
  double sigma_hat = 0.0;  // square de-biasing only
  int n = 0;
  FitMethod source_fit = FitMethod::PCQR;
  MVariant m_variant = MVariant::VarianceMin;
  std::vector<int> columns;
};

// beta_d = beta_hat - theta_hat^{-1} M kappa;
// var_diag_j = sigma_K^2 theta_hat^{-2} mu_j' Sigma mu_j.
// Uses the fit's own intercepts when it has them, otherwise the residual
// quantiles recorded in the nuisance estimates.
DebiasedEstimate debias_cq(const FirstStageFit& fit, const NuisanceEstimates& nuisance,
                           const DecorrelationMatrix& M, const Dataset& data,
                           const QuantileGrid& grid);

// beta_d = beta_hat + M X'(y - X beta_hat)/n; var_diag_j = sigma_hat^2 mu_j'
// Sigma mu_j with sigma_hat from the scaled lasso.
DebiasedEstimate debias_square(const FirstStageFit& fit, double sigma_hat,
                               const DecorrelationMatrix& M, const Dataset& data);

}  // namespace rhdi
