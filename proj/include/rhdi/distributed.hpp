#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rhdi/decorrelate.hpp"
#include "rhdi/inference.hpp"

namespace rhdi {

struct SplitPlan {
  int m = 1;
  int n_block = 0;
  std::vector<std::vector<int>> blocks;  // row indices per split
  int discarded = 0;

  int N_used() const { return m * n_block; }
};

// Random permutation, first m * floor(N/m) indices dealt round-robin into m
// equal blocks; the remainder is discarded with a warning on stderr.
SplitPlan make_split_plan(int N, int m, std::uint64_t seed);

struct DncConfig {
  FitMethod first_stage = FitMethod::PCQR;
  // Keep the trunc_s largest coefficients after the per-split fit and
  // re-derive intercepts; 0 disables truncation.
  int trunc_s = 0;
  double lambda = 0.0;  // 0 means the per-split default
  DensityMode density = DensityMode::estimated(1, 0);
  // Empty means per-split defaults from (n_block, p).
  std::optional<GammaParams> gammas;
};

struct AggregatedEstimate {
  Eigen::VectorXd beta_bar_d;
  std::vector<DebiasedEstimate> per_split;
  Eigen::VectorXd mean_mu_sigma_mu;  // m^{-1} sum_l mu_j' Sigma^(l) mu_j
  Eigen::VectorXd agg_var_diag;      // sigma_K^2 theta_bar^{-2} * the above
  double theta_bar = 0.0;
  double sigma_K = 0.0;
  int m = 0;
  int n_block = 0;
  int N_used = 0;
};

// Runs the full per-split pipeline (fit, truncate, nuisance, M, de-bias) and
// averages. Splits are independent; `threads` workers give identical results
// to a serial run.
AggregatedEstimate dnc_debias(const Dataset& data, const SplitPlan& plan,
                              const QuantileGrid& grid, const DncConfig& cfg,
                              const SolverSettings& settings = {}, int threads = 1);

// De-bias one split only (the per-machine work unit).
DebiasedEstimate dnc_split_work(const Dataset& data, const SplitPlan& plan, int split,
                                const QuantileGrid& grid, const DncConfig& cfg,
                                const SolverSettings& settings = {});

// Combine per-split estimates produced by dnc_split_work.
AggregatedEstimate dnc_aggregate(const std::vector<DebiasedEstimate>& per_split);

ConfidenceInterval dnc_ci(const AggregatedEstimate& agg, int j, double alpha);

// Rejects H0: beta_j = 0 iff |beta_bar_d_j| exceeds
// z_{1-alpha/2} sigma_K sqrt(mean_mu_sigma_mu_j) / (sqrt(N_used) theta_bar).
bool dnc_test(const AggregatedEstimate& agg, int j, double alpha);

// JSON round-trip for shipping per-split estimates between processes.
std::string debiased_to_json(const DebiasedEstimate& est);
DebiasedEstimate debiased_from_json(const std::string& text);

}  // namespace rhdi
