#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rhdi/core.hpp"
#include "rhdi/decorrelate.hpp"
#include "rhdi/distributed.hpp"

namespace rhdi {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One estimator row of the coverage tables: a first stage plus a de-biasing
// rule. The label is what lands in the CSV "method" column.
struct MethodSpec {
  FitMethod first_stage = FitMethod::PLAD;
  DebiasedEstimate::Kind debias = DebiasedEstimate::Kind::CQ;
  QuantileGrid grid;
  std::string label;

  // Tokens: pcqr+cq, plad+cq, lasso+cq, pcqr+square, plad+square,
  // lasso+square, dquant (= plad+cq on the single-level grid {0.5}).
  static MethodSpec parse(const std::string& token, const QuantileGrid& default_grid);
};

struct ExperimentConfig {
  SimulationDesign design;
  int s = 5;  // size of the true support (leading coordinates)
  QuantileGrid grid = QuantileGrid::equispaced(9);
  std::vector<MethodSpec> methods;
  int reps = 100;
  double alpha = 0.05;
  std::optional<GammaParams> gammas;  // empty = defaults from (n, p)
  DensityMode::Kind density_mode = DensityMode::Kind::Known;
  std::uint64_t seed = 1;
  int threads = 1;
  SolverSettings solver;
  std::string output_dir = ".";
  // divide-and-conquer settings (dnc subcommands only)
  int dnc_m = 1;
  int dnc_trunc_s = 0;
};

// The reference simulation setup: n=200, p=250, s=5, unit signal on the
// first five coordinates, banded-circulant covariance (0.1, width 5),
// Gaussian noise, K=9 grid, alpha=0.05, known density.
ExperimentConfig default_experiment();

// Flat TOML-style sections of key = value lines; unknown keys are errors.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

struct CoverageRow {
  std::string method;
  std::string noise;
  double cp_all = 0.0, cp_T = 0.0, cp_Tc = 0.0;
  double al_all = 0.0, al_T = 0.0, al_Tc = 0.0;
  int reps = 0;       // successful replications
  int attempted = 0;  // not emitted in the CSV; recorded in the manifest
};

// Raw per-replication material behind a row, kept for diagnostics and the
// property tests (standardized statistics, histograms).
struct CoverageDetail {
  std::string label;
  Eigen::MatrixXd beta_d;      // reps x p, NaN on failed replications
  Eigen::MatrixXd half_width;  // reps x p
  std::vector<char> ok;        // per-rep success
};

struct CoverageResult {
  std::vector<CoverageRow> rows;  // rows with >= 90% success only
  std::vector<CoverageDetail> details;
  int attempted = 0;
};

// Monte-Carlo coverage study. One decorrelation matrix is built per
// replication and shared by every method; replications are distributed over
// config.threads workers with results independent of the worker count.
CoverageResult run_coverage(const ExperimentConfig& config);

struct HistogramRecord {
  std::string method;
  int coord = 0;
  std::vector<double> values;  // per-replication de-biased values
  double lo = 0.0, hi = 0.0;
  std::vector<int> counts;
};

std::vector<HistogramRecord> run_histogram(const ExperimentConfig& config,
                                           const std::vector<int>& coords, int bins);

std::string coverage_csv(const std::vector<CoverageRow>& rows);
std::vector<CoverageRow> parse_coverage_csv(const std::string& text);
std::string coverage_json(const std::vector<CoverageRow>& rows);

std::string histogram_csv(const std::vector<HistogramRecord>& recs);
std::string histogram_values_csv(const std::vector<HistogramRecord>& recs);
std::string histogram_json(const std::vector<HistogramRecord>& recs);

// FNV-1a hash of the raw config text, printed as 16 hex digits.
std::string config_hash(const std::string& text);

// manifest.json sidecar: config hash, seed, version, and per-row success
// accounting.
std::string manifest_json(const std::string& cfg_hash, std::uint64_t seed,
                          const std::vector<CoverageRow>& rows);

}  // namespace rhdi
