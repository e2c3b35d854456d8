#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "rhdi/noise.hpp"

namespace rhdi {

struct Dataset {
  Eigen::MatrixXd X;  // n x p design
  Eigen::VectorXd y;  // n responses

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }
};

// Strictly increasing quantile levels inside (0,1).
struct QuantileGrid {
  std::vector<double> taus;

  // Equally spaced grid k/(K+1), k = 1..K.
  static QuantileGrid equispaced(int K);
  static QuantileGrid median() { return equispaced(1); }

  int K() const { return static_cast<int>(taus.size()); }
  void validate() const;
};

struct CovarianceSpec {
  enum class Kind { Identity, BandedCirculant, Explicit };

  Kind kind = Kind::Identity;
  // BandedCirculant: 1 on the diagonal, band_value where the circulant
  // distance min(|j-k|, p-|j-k|) is in [1, band_width].
  double band_value = 0.1;
  int band_width = 5;
  Eigen::MatrixXd explicit_matrix;

  static CovarianceSpec identity();
  static CovarianceSpec banded_circulant(double value, int width);
  static CovarianceSpec explicit_cov(Eigen::MatrixXd sigma);

  Eigen::MatrixXd materialize(int p) const;
};

struct SimulationDesign {
  int n = 0;
  int p = 0;
  Eigen::VectorXd beta_star;
  CovarianceSpec covariance;
  NoiseModel noise = NoiseModel::gaussian(1.0);
  std::uint64_t seed = 0;

  // beta with `s` leading coordinates equal to `value`, rest zero.
  static Eigen::VectorXd leading_support(int p, int s, double value);
};

struct GeneratedData {
  Dataset data;
  Eigen::VectorXd noise;  // realized errors, y - X beta_star
};

// Composite check loss building block: tau * t_+ + (1 - tau) * t_-.
double check_loss(double t, double tau);

// k-th smallest with k = ceil(tau * n); the classical lower sample quantile.
double empirical_quantile(std::vector<double> values, double tau);

// Rows of X are N(0, Sigma) draws, errors come from the noise model, and
// y = X beta_star + eps. Identical seeds give bit-identical output.
GeneratedData generate_dataset(const SimulationDesign& design);

// Uncentered second-moment matrix X^T X / n used throughout.
Eigen::MatrixXd gram_matrix(const Dataset& data);

}  // namespace rhdi
