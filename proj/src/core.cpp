#include "rhdi/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rhdi/rng.hpp"

namespace rhdi {

QuantileGrid QuantileGrid::equispaced(int K) {
  if (K < 1) throw std::domain_error("quantile grid needs K >= 1");
  QuantileGrid g;
  g.taus.resize(K);
  for (int k = 1; k <= K; ++k) g.taus[k - 1] = static_cast<double>(k) / (K + 1);
  return g;
}

void QuantileGrid::validate() const {
  if (taus.empty()) throw std::domain_error("empty quantile grid");
  double prev = 0.0;
  for (double tau : taus) {
    if (!(tau > prev && tau < 1.0))
      throw std::domain_error("quantile grid must be strictly increasing inside (0,1)");
    prev = tau;
  }
}

CovarianceSpec CovarianceSpec::identity() { return CovarianceSpec{}; }

CovarianceSpec CovarianceSpec::banded_circulant(double value, int width) {
  CovarianceSpec s;
  s.kind = Kind::BandedCirculant;
  s.band_value = value;
  s.band_width = width;
  return s;
}

CovarianceSpec CovarianceSpec::explicit_cov(Eigen::MatrixXd sigma) {
  CovarianceSpec s;
  s.kind = Kind::Explicit;
  s.explicit_matrix = std::move(sigma);
  return s;
}

Eigen::MatrixXd CovarianceSpec::materialize(int p) const {
  switch (kind) {
    case Kind::Identity:
      return Eigen::MatrixXd::Identity(p, p);
    case Kind::BandedCirculant: {
      Eigen::MatrixXd S = Eigen::MatrixXd::Identity(p, p);
      for (int j = 0; j < p; ++j) {
        for (int k = 0; k < p; ++k) {
          if (j == k) continue;
          int d = std::abs(j - k);
          d = std::min(d, p - d);
          if (d <= band_width) S(j, k) = band_value;
        }
      }
      return S;
    }
    case Kind::Explicit:
      if (explicit_matrix.rows() != p || explicit_matrix.cols() != p)
        throw std::domain_error("explicit covariance has wrong dimensions");
      return explicit_matrix;
  }
  throw std::domain_error("unknown covariance kind");
}

Eigen::VectorXd SimulationDesign::leading_support(int p, int s, double value) {
  if (s < 0 || s > p) throw std::domain_error("support size outside [0, p]");
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  b.head(s).setConstant(value);
  return b;
}

double check_loss(double t, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::domain_error("check loss needs tau in (0,1)");
  return t > 0.0 ? tau * t : (tau - 1.0) * t;
}

double empirical_quantile(std::vector<double> values, double tau) {
  if (values.empty()) throw std::domain_error("quantile of empty sample");
  if (!(tau > 0.0 && tau < 1.0)) throw std::domain_error("quantile level outside (0,1)");
  auto n = static_cast<double>(values.size());
  auto k = static_cast<std::ptrdiff_t>(std::ceil(tau * n));
  k = std::clamp<std::ptrdiff_t>(k, 1, values.size());
  std::nth_element(values.begin(), values.begin() + (k - 1), values.end());
  return values[k - 1];
}

GeneratedData generate_dataset(const SimulationDesign& design) {
  const int n = design.n;
  const int p = design.p;
  if (n < 1 || p < 1) throw std::domain_error("design needs n >= 1 and p >= 1");
  if (design.beta_star.size() != p) throw std::domain_error("beta_star length differs from p");

  Eigen::MatrixXd Sigma = design.covariance.materialize(p);
  Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("covariance matrix is not positive definite");
  Eigen::MatrixXd L = llt.matrixL();

  CounterRng zrng(design.seed, {stream::kDesign});
  Eigen::MatrixXd Z(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) Z(i, j) = zrng.normal();

  GeneratedData out;
  out.data.X = Z * L.transpose();

  CounterRng erng(design.seed, {stream::kNoise});
  out.noise.resize(n);
  for (int i = 0; i < n; ++i) out.noise[i] = design.noise.sample(erng);

  out.data.y = out.data.X * design.beta_star + out.noise;
  return out;
}

Eigen::MatrixXd gram_matrix(const Dataset& data) {
  return (data.X.transpose() * data.X) / static_cast<double>(data.n());
}

}  // namespace rhdi
