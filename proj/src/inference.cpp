#include "rhdi/inference.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>
#include <nlohmann/json.hpp>

#include "rhdi/rng.hpp"

namespace rhdi {

namespace {

const boost::math::normal_distribution<double> kStdNormal(0.0, 1.0);

double require_var(const DebiasedEstimate& est, int j) {
  if (j < 0 || j >= est.beta_d.size())
    throw std::out_of_range("inference: coordinate out of range");
  const double v = est.var_diag[j];
  if (!std::isfinite(v) || !(v > 0.0))
    throw std::invalid_argument("inference: coordinate not covered by the decorrelation matrix");
  return v;
}

// Bootstrap threshold: the ceil((1-alpha) B)-th order statistic.
double upper_order_statistic(std::vector<double> draws, double alpha) {
  const auto B = static_cast<double>(draws.size());
  auto k = static_cast<std::ptrdiff_t>(std::ceil((1.0 - alpha) * B));
  k = std::clamp<std::ptrdiff_t>(k, 1, draws.size());
  std::nth_element(draws.begin(), draws.begin() + (k - 1), draws.end());
  return draws[k - 1];
}

struct GroupProjection {
  Eigen::MatrixXd P;  // n x |G|, entries mu_j' x_i
  Eigen::VectorXd deviations;  // sqrt(n) (beta_d_j - beta0_j) over G
};

GroupProjection project_group(const DebiasedEstimate& est, const DecorrelationMatrix& M,
                              const Dataset& data, const std::vector<int>& G,
                              const Eigen::VectorXd& beta0_G) {
  if (G.empty()) throw std::invalid_argument("simultaneous test: empty group");
  if (beta0_G.size() != static_cast<Eigen::Index>(G.size()))
    throw std::invalid_argument("simultaneous test: beta0 length mismatch");
  GroupProjection gp;
  gp.P.resize(data.n(), static_cast<Eigen::Index>(G.size()));
  gp.deviations.resize(static_cast<Eigen::Index>(G.size()));
  const double sqn = std::sqrt(static_cast<double>(est.n));
  for (std::size_t r = 0; r < G.size(); ++r) {
    const int j = G[r];
    require_var(est, j);
    if (!M.covers(j))
      throw std::invalid_argument("simultaneous test: M does not cover a group coordinate");
    gp.P.col(static_cast<Eigen::Index>(r)) = data.X * M.mu(j);
    gp.deviations[static_cast<Eigen::Index>(r)] =
        sqn * (est.beta_d[j] - beta0_G[static_cast<Eigen::Index>(r)]);
  }
  return gp;
}

SimultaneousTestResult run_multiplier(const DebiasedEstimate& est,
                                      const DecorrelationMatrix& M, const Dataset& data,
                                      const NuisanceEstimates& nuisance,
                                      const std::vector<int>& G,
                                      const Eigen::VectorXd& beta0_G, double alpha, int B,
                                      std::uint64_t seed, bool two_sided) {
  if (est.m_variant != MVariant::L1Min)
    throw std::invalid_argument("simultaneous test: estimate must use the l1-minimal variant");
  if (B < 1) throw std::invalid_argument("simultaneous test: B must be positive");
  auto gp = project_group(est, M, data, G, beta0_G);

  const auto n = data.n();
  const double scale = nuisance.sigma_K / nuisance.theta_hat /
                       std::sqrt(static_cast<double>(n));
  std::vector<double> draws(static_cast<std::size_t>(B));
  Eigen::VectorXd g(n), s;
  for (int b = 0; b < B; ++b) {
    CounterRng rng(seed, {stream::kBootstrap, static_cast<std::uint64_t>(b)});
    for (Eigen::Index i = 0; i < n; ++i) g[i] = rng.normal();
    s = gp.P.transpose() * g;
    draws[static_cast<std::size_t>(b)] =
        scale * (two_sided ? s.cwiseAbs().maxCoeff() : s.maxCoeff());
  }

  SimultaneousTestResult res;
  res.mode = two_sided ? SimultaneousTestResult::Mode::MultiplierGaussianTwoSided
                       : SimultaneousTestResult::Mode::MultiplierGaussian;
  res.G = G;
  res.T_G = two_sided ? gp.deviations.cwiseAbs().maxCoeff() : gp.deviations.maxCoeff();
  res.c_alpha = upper_order_statistic(std::move(draws), alpha);
  res.B = B;
  res.level = alpha;
  res.seed = seed;
  res.reject = res.T_G > res.c_alpha;
  return res;
}

}  // namespace

double normal_quantile(double q) {
  if (!(q > 0.0 && q < 1.0)) throw std::domain_error("normal quantile outside (0,1)");
  return boost::math::quantile(kStdNormal, q);
}

ConfidenceInterval coordinate_ci(const DebiasedEstimate& est, int j, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("ci: alpha outside (0,1)");
  const double v = require_var(est, j);
  const double half = normal_quantile(1.0 - alpha / 2.0) * std::sqrt(v / est.n);
  ConfidenceInterval ci;
  ci.j = j;
  ci.lo = est.beta_d[j] - half;
  ci.hi = est.beta_d[j] + half;
  ci.level = 1.0 - alpha;
  ci.half_width = half;
  return ci;
}

WaldResult wald_test(const DebiasedEstimate& est, const DecorrelationMatrix& M,
                     const Dataset& data, const Eigen::MatrixXd& Q,
                     const Eigen::VectorXd& omega, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("wald: alpha outside (0,1)");
  if (est.kind != DebiasedEstimate::Kind::CQ)
    throw std::invalid_argument("wald: requires a composite-quantile de-biased estimate");
  const auto p = data.p();
  const auto q = Q.rows();
  if (Q.cols() != p || omega.size() != q) throw std::invalid_argument("wald: shape mismatch");
  if (q >= p) throw std::invalid_argument("wald: need q < p");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Q.transpose());
  if (qr.rank() < q) throw std::invalid_argument("wald: Q is rank deficient");

  Eigen::MatrixXd Mfull = M.dense();
  Eigen::MatrixXd Sigma = gram_matrix(data);
  Eigen::MatrixXd QM = Q * Mfull;
  Eigen::MatrixXd A = QM * Sigma * QM.transpose();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
  if (eig.info() != Eigen::Success) throw std::runtime_error("wald: eigensolver failed");
  const double emax = eig.eigenvalues().maxCoeff();
  if (!(eig.eigenvalues().minCoeff() > 1e-12 * std::max(emax, 1.0)))
    throw std::invalid_argument("wald: A is singular");
  Eigen::MatrixXd Ainvsqrt = eig.eigenvectors() *
                             eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                             eig.eigenvectors().transpose();

  Eigen::VectorXd dev = Q * est.beta_d - omega;
  if (!dev.allFinite())
    throw std::invalid_argument("wald: estimate does not cover all coordinates Q touches");

  WaldResult res;
  res.Q = Q;
  res.omega = omega;
  res.level = alpha;
  res.standardized = std::sqrt(static_cast<double>(est.n)) * est.theta_hat / est.sigma_K *
                     (Ainvsqrt * dev);
  const double per_coord = 1.0 - (1.0 - std::pow(1.0 - alpha, 1.0 / static_cast<double>(q))) / 2.0;
  res.threshold = normal_quantile(per_coord);
  res.reject = res.standardized.cwiseAbs().maxCoeff() > res.threshold;
  return res;
}

bool single_coord_test(const DebiasedEstimate& est, int j, double alpha) {
  const double v = require_var(est, j);
  const double thr = normal_quantile(1.0 - alpha / 2.0) * std::sqrt(v / est.n);
  return std::abs(est.beta_d[j]) > thr;
}

double power_gn(double alpha, double gamma_exp, double a, int n, double theta_K,
                double sigma_K, double omega_jj) {
  if (!(omega_jj > 0.0)) throw std::domain_error("power_gn: omega_jj must be positive");
  if (a < 0.0) throw std::domain_error("power_gn: a must be nonnegative");
  const double x = a * std::pow(static_cast<double>(n), 0.5 - gamma_exp) * theta_K /
                   (sigma_K * std::sqrt(omega_jj));
  const double t = normal_quantile(1.0 - alpha / 2.0);
  return boost::math::cdf(kStdNormal, x - t) + boost::math::cdf(kStdNormal, -x - t);
}

std::string to_json(const SimultaneousTestResult& r) {
  nlohmann::ordered_json j;
  switch (r.mode) {
    case SimultaneousTestResult::Mode::MultiplierGaussian: j["mode"] = "multiplier"; break;
    case SimultaneousTestResult::Mode::SimulatedPsi: j["mode"] = "simulated_psi"; break;
    case SimultaneousTestResult::Mode::MultiplierGaussianTwoSided:
      j["mode"] = "multiplier_two_sided";
      break;
  }
  j["statistic"] = r.T_G;
  j["threshold"] = r.c_alpha;
  j["reject"] = r.reject;
  j["level"] = r.level;
  j["B"] = r.B;
  j["seed"] = r.seed;
  j["G"] = r.G;
  return j.dump();
}

SimultaneousTestResult simultaneous_test(const DebiasedEstimate& est,
                                         const DecorrelationMatrix& M, const Dataset& data,
                                         const NuisanceEstimates& nuisance,
                                         const std::vector<int>& G,
                                         const Eigen::VectorXd& beta0_G, double alpha,
                                         int B, std::uint64_t seed) {
  return run_multiplier(est, M, data, nuisance, G, beta0_G, alpha, B, seed, false);
}

SimultaneousTestResult simultaneous_test_twosided(const DebiasedEstimate& est,
                                                  const DecorrelationMatrix& M,
                                                  const Dataset& data,
                                                  const NuisanceEstimates& nuisance,
                                                  const std::vector<int>& G,
                                                  const Eigen::VectorXd& beta0_G,
                                                  double alpha, int B, std::uint64_t seed) {
  return run_multiplier(est, M, data, nuisance, G, beta0_G, alpha, B, seed, true);
}

SimultaneousTestResult simulated_psi_test(const DebiasedEstimate& est,
                                          const DecorrelationMatrix& M, const Dataset& data,
                                          const NuisanceEstimates& nuisance,
                                          const std::vector<int>& G,
                                          const Eigen::VectorXd& beta0_G, double alpha,
                                          int B, std::uint64_t seed) {
  if (B < 1) throw std::invalid_argument("simulated psi test: B must be positive");
  auto gp = project_group(est, M, data, G, beta0_G);

  const auto n = data.n();
  const double scale = 1.0 / nuisance.theta_hat / std::sqrt(static_cast<double>(n));
  const QuantileGrid& grid = nuisance.grid;
  grid.validate();

  std::vector<double> draws(static_cast<std::size_t>(B));
  Eigen::VectorXd psi(n), s;
  for (int b = 0; b < B; ++b) {
    CounterRng rng(seed, {stream::kPsi, static_cast<std::uint64_t>(b)});
    for (Eigen::Index i = 0; i < n; ++i) {
      const double u = rng.uniform01();
      double v = 0.0;
      for (double tau : grid.taus) v += tau - (u <= tau ? 1.0 : 0.0);
      psi[i] = v;
    }
    s = gp.P.transpose() * psi;
    draws[static_cast<std::size_t>(b)] = scale * s.maxCoeff();
  }

  SimultaneousTestResult res;
  res.mode = SimultaneousTestResult::Mode::SimulatedPsi;
  res.G = G;
  res.T_G = gp.deviations.maxCoeff();
  res.c_alpha = upper_order_statistic(std::move(draws), alpha);
  res.B = B;
  res.level = alpha;
  res.seed = seed;
  res.reject = res.T_G > res.c_alpha;
  return res;
}

}  // namespace rhdi
