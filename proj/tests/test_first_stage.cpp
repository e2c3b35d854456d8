#include <doctest.h>

#include <cmath>
#include <vector>

#include "rhdi/core.hpp"
#include "rhdi/first_stage.hpp"
#include "support.hpp"

using namespace rhdi;

namespace {

SolverSettings loose() {
  SolverSettings st;
  st.tol_primal = st.tol_dual = 1e-7;
  st.max_iter = 200000;
  return st;
}

SolverSettings production() {
  SolverSettings st;
  st.tol_primal = st.tol_dual = 1e-4;
  st.max_iter = 30000;
  return st;
}

}  // namespace

TEST_CASE("default penalties scale as advertised") {
  const int n = 200, p = 250;
  CHECK(default_pcqr_lambda(n, p, 1) == doctest::Approx(8.0 * std::sqrt(std::log(250.0)) / n));
  CHECK(default_pcqr_lambda(n, p, 9) == doctest::Approx(9.0 * default_pcqr_lambda(n, p, 1)));
  CHECK_THROWS_AS(default_pcqr_lambda(n, p, 0), std::invalid_argument);
  CHECK(default_scaled_lasso_lambda(n, p) ==
        doctest::Approx(10.0 * std::sqrt(2.0 * std::log(250.0)) / n));
  CHECK(default_lasso_lambda(n, p, 1.5) ==
        doctest::Approx(2.0 * 1.5 * std::sqrt(2.0 * n * std::log(250.0))));
  // Heavier penalties for wider designs at fixed n.
  CHECK(default_pcqr_lambda(n, 500, 1) > default_pcqr_lambda(n, 250, 1));
}

TEST_CASE("fit method names") {
  CHECK(std::string(fit_method_name(FitMethod::PCQR)) == "pcqr");
  CHECK(std::string(fit_method_name(FitMethod::PQR)) == "pqr");
  CHECK(std::string(fit_method_name(FitMethod::PLAD)) == "plad");
  CHECK(std::string(fit_method_name(FitMethod::Lasso)) == "lasso");
}

TEST_CASE("huge penalty zeroes beta and leaves quantile intercepts") {
  const auto inst = testsupport::random_instance(15, 3, 21);
  const auto grid = QuantileGrid{{0.25, 0.75}};
  const auto fit = fit_pcqr(inst, grid, 1e6, loose());
  REQUIRE(fit.report.converged);
  CHECK(fit.beta_hat.cwiseAbs().maxCoeff() == 0.0);  // exact zeros from soft threshold
  std::vector<double> yv(inst.y.data(), inst.y.data() + inst.y.size());
  for (int k = 0; k < 2; ++k) {
    // At beta = 0 the intercept minimizes a scalar check loss; compare losses
    // since the minimizer can sit anywhere on a flat segment.
    double fit_loss = 0.0, q_loss = 0.0;
    const double q = empirical_quantile(yv, grid.taus[static_cast<std::size_t>(k)]);
    for (double yi : yv) {
      fit_loss += testsupport::check_val(yi - fit.b_hat[k], grid.taus[static_cast<std::size_t>(k)]);
      q_loss += testsupport::check_val(yi - q, grid.taus[static_cast<std::size_t>(k)]);
    }
    CHECK(fit_loss <= q_loss + 1e-5);
  }
  CHECK(fit.support().empty());
}

TEST_CASE("pcqr agrees with the vertex-enumeration oracle") {
  const auto inst = testsupport::random_instance(15, 2, 31);
  const std::vector<double> taus = {0.3, 0.7};
  const double lambda = 0.3;
  const auto oracle = testsupport::brute_force_pcqr(inst, taus, lambda);
  const auto fit = fit_pcqr(inst, QuantileGrid{taus}, lambda, loose());
  REQUIRE(fit.report.converged);
  const double got = testsupport::cqr_objective(inst, taus, lambda, fit.beta_hat, fit.b_hat);
  CHECK(got <= oracle.objective * (1.0 + 1e-6) + 1e-9);
  CHECK(fit.lambda == lambda);
  CHECK(fit.grid.K() == 2);

  const auto kkt = kkt_check_pcqr(inst, QuantileGrid{taus}, lambda, fit);
  CHECK(kkt.passes);
}

TEST_CASE("pcqr matches the oracle across random instances") {
  for (unsigned seed = 100; seed < 106; ++seed) {
    const int n = 10 + static_cast<int>(seed % 7);
    const int p = 1 + static_cast<int>(seed % 3);
    const auto inst = testsupport::random_instance(n, p, seed);
    const std::vector<double> taus = (seed % 2) ? std::vector<double>{0.5}
                                                : std::vector<double>{0.25, 0.75};
    const double lambda = 0.15 + 0.1 * (seed % 4);
    const auto oracle = testsupport::brute_force_pcqr(inst, taus, lambda);
    const auto fit = fit_pcqr(inst, QuantileGrid{taus}, lambda, loose());
    REQUIRE(fit.report.converged);
    const double got = testsupport::cqr_objective(inst, taus, lambda, fit.beta_hat, fit.b_hat);
    INFO("seed = ", seed);
    CHECK(got <= oracle.objective * (1.0 + 1e-6) + 1e-9);
  }
}

TEST_CASE("pqr is the single-level special case") {
  const auto inst = testsupport::random_instance(12, 2, 5);
  const auto a = fit_pqr(inst, 0.5, 0.2, loose());
  const auto b = fit_pcqr(inst, QuantileGrid{{0.5}}, 0.2, loose());
  CHECK(a.beta_hat == b.beta_hat);
  CHECK(a.b_hat == b.b_hat);
  CHECK(a.method == FitMethod::PLAD);  // tau = 0.5 is labeled as PLAD
  CHECK(fit_pqr(inst, 0.3, 0.2, loose()).method == FitMethod::PQR);
  CHECK(fit_plad(inst, 0.2, loose()).beta_hat == a.beta_hat);
}

TEST_CASE("pqr quarter-quantile agrees with the oracle") {
  const auto inst = testsupport::random_instance(11, 1, 77);
  const double lambda = 0.1;
  const auto fit = fit_pqr(inst, 0.25, lambda, loose());
  REQUIRE(fit.report.converged);
  const auto oracle = testsupport::brute_force_pcqr(inst, {0.25}, lambda);
  const double got = testsupport::cqr_objective(inst, {0.25}, lambda, fit.beta_hat, fit.b_hat);
  CHECK(got <= oracle.objective * (1.0 + 1e-6) + 1e-9);
}

TEST_CASE("derive_b_from_beta recovers residual quantiles") {
  Dataset d;
  d.X = Eigen::MatrixXd::Zero(5, 1);
  d.y.resize(5);
  d.y << -2, -1, 0, 1, 2;
  const auto b = derive_b_from_beta(d, Eigen::VectorXd::Zero(1), QuantileGrid{{0.2, 0.8}});
  REQUIRE(b.size() == 2);
  CHECK(b[0] == -2.0);
  CHECK(b[1] == 1.0);

  // Zero noise: residuals vanish, every intercept is zero.
  Dataset e;
  e.X = Eigen::MatrixXd::Random(8, 2);
  Eigen::VectorXd beta(2);
  beta << 1.0, -0.5;
  e.y = e.X * beta;
  const auto b2 = derive_b_from_beta(e, beta, QuantileGrid::equispaced(3));
  CHECK(b2.cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("lasso closed forms") {
  // p = 1: minimizer of ||y - x b||^2 + lambda |b| is
  // soft_threshold(lambda/2, x'y) / (x'x).
  Dataset d;
  d.X.resize(6, 1);
  d.X << 1.0, -0.5, 0.3, 0.8, -1.2, 0.4;
  d.y.resize(6);
  d.y << 0.9, -0.3, 0.5, 0.7, -1.0, 0.6;
  const double xty = (d.X.col(0).dot(d.y));
  const double xtx = d.X.col(0).squaredNorm();
  for (double lambda : {0.1, 1.0, 3.0}) {
    const auto fit = fit_lasso(d, lambda, loose());
    const double a = std::abs(xty) - lambda / 2.0;
    const double want = a > 0.0 ? std::copysign(a, xty) / xtx : 0.0;
    CHECK(fit.beta_hat[0] == doctest::Approx(want).epsilon(1e-8));
  }
  // Full kill threshold.
  const auto dead = fit_lasso(d, 2.0 * std::abs(xty) + 1.0, loose());
  CHECK(dead.beta_hat[0] == 0.0);
  CHECK(dead.b_hat.size() == 0);
  CHECK(dead.grid.K() == 0);
  CHECK(dead.method == FitMethod::Lasso);
}

TEST_CASE("lasso with zero penalty reduces to least squares") {
  const auto inst = testsupport::random_instance(20, 3, 9);
  const auto fit = fit_lasso(inst, 0.0, loose());
  const Eigen::VectorXd ols =
      (inst.X.transpose() * inst.X).ldlt().solve(inst.X.transpose() * inst.y);
  CHECK((fit.beta_hat - ols).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("lasso ignores all-zero columns") {
  Dataset d;
  d.X = Eigen::MatrixXd::Zero(5, 2);
  d.X.col(0) << 1, 2, 3, 4, 5;
  d.y.resize(5);
  d.y << 2, 4, 6, 8, 10;
  const auto fit = fit_lasso(d, 0.01, loose());
  CHECK(fit.beta_hat[1] == 0.0);
  CHECK(fit.beta_hat[0] == doctest::Approx(2.0).epsilon(1e-4));
}

TEST_CASE("scaled lasso estimates the noise level") {
  // Exact fit: sigma collapses to (near) zero.
  Dataset exact;
  exact.X = Eigen::MatrixXd::Random(30, 2);
  Eigen::VectorXd beta(2);
  beta << 2.0, -1.0;
  exact.y = exact.X * beta;
  auto [fit0, sigma0] = scaled_lasso(exact, 1e-6, loose());
  CHECK(sigma0 <= 1e-4);

  // Gaussian noise with unit variance: sigma_hat lands near 1.
  int good = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SimulationDesign ds;
    ds.n = 500;
    ds.p = 5;
    ds.beta_star = SimulationDesign::leading_support(5, 2, 1.0);
    ds.covariance = CovarianceSpec::identity();
    ds.noise = NoiseModel::gaussian(1.0);
    ds.seed = seed;
    const auto gen = generate_dataset(ds);
    auto [fit, sigma] = scaled_lasso(gen.data, default_scaled_lasso_lambda(500, 5), loose());
    if (sigma > 0.85 && sigma < 1.15) ++good;
  }
  CHECK(good >= 18);
}

TEST_CASE("scaled lasso minimizes its joint objective in one dimension") {
  const auto inst = testsupport::random_instance(9, 1, 55);
  const double lt = 0.05;
  auto [fit, sigma] = scaled_lasso(inst, lt, loose());
  const int n = static_cast<int>(inst.n());
  auto joint = [&](double b, double s) {
    Eigen::VectorXd bv(1);
    bv << b;
    return (inst.y - inst.X * bv).squaredNorm() / (2.0 * s * n) + s / 2.0 +
           lt * std::abs(b);
  };
  const double got = joint(fit.beta_hat[0], sigma);
  // Refining grid over (beta, sigma).
  double best = got;
  double b_lo = -3.0, b_hi = 3.0, s_lo = 0.01, s_hi = 5.0;
  for (int round = 0; round < 4; ++round) {
    double bb = b_lo, bs = s_lo;
    for (int i = 0; i <= 60; ++i)
      for (int j = 0; j <= 60; ++j) {
        const double b = b_lo + (b_hi - b_lo) * i / 60.0;
        const double s = s_lo + (s_hi - s_lo) * j / 60.0;
        const double val = joint(b, s);
        if (val < best) {
          best = val;
          bb = b;
          bs = s;
        }
      }
    const double bw = (b_hi - b_lo) / 10.0, sw = (s_hi - s_lo) / 10.0;
    b_lo = bb - bw;
    b_hi = bb + bw;
    s_lo = std::max(0.005, bs - sw);
    s_hi = bs + sw;
  }
  CHECK(got <= best + 1e-6 * (1.0 + std::abs(best)));
}

TEST_CASE("truncate_to_s keeps the largest coordinates") {
  FirstStageFit fit;
  fit.beta_hat.resize(3);
  fit.beta_hat << 3.0, -2.0, 1.0;
  fit.b_hat.resize(1);
  fit.b_hat << 0.7;
  const auto t = truncate_to_s(fit, 2);
  CHECK(t.beta_hat[0] == 3.0);
  CHECK(t.beta_hat[1] == -2.0);
  CHECK(t.beta_hat[2] == 0.0);
  CHECK(t.trunc_s == 2);
  CHECK(t.b_hat == fit.b_hat);

  const auto u = truncate_to_s(fit, 5);
  CHECK(u.beta_hat == fit.beta_hat);

  // Ties break toward the lower index.
  FirstStageFit tie;
  tie.beta_hat.resize(3);
  tie.beta_hat << 1.0, -1.0, 0.5;
  const auto v = truncate_to_s(tie, 1);
  CHECK(v.beta_hat[0] == 1.0);
  CHECK(v.beta_hat[1] == 0.0);
  CHECK(v.beta_hat[2] == 0.0);

  CHECK_THROWS_AS(truncate_to_s(fit, -1), std::invalid_argument);
}

TEST_CASE("support uses the 1e-6 magnitude convention") {
  FirstStageFit fit;
  fit.beta_hat.resize(4);
  fit.beta_hat << 0.5, 1e-7, -1e-5, 0.0;
  const auto s = fit.support();
  REQUIRE(s.size() == 2);
  CHECK(s[0] == 0);
  CHECK(s[1] == 2);
}

TEST_CASE("kkt certificate accepts optima and rejects perturbations") {
  const auto inst = testsupport::random_instance(14, 2, 8);
  const std::vector<double> taus = {0.4, 0.6};
  const double lambda = 0.25;
  const auto fit = fit_pcqr(inst, QuantileGrid{taus}, lambda, loose());
  REQUIRE(fit.report.converged);
  const auto ok = kkt_check_pcqr(inst, QuantileGrid{taus}, lambda, fit);
  CHECK(ok.passes);
  CHECK(ok.max_violation <= ok.tol);

  FirstStageFit bumped = fit;
  bumped.beta_hat[0] += 0.05;
  const auto bad = kkt_check_pcqr(inst, QuantileGrid{taus}, lambda, bumped);
  CHECK_FALSE(bad.passes);
}

TEST_CASE("pcqr objective is below natural competitors") {
  SimulationDesign ds;
  ds.n = 60;
  ds.p = 10;
  ds.beta_star = SimulationDesign::leading_support(10, 3, 1.0);
  ds.covariance = CovarianceSpec::identity();
  ds.noise = NoiseModel::gaussian(1.0);
  ds.seed = 77;
  const auto gen = generate_dataset(ds);
  const auto grid = QuantileGrid::equispaced(3);
  const double lambda = default_pcqr_lambda(60, 10, 3);
  const auto fit = fit_pcqr(gen.data, grid, lambda, loose());
  REQUIRE(fit.report.converged);
  const double at_fit = pcqr_objective(gen.data, grid, lambda, fit.beta_hat, fit.b_hat);

  const Eigen::VectorXd b_star = derive_b_from_beta(gen.data, ds.beta_star, grid);
  CHECK(at_fit <= pcqr_objective(gen.data, grid, lambda, ds.beta_star, b_star) + 1e-7);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(10);
  CHECK(at_fit <=
        pcqr_objective(gen.data, grid, lambda, zero, derive_b_from_beta(gen.data, zero, grid)) +
            1e-7);
}

TEST_CASE("sparsity is monotone along the penalty path") {
  SimulationDesign ds;
  ds.n = 80;
  ds.p = 20;
  ds.beta_star = SimulationDesign::leading_support(20, 3, 1.0);
  ds.covariance = CovarianceSpec::identity();
  ds.noise = NoiseModel::gaussian(1.0);
  ds.seed = 5;
  const auto gen = generate_dataset(ds);
  const double base = default_pcqr_lambda(80, 20, 1);
  std::size_t prev = 21;
  for (double mult : {0.3, 1.0, 3.0, 10.0, 100.0}) {
    const auto fit = fit_plad(gen.data, base * mult, loose());
    REQUIRE(fit.report.converged);
    const std::size_t nnz = fit.support().size();
    CHECK(nnz <= prev + 1);  // allow one-coordinate wobble near the path knots
    prev = nnz;
  }
}

TEST_CASE("estimation error shrinks with sample size at the default penalty") {
  // Composite fit at full width p = 250, growing n. The default penalty
  // scales like 1/n, so the fit is shrinkage-dominated and the l2 error
  // decays with a log-log slope near -1 against n.
  const auto grid = QuantileGrid::equispaced(9);
  std::vector<double> ns = {200, 400, 800}, errs;
  for (double nd : ns) {
    const int n = static_cast<int>(nd);
    double err = 0.0;
    for (std::uint64_t rep = 0; rep < 2; ++rep) {
      SimulationDesign ds;
      ds.n = n;
      ds.p = 250;
      ds.beta_star = SimulationDesign::leading_support(250, 5, 1.0);
      ds.covariance = CovarianceSpec::banded_circulant(0.1, 5);
      ds.noise = NoiseModel::gaussian(1.0);
      ds.seed = 60 + rep + static_cast<std::uint64_t>(n);
      const auto gen = generate_dataset(ds);
      const auto fit =
          fit_pcqr(gen.data, grid, default_pcqr_lambda(n, 250, 9), production());
      REQUIRE(fit.report.converged);
      err += (fit.beta_hat - ds.beta_star).norm();
    }
    errs.push_back(err / 2.0);
  }
  CHECK(errs[1] < errs[0]);
  CHECK(errs[2] < errs[1]);
  const double slope = std::log(errs[2] / errs[0]) / std::log(ns[2] / ns[0]);
  CHECK(slope < -0.55);
  CHECK(slope > -1.4);
}

TEST_CASE("default composite penalty keeps the support under control") {
  // At the shipped default, the fitted support should stay within a constant
  // multiple of the true sparsity on the reference design.
  const auto grid = QuantileGrid::equispaced(9);
  SimulationDesign ds;
  ds.n = 200;
  ds.p = 250;
  ds.beta_star = SimulationDesign::leading_support(250, 5, 1.0);
  ds.covariance = CovarianceSpec::banded_circulant(0.1, 5);
  ds.noise = NoiseModel::gaussian(1.0);
  int ok = 0;
  const int reps = 12;
  for (int r = 0; r < reps; ++r) {
    ds.seed = 300 + static_cast<std::uint64_t>(r);
    const auto gen = generate_dataset(ds);
    const auto fit = fit_pcqr(gen.data, grid, default_pcqr_lambda(200, 250, 9), production());
    if (fit.report.converged && fit.support().size() <= 50) ++ok;
  }
  CHECK(ok >= 11);
}
