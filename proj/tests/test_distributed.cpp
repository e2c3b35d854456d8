#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "rhdi/core.hpp"
#include "rhdi/distributed.hpp"
#include "rhdi/first_stage.hpp"
#include "rhdi/nuisance.hpp"
#include "support.hpp"

using namespace rhdi;

namespace {

SolverSettings loose() {
  SolverSettings st;
  st.tol_primal = st.tol_dual = 1e-6;
  st.max_iter = 200000;
  return st;
}

GeneratedData sim(int n, int p, std::uint64_t seed) {
  SimulationDesign ds;
  ds.n = n;
  ds.p = p;
  ds.beta_star = SimulationDesign::leading_support(p, 2, 1.0);
  ds.covariance = CovarianceSpec::identity();
  ds.noise = NoiseModel::gaussian(1.0);
  ds.seed = seed;
  return generate_dataset(ds);
}

Dataset subset_rows(const Dataset& data, const std::vector<int>& rows) {
  Dataset out;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), data.p());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.X.row(static_cast<Eigen::Index>(i)) = data.X.row(rows[i]);
    out.y[static_cast<Eigen::Index>(i)] = data.y[rows[i]];
  }
  return out;
}

}  // namespace

TEST_CASE("split plan shapes") {
  const auto even = make_split_plan(100, 4, 1);
  CHECK(even.m == 4);
  CHECK(even.n_block == 25);
  CHECK(even.discarded == 0);
  CHECK(even.N_used() == 100);
  REQUIRE(even.blocks.size() == 4);
  for (const auto& b : even.blocks) CHECK(b.size() == 25);

  const auto uneven = make_split_plan(103, 4, 1);
  CHECK(uneven.n_block == 25);
  CHECK(uneven.discarded == 3);
  CHECK(uneven.N_used() == 100);

  const auto whole = make_split_plan(57, 1, 1);
  CHECK(whole.m == 1);
  CHECK(whole.n_block == 57);
  REQUIRE(whole.blocks.size() == 1);

  CHECK_THROWS_AS(make_split_plan(100, 0, 1), std::domain_error);
  CHECK_THROWS_AS(make_split_plan(39, 4, 1), std::domain_error);  // N < 10m
}

TEST_CASE("split plan blocks partition the used rows") {
  const auto plan = make_split_plan(103, 4, 7);
  std::set<int> seen;
  for (const auto& b : plan.blocks)
    for (int i : b) {
      CHECK(i >= 0);
      CHECK(i < 103);
      CHECK(seen.insert(i).second);  // disjoint
    }
  CHECK(seen.size() == 100);

  // Determinism and seed sensitivity.
  const auto again = make_split_plan(103, 4, 7);
  CHECK(again.blocks == plan.blocks);
  const auto other = make_split_plan(103, 4, 8);
  CHECK(other.blocks != plan.blocks);
}

TEST_CASE("single split equals the undivided pipeline") {
  const auto gen = sim(120, 8, 21);
  const auto plan = make_split_plan(120, 1, 3);
  const auto grid = QuantileGrid::equispaced(3);
  DncConfig cfg;
  cfg.density = DensityMode::known(NoiseModel::gaussian(1.0));

  const auto split_est = dnc_split_work(gen.data, plan, 0, grid, cfg, loose());
  const auto agg = dnc_debias(gen.data, plan, grid, cfg, loose());
  REQUIRE(agg.m == 1);
  CHECK(agg.beta_bar_d == split_est.beta_d);
  CHECK(agg.theta_bar == split_est.theta_hat);
  CHECK(agg.N_used == 120);

  // Manual replay on the materialized block rows.
  const Dataset block = subset_rows(gen.data, plan.blocks[0]);
  const auto fit = fit_pcqr(block, grid, default_pcqr_lambda(120, 8, 3), loose());
  const Eigen::VectorXd resid = block.y - block.X * fit.beta_hat;
  const auto nu = estimate_nuisance(resid, grid, cfg.density);
  const auto M = build_M(block, default_gammas(120, 8), MVariant::VarianceMin, loose());
  const auto manual = debias_cq(fit, nu, M, block, grid);
  CHECK(manual.beta_d == split_est.beta_d);
  CHECK(manual.var_diag == split_est.var_diag);
}

TEST_CASE("duplicated rows give identical split estimates") {
  // Hand-build a two-block plan whose blocks contain the same rows, so both
  // splits see identical data and the average equals either one.
  const auto gen = sim(60, 5, 33);
  SplitPlan plan;
  plan.m = 2;
  plan.n_block = 60;
  plan.blocks = {{}, {}};
  for (int i = 0; i < 60; ++i) {
    plan.blocks[0].push_back(i);
    plan.blocks[1].push_back(i);
  }
  const auto grid = QuantileGrid::median();
  DncConfig cfg;
  cfg.density = DensityMode::known(NoiseModel::gaussian(1.0));
  cfg.first_stage = FitMethod::PLAD;

  const auto agg = dnc_debias(gen.data, plan, grid, cfg, loose());
  REQUIRE(agg.per_split.size() == 2);
  CHECK(agg.per_split[0].beta_d == agg.per_split[1].beta_d);
  CHECK(agg.beta_bar_d == agg.per_split[0].beta_d);
  CHECK(agg.theta_bar == agg.per_split[0].theta_hat);
}

TEST_CASE("aggregation is the split-order mean") {
  const auto gen = sim(160, 6, 44);
  const auto plan = make_split_plan(160, 2, 9);
  const auto grid = QuantileGrid::equispaced(3);
  DncConfig cfg;
  cfg.density = DensityMode::known(NoiseModel::gaussian(1.0));

  std::vector<DebiasedEstimate> parts;
  for (int l = 0; l < 2; ++l) parts.push_back(dnc_split_work(gen.data, plan, l, grid, cfg, loose()));
  const auto agg = dnc_aggregate(parts);

  Eigen::VectorXd mean = parts[0].beta_d;
  mean += parts[1].beta_d;
  mean /= 2.0;
  CHECK(agg.beta_bar_d == mean);

  double theta = (parts[0].theta_hat + parts[1].theta_hat) / 2.0;
  CHECK(agg.theta_bar == theta);
  CHECK(agg.sigma_K == parts[0].sigma_K);
  CHECK(agg.n_block == parts[0].n);
  CHECK(agg.N_used == 2 * parts[0].n);

  Eigen::VectorXd q = (parts[0].mu_sigma_mu + parts[1].mu_sigma_mu) / 2.0;
  CHECK(agg.mean_mu_sigma_mu == q);
  const Eigen::VectorXd want_var = agg.sigma_K * agg.sigma_K / (theta * theta) * q;
  CHECK((agg.agg_var_diag - want_var).cwiseAbs().maxCoeff() < 1e-15);

  // Swapping the split labels changes nothing.
  const auto swapped = dnc_aggregate({parts[1], parts[0]});
  CHECK(swapped.beta_bar_d == agg.beta_bar_d);
  CHECK(swapped.theta_bar == agg.theta_bar);

  // Whole-pipeline call agrees with manual aggregation.
  const auto agg2 = dnc_debias(gen.data, plan, grid, cfg, loose());
  CHECK(agg2.beta_bar_d == agg.beta_bar_d);
  CHECK(agg2.agg_var_diag == agg.agg_var_diag);
}

TEST_CASE("aggregate validation") {
  CHECK_THROWS_AS(dnc_aggregate({}), std::invalid_argument);
  const auto gen = sim(120, 4, 5);
  const auto plan = make_split_plan(120, 2, 2);
  DncConfig cfg;
  cfg.density = DensityMode::known(NoiseModel::gaussian(1.0));
  auto a = dnc_split_work(gen.data, plan, 0, QuantileGrid::median(), cfg, loose());
  auto b = a;
  b.beta_d = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(dnc_aggregate({a, b}), std::invalid_argument);
  CHECK_THROWS_AS(dnc_split_work(gen.data, plan, 2, QuantileGrid::median(), cfg, loose()),
                  std::out_of_range);
}

TEST_CASE("threaded dnc matches serial") {
  const auto gen = sim(160, 6, 71);
  const auto plan = make_split_plan(160, 4, 13);
  const auto grid = QuantileGrid::median();
  DncConfig cfg;
  cfg.density = DensityMode::known(NoiseModel::gaussian(1.0));
  cfg.first_stage = FitMethod::PLAD;
  const auto serial = dnc_debias(gen.data, plan, grid, cfg, loose(), 1);
  const auto threaded = dnc_debias(gen.data, plan, grid, cfg, loose(), 3);
  CHECK(serial.beta_bar_d == threaded.beta_bar_d);
  CHECK(serial.agg_var_diag == threaded.agg_var_diag);
}

TEST_CASE("dnc interval and test arithmetic") {
  AggregatedEstimate agg;
  agg.beta_bar_d = (Eigen::VectorXd(2) << 1.0, 0.001).finished();
  agg.mean_mu_sigma_mu = (Eigen::VectorXd(2) << 2.0, 2.0).finished();
  agg.theta_bar = 0.5;
  agg.sigma_K = 0.25;
  agg.m = 4;
  agg.n_block = 100;
  agg.N_used = 400;
  agg.agg_var_diag =
      agg.sigma_K * agg.sigma_K / (agg.theta_bar * agg.theta_bar) * agg.mean_mu_sigma_mu;

  const auto ci = dnc_ci(agg, 0, 0.05);
  const double want_half =
      normal_quantile(0.975) * std::sqrt(agg.agg_var_diag[0] / 400.0);
  CHECK(ci.half_width == doctest::Approx(want_half).epsilon(1e-12));
  CHECK(ci.lo == doctest::Approx(1.0 - want_half));
  CHECK(ci.hi == doctest::Approx(1.0 + want_half));
  CHECK(ci.level == 0.95);

  CHECK(dnc_test(agg, 0, 0.05) == !ci.contains(0.0));
  CHECK(dnc_test(agg, 0, 0.05));
  CHECK_FALSE(dnc_test(agg, 1, 0.05));
  CHECK_THROWS_AS(dnc_ci(agg, 5, 0.05), std::out_of_range);
}

TEST_CASE("truncation path re-derives intercepts") {
  const auto gen = sim(100, 10, 15);
  const auto plan = make_split_plan(100, 1, 2);
  const auto grid = QuantileGrid::equispaced(3);
  DncConfig cfg;
  cfg.density = DensityMode::known(NoiseModel::gaussian(1.0));
  cfg.trunc_s = 2;
  const auto est = dnc_split_work(gen.data, plan, 0, grid, cfg, loose());
  CHECK(est.beta_d.allFinite());
  // The de-biased point comes from a truncated fit: at most 2 coordinates of
  // the underlying beta_hat are nonzero.
  int nnz = 0;
  for (int j = 0; j < 10; ++j) nnz += std::abs(est.beta_hat[j]) > 1e-6;
  CHECK(nnz <= 2);
}

TEST_CASE("lasso is not a dnc first stage") {
  const auto gen = sim(100, 4, 2);
  const auto plan = make_split_plan(100, 1, 2);
  DncConfig cfg;
  cfg.first_stage = FitMethod::Lasso;
  cfg.density = DensityMode::known(NoiseModel::gaussian(1.0));
  CHECK_THROWS_AS(dnc_split_work(gen.data, plan, 0, QuantileGrid::median(), cfg, loose()),
                  std::invalid_argument);
}

TEST_CASE("debiased estimate json round trip") {
  const auto gen = sim(80, 5, 61);
  const auto plan = make_split_plan(80, 1, 6);
  DncConfig cfg;
  cfg.density = DensityMode::known(NoiseModel::gaussian(1.0));
  const auto est = dnc_split_work(gen.data, plan, 0, QuantileGrid::equispaced(3), cfg, loose());

  const std::string text = debiased_to_json(est);
  const auto back = debiased_from_json(text);
  CHECK(back.kind == est.kind);
  CHECK(back.beta_hat == est.beta_hat);
  CHECK(back.beta_d == est.beta_d);
  CHECK(back.kappa == est.kappa);
  CHECK(back.mu_sigma_mu == est.mu_sigma_mu);
  CHECK(back.var_diag == est.var_diag);
  CHECK(back.theta_hat == est.theta_hat);
  CHECK(back.sigma_K == est.sigma_K);
  CHECK(back.sigma_hat == est.sigma_hat);
  CHECK(back.n == est.n);
  CHECK(back.source_fit == est.source_fit);
  CHECK(back.m_variant == est.m_variant);
  CHECK(back.columns == est.columns);

  // Round-tripped parts aggregate identically.
  const auto agg_a = dnc_aggregate({est, est});
  const auto agg_b = dnc_aggregate({back, back});
  CHECK(agg_a.beta_bar_d == agg_b.beta_bar_d);

  CHECK_THROWS_AS(debiased_from_json("{"), std::exception);
  CHECK_THROWS_AS(debiased_from_json("{}"), std::exception);
}
