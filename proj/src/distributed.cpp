#include "rhdi/distributed.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "rhdi/rng.hpp"

namespace rhdi {

SplitPlan make_split_plan(int N, int m, std::uint64_t seed) {
  if (m < 1) throw std::domain_error("split plan: m must be positive");
  if (N < 10 * m) throw std::domain_error("split plan: need N >= 10 m");
  std::vector<int> perm(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) perm[static_cast<std::size_t>(i)] = i;
  CounterRng rng(seed, {stream::kSplit});
  for (int i = N - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }

  SplitPlan plan;
  plan.m = m;
  plan.n_block = N / m;
  plan.blocks.assign(static_cast<std::size_t>(m), {});
  for (auto& b : plan.blocks) b.reserve(static_cast<std::size_t>(plan.n_block));
  const int used = plan.n_block * m;
  for (int i = 0; i < used; ++i)
    plan.blocks[static_cast<std::size_t>(i % m)].push_back(perm[static_cast<std::size_t>(i)]);
  plan.discarded = N - used;
  if (plan.discarded > 0)
    std::cerr << "warning: split plan discards " << plan.discarded << " of " << N
              << " observations\n";
  return plan;
}

namespace {

Dataset subset_rows(const Dataset& data, const std::vector<int>& rows) {
  Dataset d;
  d.X.resize(static_cast<Eigen::Index>(rows.size()), data.p());
  d.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    d.X.row(static_cast<Eigen::Index>(i)) = data.X.row(rows[i]);
    d.y[static_cast<Eigen::Index>(i)] = data.y[rows[i]];
  }
  return d;
}

}  // namespace

DebiasedEstimate dnc_split_work(const Dataset& data, const SplitPlan& plan, int split,
                                const QuantileGrid& grid, const DncConfig& cfg,
                                const SolverSettings& settings) {
  if (split < 0 || split >= plan.m) throw std::out_of_range("dnc: split index");
  const Dataset sub = subset_rows(data, plan.blocks[static_cast<std::size_t>(split)]);
  const int n = static_cast<int>(sub.n());
  const int p = static_cast<int>(sub.p());

  const int lambda_K = cfg.first_stage == FitMethod::PCQR ? grid.K() : 1;
  const double lambda = cfg.lambda > 0.0 ? cfg.lambda : default_pcqr_lambda(n, p, lambda_K);
  FirstStageFit fit;
  switch (cfg.first_stage) {
    case FitMethod::PCQR: fit = fit_pcqr(sub, grid, lambda, settings); break;
    case FitMethod::PLAD: fit = fit_plad(sub, lambda, settings); break;
    case FitMethod::PQR: fit = fit_pqr(sub, grid.taus.at(0), lambda, settings); break;
    case FitMethod::Lasso:
      throw std::invalid_argument("dnc: square-loss first stage is not part of this pipeline");
  }
  if (cfg.trunc_s > 0) {
    fit = truncate_to_s(fit, cfg.trunc_s);
    fit.b_hat = derive_b_from_beta(sub, fit.beta_hat, grid);
    fit.grid = grid;
  }

  DensityMode density = cfg.density;
  if (density.kind == DensityMode::Kind::Estimated) {
    density.p = p;
    density.s_hat = static_cast<int>(fit.support().size());
  }
  Eigen::VectorXd residuals = sub.y - sub.X * fit.beta_hat;
  NuisanceEstimates nuisance = estimate_nuisance(residuals, grid, density);

  const GammaParams gammas = cfg.gammas ? *cfg.gammas : default_gammas(n, p);
  DecorrelationMatrix M = build_M(sub, gammas, MVariant::VarianceMin, settings);
  return debias_cq(fit, nuisance, M, sub, grid);
}

AggregatedEstimate dnc_aggregate(const std::vector<DebiasedEstimate>& per_split) {
  if (per_split.empty()) throw std::invalid_argument("dnc aggregate: no splits");
  const auto m = per_split.size();
  const auto p = per_split.front().beta_d.size();
  const int n = per_split.front().n;
  for (const auto& est : per_split) {
    if (est.beta_d.size() != p || est.n != n)
      throw std::invalid_argument("dnc aggregate: split estimates disagree in shape");
  }

  AggregatedEstimate agg;
  agg.per_split = per_split;
  agg.m = static_cast<int>(m);
  agg.n_block = n;
  agg.N_used = static_cast<int>(m) * n;
  agg.sigma_K = per_split.front().sigma_K;
  agg.beta_bar_d = Eigen::VectorXd::Zero(p);
  agg.mean_mu_sigma_mu = Eigen::VectorXd::Zero(p);
  agg.theta_bar = 0.0;
  for (const auto& est : per_split) {
    agg.beta_bar_d += est.beta_d;
    agg.mean_mu_sigma_mu += est.mu_sigma_mu;
    agg.theta_bar += est.theta_hat;
  }
  agg.beta_bar_d /= static_cast<double>(m);
  agg.mean_mu_sigma_mu /= static_cast<double>(m);
  agg.theta_bar /= static_cast<double>(m);
  agg.agg_var_diag = agg.sigma_K * agg.sigma_K / (agg.theta_bar * agg.theta_bar) *
                     agg.mean_mu_sigma_mu;
  return agg;
}

AggregatedEstimate dnc_debias(const Dataset& data, const SplitPlan& plan,
                              const QuantileGrid& grid, const DncConfig& cfg,
                              const SolverSettings& settings, int threads) {
  std::vector<DebiasedEstimate> per_split(static_cast<std::size_t>(plan.m));
  std::vector<std::string> errors(static_cast<std::size_t>(plan.m));

  auto work = [&](int l) {
    try {
      per_split[static_cast<std::size_t>(l)] =
          dnc_split_work(data, plan, l, grid, cfg, settings);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(l)] = e.what();
    }
  };

  const int nw = std::max(1, std::min(threads, plan.m));
  if (nw == 1) {
    for (int l = 0; l < plan.m; ++l) work(l);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int t = 0; t < nw; ++t)
      pool.emplace_back([&]() {
        for (;;) {
          const int l = next.fetch_add(1);
          if (l >= plan.m) return;
          work(l);
        }
      });
    for (auto& th : pool) th.join();
  }

  for (int l = 0; l < plan.m; ++l)
    if (!errors[static_cast<std::size_t>(l)].empty())
      throw std::runtime_error("dnc: split " + std::to_string(l) +
                               " failed: " + errors[static_cast<std::size_t>(l)]);
  return dnc_aggregate(per_split);
}

ConfidenceInterval dnc_ci(const AggregatedEstimate& agg, int j, double alpha) {
  if (j < 0 || j >= agg.beta_bar_d.size()) throw std::out_of_range("dnc ci: coordinate");
  const double half = normal_quantile(1.0 - alpha / 2.0) *
                      std::sqrt(agg.agg_var_diag[j] / agg.N_used);
  ConfidenceInterval ci;
  ci.j = j;
  ci.lo = agg.beta_bar_d[j] - half;
  ci.hi = agg.beta_bar_d[j] + half;
  ci.level = 1.0 - alpha;
  ci.half_width = half;
  return ci;
}

bool dnc_test(const AggregatedEstimate& agg, int j, double alpha) {
  const auto ci = dnc_ci(agg, j, alpha);
  return !(ci.lo <= 0.0 && 0.0 <= ci.hi);
}

namespace {

nlohmann::ordered_json vec_to_json(const Eigen::VectorXd& v) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vec_from_json(const nlohmann::json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  Eigen::Index i = 0;
  for (const auto& x : a) v[i++] = x.get<double>();
  return v;
}

}  // namespace

std::string debiased_to_json(const DebiasedEstimate& est) {
  nlohmann::ordered_json j;
  j["kind"] = est.kind == DebiasedEstimate::Kind::CQ ? "cq" : "square";
  j["source_fit"] = fit_method_name(est.source_fit);
  j["m_variant"] = est.m_variant == MVariant::VarianceMin ? "variance_min" : "l1_min";
  j["n"] = est.n;
  j["theta_hat"] = est.theta_hat;
  j["sigma_K"] = est.sigma_K;
  j["sigma_hat"] = est.sigma_hat;
  j["beta_hat"] = vec_to_json(est.beta_hat);
  j["beta_d"] = vec_to_json(est.beta_d);
  j["kappa"] = vec_to_json(est.kappa);
  j["mu_sigma_mu"] = vec_to_json(est.mu_sigma_mu);
  j["var_diag"] = vec_to_json(est.var_diag);
  j["columns"] = est.columns;
  return j.dump(2);
}

DebiasedEstimate debiased_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  DebiasedEstimate est;
  est.kind = j.at("kind").get<std::string>() == "cq" ? DebiasedEstimate::Kind::CQ
                                                     : DebiasedEstimate::Kind::Square;
  const std::string fm = j.at("source_fit").get<std::string>();
  est.source_fit = fm == "pcqr"   ? FitMethod::PCQR
                   : fm == "pqr"  ? FitMethod::PQR
                   : fm == "plad" ? FitMethod::PLAD
                                  : FitMethod::Lasso;
  est.m_variant = j.at("m_variant").get<std::string>() == "variance_min"
                      ? MVariant::VarianceMin
                      : MVariant::L1Min;
  est.n = j.at("n").get<int>();
  est.theta_hat = j.at("theta_hat").get<double>();
  est.sigma_K = j.at("sigma_K").get<double>();
  est.sigma_hat = j.at("sigma_hat").get<double>();
  est.beta_hat = vec_from_json(j.at("beta_hat"));
  est.beta_d = vec_from_json(j.at("beta_d"));
  est.kappa = vec_from_json(j.at("kappa"));
  est.mu_sigma_mu = vec_from_json(j.at("mu_sigma_mu"));
  est.var_diag = vec_from_json(j.at("var_diag"));
  est.columns = j.at("columns").get<std::vector<int>>();
  return est;
}

}  // namespace rhdi
