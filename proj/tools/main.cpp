#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rhdi/distributed.hpp"
#include "rhdi/harness.hpp"
#include "rhdi/inference.hpp"
#include "rhdi/io.hpp"
#include "rhdi/nuisance.hpp"
#include "rhdi/version.hpp"

namespace {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

struct GlobalOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out_dir;
  std::string format = "csv";
};

rhdi::ExperimentConfig make_config(const GlobalOpts& g) {
  rhdi::ExperimentConfig cfg =
      g.config_path.empty() ? rhdi::default_experiment() : rhdi::load_config(g.config_path);
  if (g.seed != 0) cfg.seed = g.seed;
  if (g.threads > 0) cfg.threads = g.threads;
  if (!g.out_dir.empty()) cfg.output_dir = g.out_dir;
  return cfg;
}

std::string config_text(const GlobalOpts& g) {
  if (g.config_path.empty()) return "default";
  std::ifstream in(g.config_path, std::ios::binary);
  if (!in) throw rhdi::IoError("cannot open config file: " + g.config_path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw rhdi::IoError("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw rhdi::IoError("short write: " + path.string());
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw rhdi::IoError("cannot open: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

rhdi::Dataset load_dataset(const std::string& path) {
  return ends_with(path, ".bin") ? rhdi::read_dataset_binary(path)
                                 : rhdi::read_dataset_csv(path);
}

std::vector<double> to_vec(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd from_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string fit_to_json(const rhdi::FirstStageFit& fit) {
  ordered_json o;
  o["method"] = rhdi::fit_method_name(fit.method);
  o["lambda"] = fit.lambda;
  o["trunc_s"] = fit.trunc_s;
  o["taus"] = fit.grid.taus;
  o["beta_hat"] = to_vec(fit.beta_hat);
  o["b_hat"] = to_vec(fit.b_hat);
  return o.dump(2) + "\n";
}

rhdi::FirstStageFit fit_from_json(const std::string& text) {
  const auto o = nlohmann::json::parse(text);
  rhdi::FirstStageFit fit;
  const std::string method = o.at("method").get<std::string>();
  if (method == "pcqr") fit.method = rhdi::FitMethod::PCQR;
  else if (method == "pqr") fit.method = rhdi::FitMethod::PQR;
  else if (method == "plad") fit.method = rhdi::FitMethod::PLAD;
  else if (method == "lasso") fit.method = rhdi::FitMethod::Lasso;
  else throw rhdi::IoError("fit json: unknown method '" + method + "'");
  fit.lambda = o.at("lambda").get<double>();
  fit.trunc_s = o.at("trunc_s").get<int>();
  fit.grid.taus = o.at("taus").get<std::vector<double>>();
  fit.beta_hat = from_vec(o.at("beta_hat").get<std::vector<double>>());
  fit.b_hat = from_vec(o.at("b_hat").get<std::vector<double>>());
  return fit;
}

std::string plan_to_json(const rhdi::SplitPlan& plan) {
  ordered_json o;
  o["m"] = plan.m;
  o["n_block"] = plan.n_block;
  o["discarded"] = plan.discarded;
  o["blocks"] = plan.blocks;
  return o.dump(2) + "\n";
}

rhdi::SplitPlan plan_from_json(const std::string& text) {
  const auto o = nlohmann::json::parse(text);
  rhdi::SplitPlan plan;
  plan.m = o.at("m").get<int>();
  plan.n_block = o.at("n_block").get<int>();
  plan.discarded = o.at("discarded").get<int>();
  plan.blocks = o.at("blocks").get<std::vector<std::vector<int>>>();
  return plan;
}

std::string aggregate_to_json(const rhdi::AggregatedEstimate& agg) {
  ordered_json o;
  o["m"] = agg.m;
  o["n_block"] = agg.n_block;
  o["N_used"] = agg.N_used;
  o["theta_bar"] = agg.theta_bar;
  o["sigma_K"] = agg.sigma_K;
  o["beta_bar_d"] = to_vec(agg.beta_bar_d);
  o["mean_mu_sigma_mu"] = to_vec(agg.mean_mu_sigma_mu);
  o["agg_var_diag"] = to_vec(agg.agg_var_diag);
  return o.dump(2) + "\n";
}

std::vector<int> parse_coords(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stoi(tok));
  }
  return out;
}

rhdi::QuantileGrid grid_for(const rhdi::FirstStageFit& fit,
                            const rhdi::ExperimentConfig& cfg) {
  return fit.grid.K() > 0 ? fit.grid : cfg.grid;
}

rhdi::DensityMode density_for(const rhdi::ExperimentConfig& cfg,
                              const rhdi::FirstStageFit& fit, int p) {
  if (cfg.density_mode == rhdi::DensityMode::Kind::Known)
    return rhdi::DensityMode::known(cfg.design.noise);
  const int s_hat = std::max<int>(1, static_cast<int>(fit.support().size()));
  return rhdi::DensityMode::estimated(s_hat, p);
}

rhdi::FirstStageFit run_fit(const rhdi::Dataset& data, const std::string& method,
                            double lambda, const rhdi::QuantileGrid& grid,
                            const rhdi::SolverSettings& solver, double* sigma_out) {
  const int n = static_cast<int>(data.n());
  const int p = static_cast<int>(data.p());
  if (method == "pcqr") {
    const double lam = lambda > 0 ? lambda : rhdi::default_pcqr_lambda(n, p, grid.K());
    return rhdi::fit_pcqr(data, grid, lam, solver);
  }
  if (method == "plad") {
    const double lam = lambda > 0 ? lambda : rhdi::default_pcqr_lambda(n, p);
    return rhdi::fit_plad(data, lam, solver);
  }
  if (method == "lasso") {
    const auto [sfit, sigma] =
        rhdi::scaled_lasso(data, rhdi::default_scaled_lasso_lambda(n, p), solver);
    (void)sfit;
    if (sigma_out) *sigma_out = sigma;
    const double lam = lambda > 0 ? lambda : rhdi::default_lasso_lambda(n, p, sigma);
    return rhdi::fit_lasso(data, lam, solver);
  }
  throw rhdi::ConfigError("unknown fit method '" + method + "' (pcqr|plad|lasso)");
}

int dispatch(int argc, char** argv) {
  CLI::App app{"De-biased composite quantile regression: heavy-tail-robust confidence "
               "intervals and tests for high-dimensional linear models"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(rhdi::kVersion));

  GlobalOpts g;
  app.add_option("--config", g.config_path, "Experiment config file (TOML-style)");
  app.add_option("--seed", g.seed, "Override the config seed (nonzero)");
  app.add_option("--threads", g.threads, "Worker threads for replications/columns");
  app.add_option("--out", g.out_dir, "Output directory");
  app.add_option("--format", g.format, "Output format")
      ->check(CLI::IsMember({"csv", "json"}));

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
  std::string sim_name = "dataset";
  sim->add_option("--name", sim_name, "Basename for the emitted files");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "First-stage penalized fit");
  std::string fit_data, fit_method = "plad";
  double fit_lambda = 0.0;
  int fit_k = 0;
  fit_cmd->add_option("--data", fit_data, "Dataset file (.csv or .bin)")->required();
  fit_cmd->add_option("--method", fit_method, "pcqr|plad|lasso");
  fit_cmd->add_option("--lambda", fit_lambda, "Penalty level (0 = default)");
  fit_cmd->add_option("--k", fit_k, "Quantile grid size for pcqr (0 = config grid)");

  // debias
  auto* deb = app.add_subcommand("debias", "De-bias a first-stage fit");
  std::string deb_data, deb_fit, deb_kind = "cq", deb_variant = "variance";
  std::string deb_columns;
  deb->add_option("--data", deb_data, "Dataset file")->required();
  deb->add_option("--fit", deb_fit, "fit.json from the fit subcommand")->required();
  deb->add_option("--debias", deb_kind, "cq|square");
  deb->add_option("--variant", deb_variant, "variance|l1 decorrelation program");
  deb->add_option("--columns", deb_columns, "Comma-separated coordinate subset (default all)");

  // ci
  auto* ci_cmd = app.add_subcommand("ci", "Per-coordinate confidence intervals");
  std::string ci_est;
  double ci_alpha = 0.0;
  ci_cmd->add_option("--estimate", ci_est, "estimate.json from debias")->required();
  ci_cmd->add_option("--alpha", ci_alpha, "Level (default: config alpha)");

  // test
  auto* test_cmd = app.add_subcommand("test", "Coordinate or group Wald test");
  std::string test_est, test_data, test_group;
  int test_coord = -1;
  double test_alpha = 0.0, test_null = 0.0;
  test_cmd->add_option("--estimate", test_est, "estimate.json")->required();
  test_cmd->add_option("--coord", test_coord, "Single coordinate to test");
  test_cmd->add_option("--group", test_group, "Comma-separated coordinates (Wald box test)");
  test_cmd->add_option("--data", test_data, "Dataset file (required for --group)");
  test_cmd->add_option("--alpha", test_alpha, "Level (default: config alpha)");
  test_cmd->add_option("--null", test_null, "Null value (shared by all coordinates)");

  // boot-test
  auto* boot = app.add_subcommand("boot-test", "Simultaneous test over a coordinate group");
  std::string boot_data, boot_fit, boot_group, boot_mode = "multiplier";
  int boot_B = 500;
  double boot_alpha = 0.0, boot_null = 0.0;
  boot->add_option("--data", boot_data, "Dataset file")->required();
  boot->add_option("--fit", boot_fit, "fit.json")->required();
  boot->add_option("--group", boot_group, "Comma-separated coordinates")->required();
  boot->add_option("--B", boot_B, "Calibration draws");
  boot->add_option("--mode", boot_mode, "multiplier|psi|two-sided");
  boot->add_option("--alpha", boot_alpha, "Level (default: config alpha)");
  boot->add_option("--null", boot_null, "Null value (shared by all coordinates)");

  // dnc
  auto* dnc = app.add_subcommand("dnc", "Divide-and-conquer pipeline");
  dnc->require_subcommand(1);
  auto* dnc_split = dnc->add_subcommand("split", "Plan row splits");
  std::string ds_data;
  int ds_m = 0;
  dnc_split->add_option("--data", ds_data, "Dataset file")->required();
  dnc_split->add_option("--m", ds_m, "Number of splits (0 = config [dnc] m)");
  auto* dnc_work = dnc->add_subcommand("work", "De-bias one split");
  std::string dw_data, dw_plan, dw_method = "pcqr";
  int dw_split = 0, dw_trunc = -1;
  double dw_lambda = 0.0;
  dnc_work->add_option("--data", dw_data, "Dataset file")->required();
  dnc_work->add_option("--plan", dw_plan, "plan.json from dnc split")->required();
  dnc_work->add_option("--split", dw_split, "Split index (0-based)")->required();
  dnc_work->add_option("--first-stage", dw_method, "pcqr|plad");
  dnc_work->add_option("--trunc-s", dw_trunc, "Keep this many coefficients (-1 = config)");
  dnc_work->add_option("--lambda", dw_lambda, "Penalty level (0 = per-split default)");
  auto* dnc_agg = dnc->add_subcommand("aggregate", "Average per-split estimates");
  std::vector<std::string> da_inputs;
  double da_alpha = 0.0;
  dnc_agg->add_option("inputs", da_inputs, "split estimate JSON files")->required();
  dnc_agg->add_option("--alpha", da_alpha, "CI level for the emitted table");

  // coverage
  auto* cov_cmd = app.add_subcommand("coverage", "Monte-Carlo coverage/length study");

  // histogram
  auto* hist = app.add_subcommand("histogram", "Replication histograms of de-biased coordinates");
  std::string hist_coords = "2,5";
  int hist_bins = 30;
  hist->add_option("--coords", hist_coords, "Comma-separated coordinates (0-based)");
  hist->add_option("--bins", hist_bins, "Histogram bins");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const rhdi::ExperimentConfig cfg = make_config(g);
  const fs::path out_dir = cfg.output_dir.empty() ? "." : cfg.output_dir;

  if (*sim) {
    rhdi::SimulationDesign design = cfg.design;
    design.seed = cfg.seed;
    const rhdi::GeneratedData gen = rhdi::generate_dataset(design);
    fs::create_directories(out_dir);
    fs::path data_path;
    if (g.format == "csv") {
      data_path = out_dir / (sim_name + ".csv");
      rhdi::write_dataset_csv(data_path.string(), gen.data);
    } else {
      data_path = out_dir / (sim_name + ".bin");
      rhdi::write_dataset_binary(data_path.string(), gen.data);
    }
    const fs::path truth_path = out_dir / (sim_name + "_truth.csv");
    rhdi::write_matrix_csv(truth_path.string(), design.beta_star);
    std::cout << data_path.string() << "\n" << truth_path.string() << "\n";
    return 0;
  }

  if (*fit_cmd) {
    const rhdi::Dataset data = load_dataset(fit_data);
    const rhdi::QuantileGrid grid =
        fit_k > 0 ? rhdi::QuantileGrid::equispaced(fit_k) : cfg.grid;
    double sigma = 0.0;
    const rhdi::FirstStageFit fit =
        run_fit(data, fit_method, fit_lambda, grid, cfg.solver, &sigma);
    const fs::path path = out_dir / "fit.json";
    write_text(path, fit_to_json(fit));
    std::cout << path.string() << "\n";
    if (fit.method == rhdi::FitMethod::Lasso)
      std::cout << "sigma_hat " << rhdi::format_double(sigma) << "\n";
    return 0;
  }

  if (*deb) {
    const rhdi::Dataset data = load_dataset(deb_data);
    const rhdi::FirstStageFit fit = fit_from_json(read_text(deb_fit));
    const int n = static_cast<int>(data.n());
    const int p = static_cast<int>(data.p());
    const rhdi::GammaParams gammas = cfg.gammas ? *cfg.gammas : rhdi::default_gammas(n, p);
    const rhdi::MVariant variant =
        deb_variant == "l1" ? rhdi::MVariant::L1Min : rhdi::MVariant::VarianceMin;
    if (deb_variant != "l1" && deb_variant != "variance")
      throw rhdi::ConfigError("--variant must be variance or l1");
    std::vector<int> columns = parse_coords(deb_columns);
    const std::vector<int>* cols = columns.empty() ? nullptr : &columns;
    const rhdi::DecorrelationMatrix M =
        rhdi::build_M(data, gammas, variant, cfg.solver, cols, cfg.threads);
    rhdi::DebiasedEstimate est;
    if (deb_kind == "cq") {
      const rhdi::QuantileGrid grid = grid_for(fit, cfg);
      const Eigen::VectorXd resid = data.y - data.X * fit.beta_hat;
      const rhdi::NuisanceEstimates nu =
          rhdi::estimate_nuisance(resid, grid, density_for(cfg, fit, p));
      est = rhdi::debias_cq(fit, nu, M, data, grid);
    } else if (deb_kind == "square") {
      double sigma;
      if (fit.method == rhdi::FitMethod::Lasso) {
        sigma = rhdi::scaled_lasso(data, rhdi::default_scaled_lasso_lambda(n, p),
                                   cfg.solver)
                    .second;
      } else {
        sigma = (data.y - data.X * fit.beta_hat).norm() / std::sqrt(static_cast<double>(n));
      }
      est = rhdi::debias_square(fit, sigma, M, data);
    } else {
      throw rhdi::ConfigError("--debias must be cq or square");
    }
    const fs::path path = out_dir / "estimate.json";
    write_text(path, rhdi::debiased_to_json(est));
    std::cout << path.string() << "\n";
    return 0;
  }

  if (*ci_cmd) {
    const rhdi::DebiasedEstimate est = rhdi::debiased_from_json(read_text(ci_est));
    const double alpha = ci_alpha > 0 ? ci_alpha : cfg.alpha;
    const std::vector<int> cols =
        est.columns.empty() ? [&] {
          std::vector<int> all(est.beta_d.size());
          for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
          return all;
        }()
                            : est.columns;
    if (g.format == "json") {
      ordered_json arr = ordered_json::array();
      for (int j : cols) {
        const auto ci = rhdi::coordinate_ci(est, j, alpha);
        ordered_json o;
        o["j"] = j;
        o["beta_d"] = est.beta_d[j];
        o["lo"] = ci.lo;
        o["hi"] = ci.hi;
        o["half_width"] = ci.half_width;
        arr.push_back(std::move(o));
      }
      const fs::path path = out_dir / "ci.json";
      write_text(path, arr.dump(2) + "\n");
      std::cout << path.string() << "\n";
    } else {
      std::string csv = "j,beta_d,lo,hi,half_width\n";
      for (int j : cols) {
        const auto ci = rhdi::coordinate_ci(est, j, alpha);
        csv += std::to_string(j) + ',' + rhdi::format_double(est.beta_d[j]) + ',' +
               rhdi::format_double(ci.lo) + ',' + rhdi::format_double(ci.hi) + ',' +
               rhdi::format_double(ci.half_width) + '\n';
      }
      const fs::path path = out_dir / "ci.csv";
      write_text(path, csv);
      std::cout << path.string() << "\n";
    }
    return 0;
  }

  if (*test_cmd) {
    const rhdi::DebiasedEstimate est = rhdi::debiased_from_json(read_text(test_est));
    const double alpha = test_alpha > 0 ? test_alpha : cfg.alpha;
    ordered_json o;
    if (!test_group.empty()) {
      if (test_data.empty())
        throw rhdi::ConfigError("--group requires --data to rebuild the decorrelation rows");
      const rhdi::Dataset data = load_dataset(test_data);
      const int n = static_cast<int>(data.n());
      const int p = static_cast<int>(data.p());
      const std::vector<int> G = parse_coords(test_group);
      const rhdi::GammaParams gammas =
          cfg.gammas ? *cfg.gammas : rhdi::default_gammas(n, p);
      const rhdi::DecorrelationMatrix M =
          rhdi::build_M(data, gammas, est.m_variant, cfg.solver, &G, cfg.threads);
      Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(static_cast<int>(G.size()), p);
      for (std::size_t i = 0; i < G.size(); ++i) Q(static_cast<int>(i), G[i]) = 1.0;
      const Eigen::VectorXd omega =
          Eigen::VectorXd::Constant(static_cast<int>(G.size()), test_null);
      const rhdi::WaldResult res = rhdi::wald_test(est, M, data, Q, omega, alpha);
      o["kind"] = "wald_box";
      o["group"] = G;
      o["threshold"] = res.threshold;
      o["standardized"] = to_vec(res.standardized);
      o["reject"] = res.reject;
      o["level"] = alpha;
    } else {
      if (test_coord < 0) throw rhdi::ConfigError("test needs --coord or --group");
      rhdi::DebiasedEstimate shifted = est;
      shifted.beta_d[test_coord] -= test_null;
      const bool reject = rhdi::single_coord_test(shifted, test_coord, alpha);
      const auto ci = rhdi::coordinate_ci(est, test_coord, alpha);
      o["kind"] = "coordinate";
      o["coord"] = test_coord;
      o["null"] = test_null;
      o["beta_d"] = est.beta_d[test_coord];
      o["lo"] = ci.lo;
      o["hi"] = ci.hi;
      o["reject"] = reject;
      o["level"] = alpha;
    }
    std::cout << o.dump(2) << "\n";
    return 0;
  }

  if (*boot) {
    const rhdi::Dataset data = load_dataset(boot_data);
    const rhdi::FirstStageFit fit = fit_from_json(read_text(boot_fit));
    const int n = static_cast<int>(data.n());
    const int p = static_cast<int>(data.p());
    const std::vector<int> G = parse_coords(boot_group);
    if (G.empty()) throw rhdi::ConfigError("--group must be nonempty");
    const double alpha = boot_alpha > 0 ? boot_alpha : cfg.alpha;
    const rhdi::QuantileGrid grid = grid_for(fit, cfg);
    const Eigen::VectorXd resid = data.y - data.X * fit.beta_hat;
    const rhdi::NuisanceEstimates nu =
        rhdi::estimate_nuisance(resid, grid, density_for(cfg, fit, p));
    const rhdi::GammaParams gammas = cfg.gammas ? *cfg.gammas : rhdi::default_gammas(n, p);
    const rhdi::DecorrelationMatrix M =
        rhdi::build_M(data, gammas, rhdi::MVariant::L1Min, cfg.solver, &G, cfg.threads);
    const rhdi::DebiasedEstimate est = rhdi::debias_cq(fit, nu, M, data, grid);
    const Eigen::VectorXd beta0 =
        Eigen::VectorXd::Constant(static_cast<int>(G.size()), boot_null);
    rhdi::SimultaneousTestResult res;
    if (boot_mode == "multiplier")
      res = rhdi::simultaneous_test(est, M, data, nu, G, beta0, alpha, boot_B, cfg.seed);
    else if (boot_mode == "psi")
      res = rhdi::simulated_psi_test(est, M, data, nu, G, beta0, alpha, boot_B, cfg.seed);
    else if (boot_mode == "two-sided")
      res = rhdi::simultaneous_test_twosided(est, M, data, nu, G, beta0, alpha, boot_B,
                                             cfg.seed);
    else
      throw rhdi::ConfigError("--mode must be multiplier, psi, or two-sided");
    std::cout << rhdi::to_json(res) << "\n";
    return 0;
  }

  if (*dnc_split) {
    const rhdi::Dataset data = load_dataset(ds_data);
    const int m = ds_m > 0 ? ds_m : cfg.dnc_m;
    const rhdi::SplitPlan plan =
        rhdi::make_split_plan(static_cast<int>(data.n()), m, cfg.seed);
    const fs::path path = out_dir / "plan.json";
    write_text(path, plan_to_json(plan));
    std::cout << path.string() << "\n";
    return 0;
  }

  if (*dnc_work) {
    const rhdi::Dataset data = load_dataset(dw_data);
    const rhdi::SplitPlan plan = plan_from_json(read_text(dw_plan));
    rhdi::DncConfig dcfg;
    if (dw_method == "pcqr") dcfg.first_stage = rhdi::FitMethod::PCQR;
    else if (dw_method == "plad") dcfg.first_stage = rhdi::FitMethod::PLAD;
    else throw rhdi::ConfigError("--first-stage must be pcqr or plad");
    dcfg.trunc_s = dw_trunc >= 0 ? dw_trunc : cfg.dnc_trunc_s;
    dcfg.lambda = dw_lambda;
    dcfg.density = cfg.density_mode == rhdi::DensityMode::Kind::Known
                       ? rhdi::DensityMode::known(cfg.design.noise)
                       : rhdi::DensityMode::estimated(1, 0);
    dcfg.gammas = cfg.gammas;
    const rhdi::DebiasedEstimate est =
        rhdi::dnc_split_work(data, plan, dw_split, cfg.grid, dcfg, cfg.solver);
    const fs::path path = out_dir / ("split_" + std::to_string(dw_split) + ".json");
    write_text(path, rhdi::debiased_to_json(est));
    std::cout << path.string() << "\n";
    return 0;
  }

  if (*dnc_agg) {
    std::vector<rhdi::DebiasedEstimate> parts;
    parts.reserve(da_inputs.size());
    for (const auto& f : da_inputs) parts.push_back(rhdi::debiased_from_json(read_text(f)));
    const rhdi::AggregatedEstimate agg = rhdi::dnc_aggregate(parts);
    const fs::path path = out_dir / "aggregate.json";
    write_text(path, aggregate_to_json(agg));
    std::cout << path.string() << "\n";
    if (da_alpha > 0) {
      std::string csv = "j,beta_bar_d,lo,hi\n";
      for (int j = 0; j < agg.beta_bar_d.size(); ++j) {
        const auto ci = rhdi::dnc_ci(agg, j, da_alpha);
        csv += std::to_string(j) + ',' + rhdi::format_double(agg.beta_bar_d[j]) + ',' +
               rhdi::format_double(ci.lo) + ',' + rhdi::format_double(ci.hi) + '\n';
      }
      const fs::path cpath = out_dir / "aggregate_ci.csv";
      write_text(cpath, csv);
      std::cout << cpath.string() << "\n";
    }
    return 0;
  }

  if (*cov_cmd) {
    const rhdi::CoverageResult res = rhdi::run_coverage(cfg);
    fs::create_directories(out_dir);
    const fs::path csv_path = out_dir / "coverage.csv";
    write_text(csv_path, rhdi::coverage_csv(res.rows));
    if (g.format == "json")
      write_text(out_dir / "coverage.json", rhdi::coverage_json(res.rows));
    write_text(out_dir / "manifest.json",
               rhdi::manifest_json(rhdi::config_hash(config_text(g)), cfg.seed, res.rows));
    std::cout << csv_path.string() << "\n";
    return 0;
  }

  if (*hist) {
    const std::vector<int> coords = parse_coords(hist_coords);
    const auto recs = rhdi::run_histogram(cfg, coords, hist_bins);
    fs::create_directories(out_dir);
    if (g.format == "json") {
      const fs::path path = out_dir / "histogram.json";
      write_text(path, rhdi::histogram_json(recs));
      std::cout << path.string() << "\n";
    } else {
      const fs::path bins_path = out_dir / "histogram.csv";
      write_text(bins_path, rhdi::histogram_csv(recs));
      const fs::path vals_path = out_dir / "histogram_values.csv";
      write_text(vals_path, rhdi::histogram_values_csv(recs));
      std::cout << bins_path.string() << "\n" << vals_path.string() << "\n";
    }
    write_text(out_dir / "manifest.json",
               rhdi::manifest_json(rhdi::config_hash(config_text(g)), cfg.seed, {}));
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const rhdi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const rhdi::SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 3;
  } catch (const rhdi::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
