#include "rhdi/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "rhdi/first_stage.hpp"
#include "rhdi/inference.hpp"
#include "rhdi/io.hpp"
#include "rhdi/nuisance.hpp"
#include "rhdi/rng.hpp"
#include "rhdi/version.hpp"

namespace rhdi {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(s);
  while (std::getline(ss, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

}  // namespace

MethodSpec MethodSpec::parse(const std::string& token, const QuantileGrid& default_grid) {
  const std::string t = lower(trim(token));
  MethodSpec m;
  m.grid = default_grid;
  if (t == "dquant") {
    m.first_stage = FitMethod::PLAD;
    m.debias = DebiasedEstimate::Kind::CQ;
    m.grid = QuantileGrid::median();
    m.label = "DQuant";
    return m;
  }
  const auto plus = t.find('+');
  if (plus == std::string::npos)
    throw ConfigError("method token must look like 'plad+cq': " + token);
  const std::string fs = trim(t.substr(0, plus));
  const std::string db = trim(t.substr(plus + 1));

  std::string fs_label;
  if (fs == "pcqr") {
    m.first_stage = FitMethod::PCQR;
    fs_label = "PCQR";
  } else if (fs == "plad") {
    m.first_stage = FitMethod::PLAD;
    fs_label = "PLAD";
  } else if (fs == "lasso") {
    m.first_stage = FitMethod::Lasso;
    fs_label = "Lasso";
  } else {
    throw ConfigError("unknown first stage '" + fs + "' in method token: " + token);
  }

  std::string db_label;
  if (db == "cq") {
    m.debias = DebiasedEstimate::Kind::CQ;
    db_label = "CQ";
  } else if (db == "square") {
    m.debias = DebiasedEstimate::Kind::Square;
    db_label = "Square";
  } else {
    throw ConfigError("unknown de-biasing '" + db + "' in method token: " + token);
  }

  m.label = fs_label + " + " + db_label;
  return m;
}

ExperimentConfig default_experiment() {
  ExperimentConfig cfg;
  cfg.design.n = 200;
  cfg.design.p = 250;
  cfg.design.beta_star = SimulationDesign::leading_support(250, 5, 1.0);
  cfg.design.covariance = CovarianceSpec::banded_circulant(0.1, 5);
  cfg.design.noise = NoiseModel::gaussian(1.0);
  cfg.s = 5;
  cfg.grid = QuantileGrid::equispaced(9);
  for (const char* tok : {"pcqr+cq", "plad+cq", "lasso+cq", "pcqr+square",
                          "plad+square", "lasso+square"})
    cfg.methods.push_back(MethodSpec::parse(tok, cfg.grid));
  cfg.reps = 100;
  cfg.alpha = 0.05;
  cfg.density_mode = DensityMode::Kind::Known;
  cfg.seed = 1;
  cfg.threads = 1;
  // Coverage studies need statistical accuracy, not optimization accuracy;
  // the looser tolerance keeps section-7-scale fits inside the iteration cap.
  cfg.solver.tol_primal = 1e-4;
  cfg.solver.tol_dual = 1e-4;
  cfg.solver.max_iter = 30000;
  return cfg;
}

namespace {

// Raw key/value text gathered from one config file, grouped by section.
struct RawConfig {
  std::map<std::string, std::map<std::string, std::string>> sections;
};

RawConfig tokenize_config(const std::string& text) {
  RawConfig raw;
  std::string section;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
      section = lower(trim(line.substr(1, line.size() - 2)));
      if (section.empty())
        throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = lower(trim(line.substr(0, eq)));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    if (section.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": key outside any [section]");
    if (!raw.sections[section].emplace(key, value).second)
      throw ConfigError("duplicate key '" + key + "' in [" + section + "]");
  }
  return raw;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* begin = v.data();
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc{} || ptr != end)
    throw ConfigError("key '" + key + "': expected integer, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* begin = v.data();
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc{} || ptr != end)
    throw ConfigError("key '" + key + "': expected unsigned integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected number, got '" + v + "'");
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  const RawConfig raw = tokenize_config(text);
  ExperimentConfig cfg = default_experiment();
  cfg.methods.clear();

  // Collected first, applied after all keys are read, since several design
  // fields interact (p with beta, noise family with its parameter).
  int n = cfg.design.n, p = cfg.design.p, s = cfg.s;
  double beta_value = 1.0;
  std::string covariance = "banded_circulant";
  double band_value = 0.1;
  int band_width = 5;
  std::string noise = "gaussian";
  double noise_variance = 1.0, noise_df = 3.0, noise_scale = 1.0;
  int grid_k = 9;
  std::vector<double> taus;
  std::vector<std::string> method_tokens = {"pcqr+cq",   "plad+cq",    "lasso+cq",
                                            "pcqr+square", "plad+square", "lasso+square"};
  std::optional<double> g1, g2, g3;
  double escalation_factor = 1.5;
  int max_escalations = 8;

  for (const auto& [section, kv] : raw.sections) {
    if (section == "design") {
      for (const auto& [key, value] : kv) {
        if (key == "n") n = static_cast<int>(to_int(key, value));
        else if (key == "p") p = static_cast<int>(to_int(key, value));
        else if (key == "s") s = static_cast<int>(to_int(key, value));
        else if (key == "beta_value") beta_value = to_double(key, value);
        else if (key == "covariance") covariance = lower(value);
        else if (key == "band_value") band_value = to_double(key, value);
        else if (key == "band_width") band_width = static_cast<int>(to_int(key, value));
        else if (key == "noise") noise = lower(value);
        else if (key == "noise_variance") noise_variance = to_double(key, value);
        else if (key == "noise_df") noise_df = to_double(key, value);
        else if (key == "noise_scale") noise_scale = to_double(key, value);
        else throw ConfigError("unknown key '" + key + "' in [design]");
      }
    } else if (section == "grid") {
      for (const auto& [key, value] : kv) {
        if (key == "k") grid_k = static_cast<int>(to_int(key, value));
        else if (key == "taus") {
          for (const auto& tok : split_list(value)) taus.push_back(to_double(key, tok));
        } else throw ConfigError("unknown key '" + key + "' in [grid]");
      }
    } else if (section == "run") {
      for (const auto& [key, value] : kv) {
        if (key == "methods") method_tokens = split_list(value);
        else if (key == "reps") cfg.reps = static_cast<int>(to_int(key, value));
        else if (key == "alpha") cfg.alpha = to_double(key, value);
        else if (key == "seed") cfg.seed = to_u64(key, value);
        else if (key == "threads") cfg.threads = static_cast<int>(to_int(key, value));
        else if (key == "output_dir") cfg.output_dir = value;
        else if (key == "density") {
          const std::string d = lower(value);
          if (d == "known") cfg.density_mode = DensityMode::Kind::Known;
          else if (d == "estimated") cfg.density_mode = DensityMode::Kind::Estimated;
          else throw ConfigError("key 'density': expected known|estimated, got '" + value + "'");
        } else throw ConfigError("unknown key '" + key + "' in [run]");
      }
    } else if (section == "gammas") {
      for (const auto& [key, value] : kv) {
        if (key == "gamma1") g1 = to_double(key, value);
        else if (key == "gamma2") g2 = to_double(key, value);
        else if (key == "gamma3") g3 = to_double(key, value);
        else if (key == "escalation_factor") escalation_factor = to_double(key, value);
        else if (key == "max_escalations") max_escalations = static_cast<int>(to_int(key, value));
        else throw ConfigError("unknown key '" + key + "' in [gammas]");
      }
    } else if (section == "solver") {
      for (const auto& [key, value] : kv) {
        if (key == "rho") cfg.solver.rho = to_double(key, value);
        else if (key == "over_relaxation") cfg.solver.over_relaxation = to_double(key, value);
        else if (key == "tol") {
          cfg.solver.tol_primal = to_double(key, value);
          cfg.solver.tol_dual = cfg.solver.tol_primal;
        }
        else if (key == "tol_primal") cfg.solver.tol_primal = to_double(key, value);
        else if (key == "tol_dual") cfg.solver.tol_dual = to_double(key, value);
        else if (key == "max_iter") cfg.solver.max_iter = static_cast<int>(to_int(key, value));
        else throw ConfigError("unknown key '" + key + "' in [solver]");
      }
    } else if (section == "dnc") {
      for (const auto& [key, value] : kv) {
        if (key == "m") cfg.dnc_m = static_cast<int>(to_int(key, value));
        else if (key == "trunc_s") cfg.dnc_trunc_s = static_cast<int>(to_int(key, value));
        else throw ConfigError("unknown key '" + key + "' in [dnc]");
      }
    } else {
      throw ConfigError("unknown section [" + section + "]");
    }
  }

  if (n < 1 || p < 1) throw ConfigError("[design] n and p must be positive");
  if (s < 0 || s > p) throw ConfigError("[design] s must lie in [0, p]");
  cfg.design.n = n;
  cfg.design.p = p;
  cfg.s = s;
  cfg.design.beta_star = SimulationDesign::leading_support(p, s, beta_value);

  if (covariance == "identity") {
    cfg.design.covariance = CovarianceSpec::identity();
  } else if (covariance == "banded_circulant" || covariance == "banded") {
    cfg.design.covariance = CovarianceSpec::banded_circulant(band_value, band_width);
  } else {
    throw ConfigError("key 'covariance': expected identity|banded_circulant, got '" +
                      covariance + "'");
  }

  if (noise == "gaussian") cfg.design.noise = NoiseModel::gaussian(noise_variance);
  else if (noise == "student_t") cfg.design.noise = NoiseModel::student_t(noise_df);
  else if (noise == "cauchy") cfg.design.noise = NoiseModel::cauchy(noise_scale);
  else throw ConfigError("key 'noise': expected gaussian|student_t|cauchy, got '" + noise + "'");

  if (!taus.empty()) {
    cfg.grid = QuantileGrid{taus};
  } else {
    if (grid_k < 1) throw ConfigError("[grid] k must be positive");
    cfg.grid = QuantileGrid::equispaced(grid_k);
  }
  cfg.grid.validate();

  if (method_tokens.empty()) throw ConfigError("[run] methods must be nonempty");
  for (const auto& tok : method_tokens)
    cfg.methods.push_back(MethodSpec::parse(tok, cfg.grid));

  if (cfg.reps < 1) throw ConfigError("[run] reps must be >= 1");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ConfigError("[run] alpha must be in (0,1)");
  if (cfg.threads < 1) throw ConfigError("[run] threads must be >= 1");

  if (g1 || g2 || g3) {
    if (!(g1 && g2 && g3))
      throw ConfigError("[gammas] set all of gamma1, gamma2, gamma3 or none");
    GammaParams g;
    g.gamma1 = *g1;
    g.gamma2 = *g2;
    g.gamma3 = *g3;
    g.escalation_factor = escalation_factor;
    g.max_escalations = max_escalations;
    cfg.gammas = g;
  }

  if (cfg.dnc_m < 1) throw ConfigError("[dnc] m must be >= 1");
  if (cfg.dnc_trunc_s < 0) throw ConfigError("[dnc] trunc_s must be >= 0");

  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace {

// Everything a worker accumulates for one (replication, method) cell.
struct CellSums {
  bool ok = false;
  double cov_T = 0.0, cov_Tc = 0.0;  // covered-coordinate counts
  double len_T = 0.0, len_Tc = 0.0;  // summed interval lengths
};

struct RepWork {
  std::vector<CellSums> cells;  // one per method
};

// First-stage fits depend only on (family, grid size), so DQuant shares the
// PLAD fit with PLAD-based rows and both CQ/Square variants share theirs.
struct FitKey {
  FitMethod method;
  int K;

  bool operator<(const FitKey& o) const {
    return method != o.method ? method < o.method : K < o.K;
  }
};

const FirstStageFit& fit_for(const MethodSpec& m, const Dataset& data,
                             const SolverSettings& solver,
                             std::map<FitKey, FirstStageFit>& cache, double& sigma_hat) {
  const int n = static_cast<int>(data.n());
  const int p = static_cast<int>(data.p());
  FitKey key{m.first_stage, m.first_stage == FitMethod::PCQR ? m.grid.K() : 0};
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  FirstStageFit fit;
  switch (m.first_stage) {
    case FitMethod::PCQR:
      fit = fit_pcqr(data, m.grid, default_pcqr_lambda(n, p, m.grid.K()), solver);
      break;
    case FitMethod::PLAD:
    case FitMethod::PQR:
      fit = fit_plad(data, default_pcqr_lambda(n, p), solver);
      break;
    case FitMethod::Lasso: {
      auto [lfit, sig] = scaled_lasso(data, default_scaled_lasso_lambda(n, p), solver);
      (void)lfit;
      sigma_hat = sig;
      fit = fit_lasso(data, default_lasso_lambda(n, p, sig), solver);
      break;
    }
  }
  return cache.emplace(key, std::move(fit)).first->second;
}

// Noise scale entering the square-loss variance: the scaled-lasso sigma for
// the Lasso row, the fit's own residual scale otherwise (a median fit leaves
// the full heavy tail in its residuals, and the interval must reflect that).
double square_sigma(const Dataset& data, const FirstStageFit& fit,
                    const SolverSettings& solver, double& sl_sigma) {
  if (fit.method == FitMethod::Lasso) {
    if (sl_sigma < 0.0) {
      auto [lfit, sig] = scaled_lasso(
          data,
          default_scaled_lasso_lambda(static_cast<int>(data.n()),
                                      static_cast<int>(data.p())),
          solver);
      (void)lfit;
      sl_sigma = sig;
    }
    return sl_sigma;
  }
  return (data.y - data.X * fit.beta_hat).norm() / std::sqrt(static_cast<double>(data.n()));
}

}  // namespace

CoverageResult run_coverage(const ExperimentConfig& config) {
  if (config.reps < 1) throw ConfigError("reps must be >= 1");
  if (config.methods.empty()) throw ConfigError("methods must be nonempty");
  const int reps = config.reps;
  const int p = config.design.p;
  const int n = config.design.n;
  const int nm = static_cast<int>(config.methods.size());
  const double z = normal_quantile(1.0 - config.alpha / 2.0);

  const GammaParams gammas = config.gammas ? *config.gammas : default_gammas(n, p);

  CoverageResult result;
  result.attempted = reps;
  result.details.resize(nm);
  for (int m = 0; m < nm; ++m) {
    auto& d = result.details[m];
    d.label = config.methods[m].label;
    d.beta_d = Eigen::MatrixXd::Constant(reps, p, std::numeric_limits<double>::quiet_NaN());
    d.half_width = Eigen::MatrixXd::Constant(reps, p, std::numeric_limits<double>::quiet_NaN());
    d.ok.assign(reps, 0);
  }

  std::vector<RepWork> work(reps);
  for (auto& w : work) w.cells.resize(nm);

  const auto run_rep = [&](int r) {
    SimulationDesign design = config.design;
    design.seed = CounterRng::derive(config.seed, {stream::kReplication,
                                                   static_cast<std::uint64_t>(r)});
    GeneratedData gen;
    DecorrelationMatrix M;
    try {
      gen = generate_dataset(design);
      M = build_M(gen.data, gammas, MVariant::VarianceMin, config.solver);
    } catch (const std::exception&) {
      return;  // every method fails on this replication
    }

    std::map<FitKey, FirstStageFit> fits;
    double sigma_hat = -1.0;
    for (int m = 0; m < nm; ++m) {
      const MethodSpec& spec = config.methods[m];
      CellSums& cell = work[r].cells[m];
      try {
        const FirstStageFit& fit =
            fit_for(spec, gen.data, config.solver, fits, sigma_hat);
        DebiasedEstimate est;
        if (spec.debias == DebiasedEstimate::Kind::CQ) {
          const Eigen::VectorXd resid = gen.data.y - gen.data.X * fit.beta_hat;
          DensityMode mode =
              config.density_mode == DensityMode::Kind::Known
                  ? DensityMode::known(design.noise)
                  : DensityMode::estimated(
                        std::max<int>(1, static_cast<int>(fit.support().size())), p);
          const NuisanceEstimates nu = estimate_nuisance(resid, spec.grid, mode);
          est = debias_cq(fit, nu, M, gen.data, spec.grid);
        } else {
          const double sig = square_sigma(gen.data, fit, config.solver, sigma_hat);
          est = debias_square(fit, sig, M, gen.data);
        }

        auto& detail = result.details[m];
        for (int j = 0; j < p; ++j) {
          const double hw = z * std::sqrt(est.var_diag[j] / n);
          if (!std::isfinite(hw) || !std::isfinite(est.beta_d[j]))
            throw SolverError("nonfinite de-biased coordinate", SolveReport{});
          detail.beta_d(r, j) = est.beta_d[j];
          detail.half_width(r, j) = hw;
          const bool covered = std::abs(est.beta_d[j] - design.beta_star[j]) <= hw;
          if (j < config.s) {
            cell.cov_T += covered ? 1.0 : 0.0;
            cell.len_T += 2.0 * hw;
          } else {
            cell.cov_Tc += covered ? 1.0 : 0.0;
            cell.len_Tc += 2.0 * hw;
          }
        }
        cell.ok = true;
        detail.ok[r] = 1;
      } catch (const std::exception&) {
        cell.ok = false;
        result.details[m].beta_d.row(r).setConstant(std::numeric_limits<double>::quiet_NaN());
        result.details[m].half_width.row(r).setConstant(
            std::numeric_limits<double>::quiet_NaN());
      }
    }
  };

  const int workers = std::max(1, std::min(config.threads, reps));
  if (workers == 1) {
    for (int r = 0; r < reps; ++r) run_rep(r);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int r = next.fetch_add(1); r < reps; r = next.fetch_add(1)) run_rep(r);
      });
    for (auto& t : pool) t.join();
  }

  const std::string noise_name = config.design.noise.name();
  for (int m = 0; m < nm; ++m) {
    double cov_T = 0.0, cov_Tc = 0.0, len_T = 0.0, len_Tc = 0.0;
    int ok = 0;
    for (int r = 0; r < reps; ++r) {
      const CellSums& c = work[r].cells[m];
      if (!c.ok) continue;
      ++ok;
      cov_T += c.cov_T;
      cov_Tc += c.cov_Tc;
      len_T += c.len_T;
      len_Tc += c.len_Tc;
    }
    if (ok < 0.9 * reps || ok == 0) continue;

    const int s = config.s;
    CoverageRow row;
    row.method = config.methods[m].label;
    row.noise = noise_name;
    row.reps = ok;
    row.attempted = reps;
    const double nT = static_cast<double>(ok) * s;
    const double nTc = static_cast<double>(ok) * (p - s);
    row.cp_T = s > 0 ? cov_T / nT : 0.0;
    row.cp_Tc = p > s ? cov_Tc / nTc : 0.0;
    row.cp_all = (cov_T + cov_Tc) / (static_cast<double>(ok) * p);
    row.al_T = s > 0 ? len_T / nT : 0.0;
    row.al_Tc = p > s ? len_Tc / nTc : 0.0;
    row.al_all = (len_T + len_Tc) / (static_cast<double>(ok) * p);
    result.rows.push_back(std::move(row));
  }
  return result;
}

std::vector<HistogramRecord> run_histogram(const ExperimentConfig& config,
                                           const std::vector<int>& coords, int bins) {
  if (bins < 1) throw ConfigError("bins must be >= 1");
  for (int j : coords)
    if (j < 0 || j >= config.design.p)
      throw ConfigError("histogram coordinate out of range: " + std::to_string(j));

  const CoverageResult cov = run_coverage(config);
  std::vector<HistogramRecord> records;
  for (std::size_t m = 0; m < cov.details.size(); ++m) {
    const CoverageDetail& d = cov.details[m];
    for (int j : coords) {
      HistogramRecord rec;
      rec.method = d.label;
      rec.coord = j;
      for (int r = 0; r < d.beta_d.rows(); ++r)
        if (d.ok[r]) rec.values.push_back(d.beta_d(r, j));
      if (rec.values.empty()) continue;
      rec.lo = *std::min_element(rec.values.begin(), rec.values.end());
      rec.hi = *std::max_element(rec.values.begin(), rec.values.end());
      rec.counts.assign(bins, 0);
      const double span = rec.hi - rec.lo;
      for (double v : rec.values) {
        int b = span > 0.0 ? static_cast<int>((v - rec.lo) / span * bins) : 0;
        b = std::min(b, bins - 1);
        ++rec.counts[b];
      }
      records.push_back(std::move(rec));
    }
  }
  return records;
}

namespace {

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string coverage_csv(const std::vector<CoverageRow>& rows) {
  std::string out = "method,noise,cp_all,cp_T,cp_Tc,al_all,al_T,al_Tc,reps\n";
  for (const auto& r : rows) {
    out += r.method + ',' + r.noise + ',' + fixed4(r.cp_all) + ',' + fixed4(r.cp_T) + ',' +
           fixed4(r.cp_Tc) + ',' + fixed4(r.al_all) + ',' + fixed4(r.al_T) + ',' +
           fixed4(r.al_Tc) + ',' + std::to_string(r.reps) + '\n';
  }
  return out;
}

std::vector<CoverageRow> parse_coverage_csv(const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  if (!std::getline(ss, line)) throw IoError("empty coverage CSV");
  if (trim(line) != "method,noise,cp_all,cp_T,cp_Tc,al_all,al_T,al_Tc,reps")
    throw IoError("unexpected coverage CSV header: " + line);
  std::vector<CoverageRow> rows;
  while (std::getline(ss, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ',')) f.push_back(tok);
    if (f.size() != 9) throw IoError("bad coverage CSV row: " + line);
    CoverageRow r;
    r.method = f[0];
    r.noise = f[1];
    r.cp_all = to_double("cp_all", f[2]);
    r.cp_T = to_double("cp_T", f[3]);
    r.cp_Tc = to_double("cp_Tc", f[4]);
    r.al_all = to_double("al_all", f[5]);
    r.al_T = to_double("al_T", f[6]);
    r.al_Tc = to_double("al_Tc", f[7]);
    r.reps = static_cast<int>(to_int("reps", f[8]));
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string coverage_json(const std::vector<CoverageRow>& rows) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json o;
    o["method"] = r.method;
    o["noise"] = r.noise;
    o["cp_all"] = r.cp_all;
    o["cp_T"] = r.cp_T;
    o["cp_Tc"] = r.cp_Tc;
    o["al_all"] = r.al_all;
    o["al_T"] = r.al_T;
    o["al_Tc"] = r.al_Tc;
    o["reps"] = r.reps;
    arr.push_back(std::move(o));
  }
  return arr.dump(2) + "\n";
}

std::string histogram_csv(const std::vector<HistogramRecord>& recs) {
  std::string out = "method,coord,bin_lo,bin_hi,count\n";
  for (const auto& rec : recs) {
    const int bins = static_cast<int>(rec.counts.size());
    const double span = rec.hi - rec.lo;
    for (int b = 0; b < bins; ++b) {
      const double lo = rec.lo + span * b / bins;
      const double hi = b + 1 == bins ? rec.hi : rec.lo + span * (b + 1) / bins;
      out += rec.method + ',' + std::to_string(rec.coord) + ',' + format_double(lo) + ',' +
             format_double(hi) + ',' + std::to_string(rec.counts[b]) + '\n';
    }
  }
  return out;
}

std::string histogram_values_csv(const std::vector<HistogramRecord>& recs) {
  std::string out = "method,coord,rep,value\n";
  for (const auto& rec : recs)
    for (std::size_t r = 0; r < rec.values.size(); ++r)
      out += rec.method + ',' + std::to_string(rec.coord) + ',' + std::to_string(r) + ',' +
             format_double(rec.values[r]) + '\n';
  return out;
}

std::string histogram_json(const std::vector<HistogramRecord>& recs) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& rec : recs) {
    nlohmann::ordered_json o;
    o["method"] = rec.method;
    o["coord"] = rec.coord;
    o["lo"] = rec.lo;
    o["hi"] = rec.hi;
    o["counts"] = rec.counts;
    o["values"] = rec.values;
    arr.push_back(std::move(o));
  }
  return arr.dump(2) + "\n";
}

std::string config_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string manifest_json(const std::string& cfg_hash, std::uint64_t seed,
                          const std::vector<CoverageRow>& rows) {
  nlohmann::ordered_json o;
  o["config_hash"] = cfg_hash;
  o["seed"] = seed;
  o["version"] = kVersion;
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json e;
    e["method"] = r.method;
    e["succeeded"] = r.reps;
    e["attempted"] = r.attempted;
    arr.push_back(std::move(e));
  }
  o["rows"] = arr;
  return o.dump(2) + "\n";
}

}  // namespace rhdi
