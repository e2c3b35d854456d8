#include "rhdi/decorrelate.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "rhdi/kernels.hpp"

namespace rhdi {

GammaParams default_gammas(int n, int p) {
  if (n < 2 || p < 2) throw std::invalid_argument("default_gammas: need n,p >= 2");
  GammaParams g;
  const double lp = std::log(static_cast<double>(p));
  g.gamma1 = 0.5 * std::sqrt(lp / n);
  g.gamma2 = 5.0 * std::sqrt(lp);
  g.gamma3 = 5.0 * std::sqrt(lp);
  return g;
}

Eigen::VectorXd DecorrelationMatrix::mu(int j) const {
  if (!covers(j)) throw std::out_of_range("decorrelation matrix does not cover coordinate");
  return rows.row(row_index[static_cast<std::size_t>(j)]).transpose();
}

Eigen::MatrixXd DecorrelationMatrix::dense() const {
  const int pp = p();
  Eigen::MatrixXd M(pp, pp);
  for (int j = 0; j < pp; ++j) {
    if (!covers(j)) throw std::out_of_range("decorrelation matrix is not full");
    M.row(j) = rows.row(row_index[static_cast<std::size_t>(j)]);
  }
  return M;
}

namespace {

// Shared pieces of the column programs: the constraint stack, its offsets,
// and the normal-matrix factorization, reused across all p columns.
struct MuSolverContext {
  const Eigen::MatrixXd& Sigma;
  const Eigen::MatrixXd& X;
  Eigen::RowVectorXd w;  // n^{-1/2} column sums of X
  MVariant variant;
  SolverSettings settings;
  double sqrt_n;
  AdmmOperator op;

  MuSolverContext(const Eigen::MatrixXd& Sigma_hat, const Eigen::MatrixXd& Xin,
                  MVariant var, const SolverSettings& s)
      : Sigma(Sigma_hat),
        X(Xin),
        variant(var),
        settings(s),
        sqrt_n(std::sqrt(static_cast<double>(Xin.rows()))),
        op(make_A(Sigma_hat, Xin, var), make_hess(Sigma_hat, var), s) {
    w = X.colwise().sum() / sqrt_n;
  }

  static Eigen::MatrixXd make_A(const Eigen::MatrixXd& Sigma, const Eigen::MatrixXd& X,
                                MVariant) {
    const Eigen::Index p = Sigma.cols();
    const Eigen::Index n = X.rows();
    // Stacked blocks: Sigma (gamma1 ball around e_j), X/sqrt(n) (gamma2 ball),
    // the scaled column-sum row (gamma3), and an identity block that carries
    // the l1 objective for L1Min and is free for VarianceMin. The identity
    // block also keeps the x-update matrix positive definite when p > n.
    Eigen::MatrixXd A(p + n + 1 + p, p);
    A.topRows(p) = Sigma;
    A.middleRows(p, n) = X / std::sqrt(static_cast<double>(n));
    A.row(p + n) = X.colwise().sum() / std::sqrt(static_cast<double>(n));
    A.bottomRows(p) = Eigen::MatrixXd::Identity(p, p);
    return A;
  }

  static Eigen::MatrixXd make_hess(const Eigen::MatrixXd& Sigma, MVariant var) {
    if (var == MVariant::L1Min) return Eigen::MatrixXd();
    return 2.0 * Sigma;
  }

  std::vector<ProxBlock> blocks(const GammaParams& g) const {
    const Eigen::Index p = Sigma.cols();
    const Eigen::Index n = X.rows();
    std::vector<ProxBlock> bl;
    auto clamp_block = [](Eigen::Index off, Eigen::Index size, double radius) {
      return ProxBlock{off, size,
                       [radius](double* v, Eigen::Index m, double) {
                         kernels::clamp_abs(v, v, static_cast<std::size_t>(m), radius);
                       },
                       nullptr};
    };
    bl.push_back(clamp_block(0, p, g.gamma1));
    bl.push_back(clamp_block(p, n, g.gamma2 / sqrt_n));
    bl.push_back(clamp_block(p + n, 1, g.gamma3));
    if (variant == MVariant::L1Min) {
      bl.push_back(ProxBlock{p + n + 1, p,
                             [](double* v, Eigen::Index m, double rho) {
                               kernels::soft_threshold(v, v, static_cast<std::size_t>(m),
                                                       1.0 / rho);
                             },
                             [](const double* z, Eigen::Index m) {
                               double s = 0.0;
                               for (Eigen::Index i = 0; i < m; ++i) s += std::abs(z[i]);
                               return s;
                             }});
    } else {
      bl.push_back(ProxBlock{p + n + 1, p,
                             [](double*, Eigen::Index, double) {}, nullptr});
    }
    return bl;
  }

  std::pair<Eigen::VectorXd, ColumnRecord> solve_column(int j, GammaParams gammas) const {
    const Eigen::Index p = Sigma.cols();
    Eigen::VectorXd c = Eigen::VectorXd::Zero(op.z_dim());
    c[j] = -1.0;

    auto g_value = [this](const Eigen::VectorXd& x) {
      return variant == MVariant::VarianceMin ? x.dot(Sigma * x) : 0.0;
    };

    ColumnRecord rec;
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(p);
    for (int esc = 0; esc <= gammas.max_escalations; ++esc) {
      auto bl = blocks(gammas);
      AdmmOperator::State state;
      auto [x, report] = op.solve(c, bl, g_value, &state);
      // Tighten until the returned x itself honors the constraints, not just
      // the projected copy z.
      double tol = std::min(settings.tol_primal, settings.tol_dual);
      for (int refine = 0; refine < 2; ++refine) {
        if (!report.converged) break;
        const double c1 = (Sigma * x - Eigen::VectorXd::Unit(p, j)).cwiseAbs().maxCoeff();
        const double c2 = (X * x).cwiseAbs().maxCoeff();
        const double c3 = std::abs(w.dot(x));
        if (c1 <= gammas.gamma1 + kMuFeasTol && c2 <= gammas.gamma2 + kMuFeasTol &&
            c3 <= gammas.gamma3 + kMuFeasTol)
          break;
        tol /= 10.0;
        std::tie(x, report) = op.solve(c, bl, g_value, &state, tol);
      }

      rec.c1 = (Sigma * x - Eigen::VectorXd::Unit(p, j)).cwiseAbs().maxCoeff();
      rec.c2 = (X * x).cwiseAbs().maxCoeff();
      rec.c3 = std::abs(w.dot(x));
      rec.report = report;
      rec.escalations_used = esc;
      rec.gammas_final = gammas;
      rec.objective = variant == MVariant::VarianceMin ? x.dot(Sigma * x) : x.lpNorm<1>();
      const bool ok = report.converged && rec.c1 <= gammas.gamma1 + kMuFeasTol &&
                      rec.c2 <= gammas.gamma2 + kMuFeasTol &&
                      rec.c3 <= gammas.gamma3 + kMuFeasTol;
      if (ok) {
        rec.feasible = true;
        mu = x;
        break;
      }
      if (esc < gammas.max_escalations) gammas = gammas.scaled(gammas.escalation_factor);
    }
    return {std::move(mu), std::move(rec)};
  }
};

}  // namespace

std::pair<Eigen::VectorXd, ColumnRecord> solve_mu_column(
    const Eigen::MatrixXd& Sigma_hat, const Eigen::MatrixXd& X, int j,
    const GammaParams& gammas, MVariant variant, const SolverSettings& settings) {
  const Eigen::Index p = X.cols();
  if (Sigma_hat.rows() != p || Sigma_hat.cols() != p)
    throw std::invalid_argument("solve_mu_column: Sigma_hat dimension mismatch");
  if (j < 0 || j >= p) throw std::out_of_range("solve_mu_column: column index");
  const double err =
      (Sigma_hat - (X.transpose() * X) / static_cast<double>(X.rows())).cwiseAbs().maxCoeff();
  if (err > 1e-10)
    throw std::invalid_argument("solve_mu_column: Sigma_hat is not X'X/n");
  MuSolverContext ctx(Sigma_hat, X, variant, settings);
  auto [mu, rec] = ctx.solve_column(j, gammas);
  if (!rec.feasible)
    throw SolverError("decorrelation column " + std::to_string(j) +
                          " infeasible after escalation",
                      rec.report);
  return {std::move(mu), std::move(rec)};
}

DecorrelationMatrix build_M(const Dataset& data, const GammaParams& gammas,
                            MVariant variant, const SolverSettings& settings,
                            const std::vector<int>* columns, int threads) {
  const int p = static_cast<int>(data.p());
  Eigen::MatrixXd Sigma = gram_matrix(data);
  MuSolverContext ctx(Sigma, data.X, variant, settings);

  std::vector<int> cols;
  if (columns) {
    cols = *columns;
  } else {
    cols.resize(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j) cols[static_cast<std::size_t>(j)] = j;
  }
  for (int j : cols)
    if (j < 0 || j >= p) throw std::out_of_range("build_M: column index out of range");

  DecorrelationMatrix M;
  M.variant = variant;
  M.columns = cols;
  M.rows.resize(static_cast<Eigen::Index>(cols.size()), p);
  M.per_column.resize(cols.size());
  M.row_index.assign(static_cast<std::size_t>(p), -1);
  for (std::size_t r = 0; r < cols.size(); ++r)
    M.row_index[static_cast<std::size_t>(cols[r])] = static_cast<int>(r);

  std::atomic<std::size_t> next{0};
  std::atomic<int> failed{-1};
  auto worker = [&]() {
    for (;;) {
      const std::size_t r = next.fetch_add(1);
      if (r >= cols.size() || failed.load() >= 0) return;
      auto [mu, rec] = ctx.solve_column(cols[r], gammas);
      M.rows.row(static_cast<Eigen::Index>(r)) = mu.transpose();
      M.per_column[r] = rec;
      if (!rec.feasible) failed.store(cols[r]);
    }
  };

  const int nw = std::max(1, threads);
  if (nw == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nw));
    for (int t = 0; t < nw; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failed.load() >= 0) {
    const auto r = static_cast<std::size_t>(M.row_index[static_cast<std::size_t>(failed.load())]);
    throw SolverError("decorrelation column " + std::to_string(failed.load()) +
                          " infeasible after escalation",
                      M.per_column[r].report);
  }
  return M;
}

Eigen::VectorXd compute_kappa(const Dataset& data, const Eigen::VectorXd& beta,
                              const Eigen::VectorXd& b, const QuantileGrid& grid) {
  grid.validate();
  if (b.size() != grid.K()) throw std::invalid_argument("compute_kappa: b length mismatch");
  if (beta.size() != data.p()) throw std::invalid_argument("compute_kappa: beta length mismatch");
  const auto n = data.n();
  Eigen::VectorXd r = data.y - data.X * beta;
  Eigen::VectorXd wsum = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < grid.K(); ++k) {
    const double tau = grid.taus[static_cast<std::size_t>(k)];
    for (Eigen::Index i = 0; i < n; ++i)
      wsum[i] += (r[i] <= b[k] ? 1.0 : 0.0) - tau;
  }
  return (data.X.transpose() * wsum) / static_cast<double>(n);
}

namespace {

void fill_covered(const DecorrelationMatrix& M, const Eigen::MatrixXd& Sigma,
                  const Eigen::VectorXd& correction_source, DebiasedEstimate& est,
                  double var_scale) {
  const int p = M.p();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  est.beta_d.setConstant(p, nan);
  est.mu_sigma_mu.setConstant(p, nan);
  est.var_diag.setConstant(p, nan);
  for (std::size_t r = 0; r < M.columns.size(); ++r) {
    const int j = M.columns[r];
    const Eigen::VectorXd mu = M.rows.row(static_cast<Eigen::Index>(r)).transpose();
    est.beta_d[j] = est.beta_hat[j] + mu.dot(correction_source);
    const double q = mu.dot(Sigma * mu);
    est.mu_sigma_mu[j] = q;
    est.var_diag[j] = var_scale * q;
  }
}

}  // namespace

DebiasedEstimate debias_cq(const FirstStageFit& fit, const NuisanceEstimates& nuisance,
                           const DecorrelationMatrix& M, const Dataset& data,
                           const QuantileGrid& grid) {
  grid.validate();
  if (fit.beta_hat.size() != data.p())
    throw std::invalid_argument("debias_cq: fit dimension mismatch");
  if (M.p() != static_cast<int>(data.p()))
    throw std::invalid_argument("debias_cq: M dimension mismatch");
  if (!(nuisance.theta_hat > 0.0)) throw std::invalid_argument("debias_cq: theta_hat <= 0");

  const Eigen::VectorXd& b =
      fit.b_hat.size() == grid.K() ? fit.b_hat : nuisance.b_hat;
  if (b.size() != grid.K()) throw std::invalid_argument("debias_cq: no intercepts available");

  DebiasedEstimate est;
  est.kind = DebiasedEstimate::Kind::CQ;
  est.beta_hat = fit.beta_hat;
  est.kappa = compute_kappa(data, fit.beta_hat, b, grid);
  est.theta_hat = nuisance.theta_hat;
  est.sigma_K = nuisance.sigma_K;
  est.n = static_cast<int>(data.n());
  est.source_fit = fit.method;
  est.m_variant = M.variant;
  est.columns = M.columns;

  Eigen::MatrixXd Sigma = gram_matrix(data);
  const double var_scale = nuisance.sigma_K * nuisance.sigma_K /
                           (nuisance.theta_hat * nuisance.theta_hat);
  const Eigen::VectorXd corr = -est.kappa / nuisance.theta_hat;
  fill_covered(M, Sigma, corr, est, var_scale);
  return est;
}

DebiasedEstimate debias_square(const FirstStageFit& fit, double sigma_hat,
                               const DecorrelationMatrix& M, const Dataset& data) {
  if (fit.beta_hat.size() != data.p())
    throw std::invalid_argument("debias_square: fit dimension mismatch");
  if (M.p() != static_cast<int>(data.p()))
    throw std::invalid_argument("debias_square: M dimension mismatch");
  if (!(sigma_hat > 0.0)) throw std::invalid_argument("debias_square: sigma_hat <= 0");

  DebiasedEstimate est;
  est.kind = DebiasedEstimate::Kind::Square;
  est.beta_hat = fit.beta_hat;
  est.sigma_hat = sigma_hat;
  est.n = static_cast<int>(data.n());
  est.source_fit = fit.method;
  est.m_variant = M.variant;
  est.columns = M.columns;

  Eigen::MatrixXd Sigma = gram_matrix(data);
  const Eigen::VectorXd corr =
      data.X.transpose() * (data.y - data.X * fit.beta_hat) / static_cast<double>(data.n());
  fill_covered(M, Sigma, corr, est, sigma_hat * sigma_hat);
  return est;
}

}  // namespace rhdi
