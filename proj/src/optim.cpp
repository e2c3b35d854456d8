#include "rhdi/optim.hpp"

#include <cmath>

#include "rhdi/kernels.hpp"

namespace rhdi {

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double lambda) {
  Eigen::VectorXd out(v.size());
  kernels::soft_threshold(v.data(), out.data(), static_cast<std::size_t>(v.size()), lambda);
  return out;
}

Eigen::VectorXd project_linf(const Eigen::VectorXd& v, double radius) {
  Eigen::VectorXd out(v.size());
  kernels::clamp_abs(v.data(), out.data(), static_cast<std::size_t>(v.size()), radius);
  return out;
}

void soft_threshold_inplace(Eigen::VectorXd& v, double lambda) {
  kernels::soft_threshold(v.data(), v.data(), static_cast<std::size_t>(v.size()), lambda);
}

void project_linf_inplace(Eigen::VectorXd& v, double radius) {
  kernels::clamp_abs(v.data(), v.data(), static_cast<std::size_t>(v.size()), radius);
}

double prox_check_scalar(double tau, double w, double v) {
  double out;
  kernels::prox_check(&v, &out, 1, tau, w);
  return out;
}

void prox_check_inplace(Eigen::VectorXd& v, double tau, double w) {
  kernels::prox_check(v.data(), v.data(), static_cast<std::size_t>(v.size()), tau, w);
}

double check_loss_total(const Eigen::VectorXd& v, double tau) {
  return kernels::check_loss_sum(v.data(), static_cast<std::size_t>(v.size()), tau);
}

AdmmOperator::AdmmOperator(Eigen::MatrixXd A, Eigen::MatrixXd hess_g,
                           const SolverSettings& settings)
    : A_(std::move(A)), settings_(settings) {
  if (A_.rows() == 0 || A_.cols() == 0)
    throw std::invalid_argument("admm: empty constraint matrix");
  if (!(settings_.rho > 0.0)) throw std::invalid_argument("admm: rho must be positive");
  if (!(settings_.tol_primal > 0.0) || !(settings_.tol_dual > 0.0))
    throw std::invalid_argument("admm: tolerances must be positive");
  if (settings_.max_iter < 1) throw std::invalid_argument("admm: max_iter must be >= 1");
  if (!(settings_.over_relaxation >= 1.0) || !(settings_.over_relaxation <= 1.8))
    throw std::invalid_argument("admm: over_relaxation must lie in [1, 1.8]");
  Eigen::MatrixXd normal = settings_.rho * (A_.transpose() * A_);
  if (hess_g.size() != 0) {
    if (hess_g.rows() != A_.cols() || hess_g.cols() != A_.cols())
      throw std::invalid_argument("admm: hess_g dimension mismatch");
    normal += hess_g;
  }
  factor_.compute(normal);
  if (factor_.info() != Eigen::Success)
    throw SolverError("admm: x-update normal matrix is not factorizable", SolveReport{});
}

std::pair<Eigen::VectorXd, SolveReport> AdmmOperator::solve(
    const Eigen::VectorXd& c, const std::vector<ProxBlock>& blocks,
    const std::function<double(const Eigen::VectorXd&)>& g_value, State* state,
    double tol_override) const {
  const Eigen::Index m = z_dim();
  const Eigen::Index d = x_dim();
  if (c.size() != m) throw std::invalid_argument("admm: offset c has wrong length");

  Eigen::Index covered = 0;
  for (const auto& b : blocks) {
    if (b.offset != covered || b.size <= 0 || !b.prox)
      throw std::invalid_argument("admm: prox blocks must tile [0, z_dim)");
    covered += b.size;
  }
  if (covered != m) throw std::invalid_argument("admm: prox blocks must tile [0, z_dim)");

  const double rho = settings_.rho;
  const double alpha = settings_.over_relaxation;
  const double eps_pri = tol_override > 0.0 ? tol_override : settings_.tol_primal;
  const double eps_dua = tol_override > 0.0 ? tol_override : settings_.tol_dual;
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(m));
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  Eigen::VectorXd z, u;
  if (state && state->z.size() == m && state->u.size() == m) {
    z = state->z;
    u = state->u;
  } else {
    z = c;
    u = Eigen::VectorXd::Zero(m);
  }

  Eigen::VectorXd x(d), Axc(m), h(m), v(m), dz(m);
  SolveReport report;

  for (int it = 1; it <= settings_.max_iter; ++it) {
    v = z - u - c;
    x = factor_.solve(rho * (A_.transpose() * v));
    Axc.noalias() = A_ * x;
    Axc += c;

    h = alpha * Axc + (1.0 - alpha) * z;
    v = h + u;
    dz = z;  // previous z
    for (const auto& b : blocks) b.prox(v.data() + b.offset, b.size, rho);
    z = v;
    u += h - z;

    dz = z - dz;
    report.iterations = it;
    report.primal_residual = (Axc - z).norm() * inv_sqrt_m;
    report.dual_residual = rho * (A_.transpose() * dz).norm() * inv_sqrt_d;
    if (report.primal_residual <= eps_pri && report.dual_residual <= eps_dua) {
      report.converged = true;
      break;
    }
  }

  // Objective of the returned x (not of z): g(x) + f(A x + c).
  double obj = g_value ? g_value(x) : 0.0;
  for (const auto& b : blocks)
    if (b.value) obj += b.value(Axc.data() + b.offset, b.size);
  report.objective = obj;

  if (state) {
    state->z = z;
    state->u = u;
  }
  return {std::move(x), report};
}

std::pair<Eigen::VectorXd, SolveReport> admm_solve(
    const Eigen::MatrixXd& A, const Eigen::VectorXd& c,
    const Eigen::MatrixXd& hess_g, const std::vector<ProxBlock>& blocks,
    const SolverSettings& settings,
    const std::function<double(const Eigen::VectorXd&)>& g_value) {
  AdmmOperator op(A, hess_g, settings);
  return op.solve(c, blocks, g_value);
}

}  // namespace rhdi
