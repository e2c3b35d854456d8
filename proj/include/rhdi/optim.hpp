#pragma once

#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace rhdi {

struct SolverSettings {
  double rho = 1.0;
  double over_relaxation = 1.5;
  // Absolute tolerances on the sqrt(dimension)-normalized residuals.
  double tol_primal = 1e-6;
  double tol_dual = 1e-6;
  int max_iter = 10000;
};

struct SolveReport {
  int iterations = 0;
  bool converged = false;
  // sqrt(dimension)-normalized, so converged implies primal_residual <=
  // tol_primal and dual_residual <= tol_dual.
  double primal_residual = std::numeric_limits<double>::infinity();
  double dual_residual = std::numeric_limits<double>::infinity();
  double objective = std::numeric_limits<double>::quiet_NaN();
};

struct SolverError : std::runtime_error {
  SolveReport report;
  SolverError(const std::string& what, SolveReport r)
      : std::runtime_error(what), report(r) {}
};

// Elementwise proximal/projection primitives. These route through the
// runtime-dispatched kernels; results are identical across instruction sets.
Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double lambda);
Eigen::VectorXd project_linf(const Eigen::VectorXd& v, double radius);
void soft_threshold_inplace(Eigen::VectorXd& v, double lambda);
void project_linf_inplace(Eigen::VectorXd& v, double radius);
// Prox of w * check-loss at a single point.
double prox_check_scalar(double tau, double w, double v);
// Vector prox of w * sum_i check(z_i, tau).
void prox_check_inplace(Eigen::VectorXd& v, double tau, double w);
// sum_i check(v_i, tau).
double check_loss_total(const Eigen::VectorXd& v, double tau);

// One additive piece of the z-side objective f(z) = sum_b f_b(z_b).
struct ProxBlock {
  Eigen::Index offset = 0;
  Eigen::Index size = 0;
  // Overwrites v with argmin_z f_b(z) + (rho/2) ||z - v||^2.
  std::function<void(double* v, Eigen::Index size, double rho)> prox;
  // f_b(z); null means an indicator that contributes zero when feasible.
  std::function<double(const double* z, Eigen::Index size)> value;
};

// Two-block ADMM for
//     minimize  g(x) + f(z)   subject to  z = A x + c,
// with quadratic g (given by its Hessian; empty means zero) and blockwise
// separable f. The x-update's normal matrix is factored once and reused, so
// one operator serves many solves that differ only in c or in prox radii.
class AdmmOperator {
 public:
  AdmmOperator(Eigen::MatrixXd A, Eigen::MatrixXd hess_g, const SolverSettings& settings);

  Eigen::Index x_dim() const { return A_.cols(); }
  Eigen::Index z_dim() const { return A_.rows(); }

  // Optional warm-start state; left at the final iterate on return.
  struct State {
    Eigen::VectorXd z, u;
  };

  // tol_override replaces both tolerances when positive; the factorization
  // only depends on rho, so tolerance can vary per call.
  std::pair<Eigen::VectorXd, SolveReport> solve(
      const Eigen::VectorXd& c, const std::vector<ProxBlock>& blocks,
      const std::function<double(const Eigen::VectorXd&)>& g_value = nullptr,
      State* state = nullptr, double tol_override = 0.0) const;

 private:
  Eigen::MatrixXd A_;
  SolverSettings settings_;
  Eigen::LDLT<Eigen::MatrixXd> factor_;
};

// One-shot convenience wrapper over AdmmOperator.
std::pair<Eigen::VectorXd, SolveReport> admm_solve(
    const Eigen::MatrixXd& A, const Eigen::VectorXd& c,
    const Eigen::MatrixXd& hess_g, const std::vector<ProxBlock>& blocks,
    const SolverSettings& settings,
    const std::function<double(const Eigen::VectorXd&)>& g_value = nullptr);

}  // namespace rhdi
