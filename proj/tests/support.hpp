#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "rhdi/core.hpp"

namespace testsupport {

// Independent check-loss evaluator; deliberately not the library's.
inline double check_val(double t, double tau) {
  return t >= 0.0 ? tau * t : (tau - 1.0) * t;
}

inline double cqr_objective(const rhdi::Dataset& data, const std::vector<double>& taus,
                            double lambda, const Eigen::VectorXd& beta,
                            const Eigen::VectorXd& b) {
  const auto n = data.n();
  double obj = lambda * beta.cwiseAbs().sum();
  for (std::size_t k = 0; k < taus.size(); ++k) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      s += check_val(data.y[i] - data.X.row(i).dot(beta) - b[static_cast<Eigen::Index>(k)],
                     taus[k]);
    obj += s / static_cast<double>(n);
  }
  return obj;
}

struct OracleSolution {
  Eigen::VectorXd beta;
  Eigen::VectorXd b;
  double objective = std::numeric_limits<double>::infinity();
};

// Exact minimizer of the penalized composite quantile objective for tiny
// instances. The objective is piecewise linear in (beta, b), so some optimum
// lies on a vertex where p+K kink hyperplanes meet: residual kinks
// y_i - x_i'beta - b_k = 0 and penalty kinks beta_j = 0. Enumerate every
// subset, solve, evaluate.
inline OracleSolution brute_force_pcqr(const rhdi::Dataset& data,
                                       const std::vector<double>& taus, double lambda) {
  const int n = static_cast<int>(data.n());
  const int p = static_cast<int>(data.p());
  const int K = static_cast<int>(taus.size());
  const int d = p + K;
  const int total = n * K + p;

  Eigen::MatrixXd rows(total, d);
  Eigen::VectorXd rhs(total);
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < n; ++i) {
      const int r = k * n + i;
      rows.row(r).head(p) = data.X.row(i);
      rows.row(r).tail(K).setZero();
      rows(r, p + k) = 1.0;
      rhs[r] = data.y[i];
    }
  for (int j = 0; j < p; ++j) {
    const int r = n * K + j;
    rows.row(r).setZero();
    rows(r, j) = 1.0;
    rhs[r] = 0.0;
  }

  OracleSolution best;
  std::vector<int> pick(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) pick[static_cast<std::size_t>(i)] = i;

  Eigen::MatrixXd A(d, d);
  Eigen::VectorXd c(d);
  for (;;) {
    for (int i = 0; i < d; ++i) {
      A.row(i) = rows.row(pick[static_cast<std::size_t>(i)]);
      c[i] = rhs[pick[static_cast<std::size_t>(i)]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (lu.isInvertible()) {
      const Eigen::VectorXd v = lu.solve(c);
      const Eigen::VectorXd beta = v.head(p);
      const Eigen::VectorXd b = v.tail(K);
      const double obj = cqr_objective(data, taus, lambda, beta, b);
      if (obj < best.objective) {
        best.beta = beta;
        best.b = b;
        best.objective = obj;
      }
    }
    // next combination
    int i = d - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == total - d + i) --i;
    if (i < 0) break;
    ++pick[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < d; ++j)
      pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
  }
  return best;
}

// Small random instance with a fixed seed, entries in a moderate range.
inline rhdi::Dataset random_instance(int n, int p, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  rhdi::Dataset d;
  d.X.resize(n, p);
  d.y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) d.X(i, j) = nd(gen);
    d.y[i] = nd(gen);
  }
  return d;
}

}  // namespace testsupport
