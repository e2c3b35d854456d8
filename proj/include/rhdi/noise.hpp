#pragma once

#include <optional>
#include <string>
#include <vector>

namespace rhdi {

class CounterRng;

// Noise distribution for the linear model. All families are parameterised so
// that quantile() is the exact inverse CDF, which keeps sampling via inverse
// transform deterministic for a fixed uniform stream.
class NoiseModel {
 public:
  enum class Kind { Gaussian, StudentT, Cauchy, Tabulated };

  static NoiseModel gaussian(double variance);
  static NoiseModel student_t(double df);
  static NoiseModel cauchy(double scale);
  // Knots (u_i, q_i) with u strictly increasing inside (0,1) and q strictly
  // increasing. Between knots the quantile function is linear; outside the
  // first/last knot it is clamped flat.
  static NoiseModel tabulated(std::vector<double> u, std::vector<double> q);

  Kind kind() const { return kind_; }
  double param() const { return param_; }
  std::string name() const;

  double density(double x) const;
  double quantile(double tau) const;
  double sample(CounterRng& rng) const;

  // Population variance; empty when it does not exist (Cauchy, t with df<=2).
  std::optional<double> variance() const;

 private:
  NoiseModel(Kind kind, double param) : kind_(kind), param_(param) {}

  Kind kind_;
  double param_ = 0.0;
  std::vector<double> knots_u_;
  std::vector<double> knots_q_;
};

}  // namespace rhdi
