#include "rhdi/noise.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/cauchy.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "rhdi/rng.hpp"

namespace rhdi {

NoiseModel NoiseModel::gaussian(double variance) {
  if (!(variance > 0.0)) throw std::domain_error("gaussian variance must be positive");
  return NoiseModel(Kind::Gaussian, variance);
}

NoiseModel NoiseModel::student_t(double df) {
  if (!(df > 0.0)) throw std::domain_error("student_t df must be positive");
  return NoiseModel(Kind::StudentT, df);
}

NoiseModel NoiseModel::cauchy(double scale) {
  if (!(scale > 0.0)) throw std::domain_error("cauchy scale must be positive");
  return NoiseModel(Kind::Cauchy, scale);
}

NoiseModel NoiseModel::tabulated(std::vector<double> u, std::vector<double> q) {
  if (u.size() != q.size() || u.size() < 2)
    throw std::domain_error("tabulated noise needs >= 2 matching knots");
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!(u[i] > 0.0 && u[i] < 1.0)) throw std::domain_error("tabulated knot u outside (0,1)");
    if (i > 0 && !(u[i] > u[i - 1] && q[i] > q[i - 1]))
      throw std::domain_error("tabulated knots must be strictly increasing");
  }
  NoiseModel m(Kind::Tabulated, 0.0);
  m.knots_u_ = std::move(u);
  m.knots_q_ = std::move(q);
  return m;
}

std::string NoiseModel::name() const {
  switch (kind_) {
    case Kind::Gaussian: return "gaussian";
    case Kind::StudentT: return "student_t";
    case Kind::Cauchy: return "cauchy";
    case Kind::Tabulated: return "tabulated";
  }
  return "unknown";
}

double NoiseModel::density(double x) const {
  switch (kind_) {
    case Kind::Gaussian: {
      boost::math::normal_distribution<double> d(0.0, std::sqrt(param_));
      return boost::math::pdf(d, x);
    }
    case Kind::StudentT: {
      boost::math::students_t_distribution<double> d(param_);
      return boost::math::pdf(d, x);
    }
    case Kind::Cauchy: {
      boost::math::cauchy_distribution<double> d(0.0, param_);
      return boost::math::pdf(d, x);
    }
    case Kind::Tabulated: {
      // Density is the reciprocal slope of the quantile table on the segment
      // containing x; zero outside the table's range.
      if (x < knots_q_.front() || x > knots_q_.back()) return 0.0;
      auto it = std::upper_bound(knots_q_.begin(), knots_q_.end(), x);
      std::size_t hi = std::min<std::size_t>(
          static_cast<std::size_t>(it - knots_q_.begin()), knots_q_.size() - 1);
      if (hi == 0) hi = 1;
      double du = knots_u_[hi] - knots_u_[hi - 1];
      double dq = knots_q_[hi] - knots_q_[hi - 1];
      return du / dq;
    }
  }
  return 0.0;
}

double NoiseModel::quantile(double tau) const {
  if (!(tau > 0.0 && tau < 1.0)) throw std::domain_error("quantile level outside (0,1)");
  switch (kind_) {
    case Kind::Gaussian: {
      boost::math::normal_distribution<double> d(0.0, std::sqrt(param_));
      return boost::math::quantile(d, tau);
    }
    case Kind::StudentT: {
      boost::math::students_t_distribution<double> d(param_);
      return boost::math::quantile(d, tau);
    }
    case Kind::Cauchy: {
      boost::math::cauchy_distribution<double> d(0.0, param_);
      return boost::math::quantile(d, tau);
    }
    case Kind::Tabulated: {
      if (tau <= knots_u_.front()) return knots_q_.front();
      if (tau >= knots_u_.back()) return knots_q_.back();
      auto it = std::upper_bound(knots_u_.begin(), knots_u_.end(), tau);
      std::size_t hi = static_cast<std::size_t>(it - knots_u_.begin());
      double w = (tau - knots_u_[hi - 1]) / (knots_u_[hi] - knots_u_[hi - 1]);
      return knots_q_[hi - 1] + w * (knots_q_[hi] - knots_q_[hi - 1]);
    }
  }
  return 0.0;
}

double NoiseModel::sample(CounterRng& rng) const {
  return quantile(rng.uniform01());
}

std::optional<double> NoiseModel::variance() const {
  switch (kind_) {
    case Kind::Gaussian:
      return param_;
    case Kind::StudentT:
      if (param_ > 2.0) return param_ / (param_ - 2.0);
      return std::nullopt;
    case Kind::Cauchy:
      return std::nullopt;
    case Kind::Tabulated: {
      // Exact piecewise-linear integrals of Q and Q^2 over u in [0,1],
      // with flat extension beyond the first/last knot.
      double m1 = 0.0, m2 = 0.0;
      auto add = [&](double du, double a, double b) {
        m1 += du * 0.5 * (a + b);
        m2 += du * (a * a + a * b + b * b) / 3.0;
      };
      add(knots_u_.front(), knots_q_.front(), knots_q_.front());
      for (std::size_t i = 1; i < knots_u_.size(); ++i)
        add(knots_u_[i] - knots_u_[i - 1], knots_q_[i - 1], knots_q_[i]);
      add(1.0 - knots_u_.back(), knots_q_.back(), knots_q_.back());
      return m2 - m1 * m1;
    }
  }
  return std::nullopt;
}

}  // namespace rhdi
