#include "rhdi/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rhdi {

DensityMode DensityMode::known(NoiseModel m) {
  DensityMode d;
  d.kind = Kind::Known;
  d.noise = std::move(m);
  return d;
}

DensityMode DensityMode::estimated(int s_hat, int p, double bandwidth) {
  DensityMode d;
  d.kind = Kind::Estimated;
  d.s_hat = s_hat;
  d.p = p;
  d.bandwidth = bandwidth;
  return d;
}

double sigma_k_sq(const QuantileGrid& grid) {
  grid.validate();
  double s = 0.0;
  for (double a : grid.taus)
    for (double b : grid.taus) s += std::min(a, b) * (1.0 - std::max(a, b));
  return s;
}

double default_bandwidth(int s_hat, int n, int p, const QuantileGrid& grid) {
  grid.validate();
  if (n < 1) throw std::domain_error("bandwidth: n must be positive");
  const double s = static_cast<double>(std::max(s_hat, 1));
  const double lp = std::log(static_cast<double>(std::max(p, n)));
  double h = std::pow(s * lp / n, 1.0 / 6.0);
  const double cap_lo = grid.taus.front() - 0.01;
  const double cap_hi = 0.99 - grid.taus.back();
  const double cap = std::min(cap_lo, cap_hi);
  if (!(cap > 0.0))
    throw std::domain_error("bandwidth: grid too extreme for the (0.01, 0.99) clip");
  // Stay strictly inside the clip bounds.
  h = std::min(h, std::nextafter(cap, 0.0));
  if (!(h > 0.0)) throw std::domain_error("bandwidth: clipped to zero");
  return h;
}

Eigen::VectorXd estimate_density_at_quantiles(const Eigen::VectorXd& residuals,
                                              const QuantileGrid& grid, double h) {
  grid.validate();
  if (!(h > 0.0)) throw std::domain_error("density estimate: bandwidth must be positive");
  if (!(grid.taus.front() - h > 0.0 && grid.taus.back() + h < 1.0))
    throw std::domain_error("density estimate: tau +- h leaves (0,1)");
  std::vector<double> rv(residuals.data(), residuals.data() + residuals.size());
  Eigen::VectorXd f(grid.K());
  for (int k = 0; k < grid.K(); ++k) {
    const double tau = grid.taus[static_cast<std::size_t>(k)];
    const double hi = empirical_quantile(rv, tau + h);
    const double lo = empirical_quantile(rv, tau - h);
    const double denom = hi - lo;
    double fk = denom < 1e-12 ? kDensityCeiling : 2.0 * h / denom;
    f[k] = std::clamp(fk, kDensityFloor, kDensityCeiling);
  }
  return f;
}

NuisanceEstimates estimate_nuisance(const Eigen::VectorXd& residuals,
                                    const QuantileGrid& grid, const DensityMode& mode) {
  grid.validate();
  const auto n = residuals.size();
  if (n < 1) throw std::domain_error("nuisance: empty residual vector");

  NuisanceEstimates out;
  out.grid = grid;
  out.mode = mode.kind;
  out.sigma_K = std::sqrt(sigma_k_sq(grid));

  std::vector<double> rv(residuals.data(), residuals.data() + n);
  out.b_hat.resize(grid.K());
  for (int k = 0; k < grid.K(); ++k)
    out.b_hat[k] = empirical_quantile(rv, grid.taus[static_cast<std::size_t>(k)]);

  if (mode.kind == DensityMode::Kind::Known) {
    if (!mode.noise) throw std::invalid_argument("nuisance: known mode without a noise model");
    out.f_hat.resize(grid.K());
    for (int k = 0; k < grid.K(); ++k)
      out.f_hat[k] = std::clamp(mode.noise->density(out.b_hat[k]), kDensityFloor,
                                kDensityCeiling);
  } else {
    if (n < 10 * grid.K())
      throw std::domain_error("nuisance: estimated mode needs >= 10K residuals");
    double h = mode.bandwidth;
    out.s_used = std::max(mode.s_hat, 1);
    if (h == 0.0) {
      if (mode.p < 1)
        throw std::invalid_argument("nuisance: default bandwidth needs the ambient p");
      h = default_bandwidth(mode.s_hat, static_cast<int>(n), mode.p, grid);
    }
    out.bandwidth = h;
    out.f_hat = estimate_density_at_quantiles(residuals, grid, h);
  }
  out.theta_hat = out.f_hat.sum();
  return out;
}

double are_vs_square(const QuantileGrid& grid, const NoiseModel& noise) {
  grid.validate();
  const auto var = noise.variance();
  if (!var) throw std::domain_error("are: noise variance does not exist");
  double theta = 0.0;
  for (double tau : grid.taus) theta += noise.density(noise.quantile(tau));
  return *var * theta * theta / sigma_k_sq(grid);
}

}  // namespace rhdi
