#include "qldp/filters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qldp/error.hpp"

namespace qldp {

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return (n % 2 == 1) ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

FilterTrajectory run_approximate_filter(const SamplePath& Y, const ReducedModel& model, double eps, double m0) {
  if (!(eps > 0.0)) throw Error(ErrorKind::InvalidArgument, "approximate filter needs eps > 0");
  const TimeGrid& grid = Y.grid;
  const double dt = grid.dt();
  const double dt_max = 0.1 * eps * eps;
  if (dt > dt_max * (1.0 + 1e-9)) {
    throw Error(ErrorKind::NumericalInstability,
                "filter step dt = " + std::to_string(dt) + " is too coarse for eps = " + std::to_string(eps) +
                    "; use dt <= 0.1 * eps^2 = " + std::to_string(dt_max));
  }
  FilterTrajectory out{SamplePath{grid, std::vector<double>(Y.values.size()), "M"}, eps};
  const double gain = 1.0 / eps;
  double m = m0;
  out.M.values[0] = m;
  for (std::size_t k = 0; k + 1 < Y.values.size(); ++k) {
    const double dY = Y.values[k + 1] - Y.values[k];
    m += model.b(m) * dt + gain * (dY - model.h(m) * dt);
    if (!std::isfinite(m)) {
      throw Error(ErrorKind::SimulationDiverged,
                  "approximate filter diverged at step " + std::to_string(k + 1) +
                      "; reduce dt to at most 0.1 * eps^2 = " + std::to_string(dt_max));
    }
    out.M.values[k + 1] = m;
  }
  return out;
}

double interpolate(const SamplePath& path, double t) {
  const TimeGrid& g = path.grid;
  if (t <= g.t0) return path.values.front();
  if (t >= g.t1) return path.values.back();
  const double pos = (t - g.t0) / g.dt();
  const auto k = std::min(static_cast<std::size_t>(pos), g.n_steps - 1);
  const double frac = pos - static_cast<double>(k);
  return path.values[k] + frac * (path.values[k + 1] - path.values[k]);
}

RescaledFilterPath reverse_and_rescale(const FilterTrajectory& filter, double ds) {
  const double eps = filter.eps;
  const auto grid = TimeGrid::with_max_step(0.0, 1.0 / eps, ds);
  RescaledFilterPath out{SamplePath{grid, std::vector<double>(grid.n_steps + 1), "m_tilde"}, eps};
  out.m_tilde.values[0] = filter.M.values.back();
  for (std::size_t k = 1; k <= grid.n_steps; ++k) {
    out.m_tilde.values[k] = interpolate(filter.M, 1.0 - eps * grid.time(k));
  }
  return out;
}

GaussianPosterior kalman_bucy(const SamplePath& Y, double a, double c, double eps, const GaussianPosterior& prior) {
  if (!(c > 0.0)) throw Error(ErrorKind::InvalidArgument, "Kalman-Bucy oracle needs c > 0");
  if (!(eps > 0.0)) throw Error(ErrorKind::InvalidArgument, "Kalman-Bucy oracle needs eps > 0");
  if (!(prior.variance > 0.0)) throw Error(ErrorKind::InvalidArgument, "prior variance must be positive");
  const double dt = Y.grid.dt();
  const double inv_eps2 = 1.0 / (eps * eps);
  double m = prior.mean;
  double P = prior.variance;
  for (std::size_t k = 0; k + 1 < Y.values.size(); ++k) {
    const double dY = Y.values[k + 1] - Y.values[k];
    const double gain = c * P * inv_eps2;
    const double m_next = m - a * m * dt + gain * (dY - c * m * dt);
    const double P_next = P + (-2.0 * a * P + 1.0 - c * c * P * P * inv_eps2) * dt;
    if (!(P_next > 0.0) || !std::isfinite(m_next)) {
      throw Error(ErrorKind::NumericalInstability,
                  "Riccati variance left (0, inf) at step " + std::to_string(k + 1) + "; use a smaller dt");
    }
    m = m_next;
    P = P_next;
  }
  return GaussianPosterior{m, P, Y.grid.t1};
}

// ---------------------------------------------------------------------------
// Grid Bayes filter

GridTransition::GridTransition(const ReducedModel& model, const UniformGrid& xgrid, double dt) : n_(xgrid.size()) {
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "transition step must be positive");
  const double sd = std::sqrt(dt);
  const double step = xgrid.step();
  const double lo = xgrid.lo();
  rows_.resize(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    const double xi = xgrid[i];
    const double mu = xi + model.b(xi) * dt;
    const auto first = static_cast<std::ptrdiff_t>(std::ceil((mu - 6.0 * sd - lo) / step));
    const auto last = static_cast<std::ptrdiff_t>(std::floor((mu + 6.0 * sd - lo) / step));
    Row row;
    if (last < first) {
      // Kernel narrower than the grid spacing: all mass to the nearest node.
      row.first = static_cast<std::ptrdiff_t>(std::llround((mu - lo) / step));
      row.weights = {1.0};
    } else {
      row.first = first;
      row.weights.resize(static_cast<std::size_t>(last - first + 1));
      double total = 0.0;
      for (std::ptrdiff_t j = first; j <= last; ++j) {
        const double d = lo + static_cast<double>(j) * step - mu;
        const double w = std::exp(-0.5 * d * d / dt);
        row.weights[static_cast<std::size_t>(j - first)] = w;
        total += w;
      }
      for (double& w : row.weights) w /= total;
    }
    rows_[i] = std::move(row);
  }
}

std::vector<double> GridTransition::predict(const std::vector<double>& mass) const {
  std::vector<double> out(n_, 0.0);
  const auto n = static_cast<std::ptrdiff_t>(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    const double m = mass[i];
    if (m == 0.0) continue;
    const Row& row = rows_[i];
    const auto len = static_cast<std::ptrdiff_t>(row.weights.size());
    const std::ptrdiff_t j0 = std::max<std::ptrdiff_t>(row.first, 0);
    const std::ptrdiff_t j1 = std::min<std::ptrdiff_t>(row.first + len, n);
    for (std::ptrdiff_t j = j0; j < j1; ++j) {
      out[static_cast<std::size_t>(j)] += m * row.weights[static_cast<std::size_t>(j - row.first)];
    }
  }
  return out;
}

DensityEstimate grid_bayes_filter(const SamplePath& Y, const ReducedModel& model, double eps,
                                  const UniformGrid& xgrid, double dt_obs) {
  if (!(eps > 0.0)) throw Error(ErrorKind::InvalidArgument, "grid filter needs eps > 0");
  const double dt_y = Y.grid.dt();
  const auto stride = static_cast<std::size_t>(std::llround(dt_obs / dt_y));
  if (stride == 0 || std::abs(static_cast<double>(stride) * dt_y - dt_obs) > 1e-9 * dt_obs ||
      Y.grid.n_steps % stride != 0) {
    throw Error(ErrorKind::InvalidArgument, "dt_obs must be a whole multiple of the observation step");
  }
  const double dt = static_cast<double>(stride) * dt_y;
  const std::size_t n = xgrid.size();
  const GridTransition transition(model, xgrid, dt);

  std::vector<double> h(n);
  std::vector<double> mass(n);
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    h[j] = model.h(xgrid[j]);
    mass[j] = std::exp(model.log_p0(xgrid[j]));
    total += mass[j];
  }
  if (!(total > 0.0)) {
    throw Error(ErrorKind::GridTooSmall, "prior has no mass on the grid [" + std::to_string(xgrid.lo()) + ", " +
                                             std::to_string(xgrid.hi()) + "]");
  }
  for (double& m : mass) m /= total;

  const double inv_var = 1.0 / (2.0 * eps * eps * dt);
  double leaked = 0.0;
  std::vector<double> log_w(n);
  // Correction with dY_k acts on X_{t_k} (the state that drove the increment
  // in the Euler model); prediction then carries the posterior to t_{k+1}.
  for (std::size_t k = 0; k < Y.grid.n_steps; k += stride) {
    const double dY = Y.values[k + stride] - Y.values[k];
    double max_lw = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (mass[j] > 0.0) {
        const double innov = dY - h[j] * dt;
        log_w[j] = std::log(mass[j]) - innov * innov * inv_var;
        max_lw = std::max(max_lw, log_w[j]);
      } else {
        log_w[j] = -std::numeric_limits<double>::infinity();
      }
    }
    double mean_before = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean_before += mass[j] * xgrid[j];
    const std::string boundary = (mean_before > 0.5 * (xgrid.lo() + xgrid.hi()))
                                     ? "upper boundary x = " + std::to_string(xgrid.hi())
                                     : "lower boundary x = " + std::to_string(xgrid.lo());
    if (!std::isfinite(max_lw)) {
      throw Error(ErrorKind::GridTooSmall, "posterior mass underflowed near the " + boundary);
    }
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      mass[j] = std::exp(log_w[j] - max_lw);
      s += mass[j];
    }
    for (double& m : mass) m /= s;

    mass = transition.predict(mass);
    double predicted = 0.0;
    for (double m : mass) predicted += m;
    leaked += 1.0 - predicted;
    if (!(predicted > 1e-300)) {
      throw Error(ErrorKind::GridTooSmall, "all probability mass escaped through the " + boundary);
    }
    for (double& m : mass) m /= predicted;
  }

  std::vector<double> log_rho(n);
  for (std::size_t j = 0; j < n; ++j) log_rho[j] = std::log(mass[j] / xgrid.step());
  auto d = make_density(xgrid, std::move(log_rho), eps, DensityMethod::GridBayes);
  if (leaked > 1e-6) d.flags.push_back("boundary-leak");
  return d;
}

// ---------------------------------------------------------------------------

FilterConvergenceStats check_filter_convergence(const ReducedModel& model, const std::vector<double>& eps_list,
                                                const std::vector<std::uint64_t>& seeds, double dt, double ds) {
  if (eps_list.empty() || seeds.empty()) throw Error(ErrorKind::InvalidArgument, "need eps values and seeds");
  for (std::size_t i = 1; i < eps_list.size(); ++i) {
    if (!(eps_list[i] < eps_list[i - 1])) throw Error(ErrorKind::InvalidArgument, "eps list must be decreasing");
  }
  const auto grid = TimeGrid::with_max_step(0.0, 1.0, dt);
  FilterConvergenceStats stats;
  stats.seeds = seeds;
  for (double eps : eps_list) {
    FilterConvergenceEntry e;
    e.eps = eps;
    e.T_eps = std::log(1.0 / eps);
    stats.entries.push_back(e);
  }
  for (std::uint64_t seed : seeds) {
    const double x0 = draw_initial_state(model, seed);
    for (auto& entry : stats.entries) {
      const auto pair = simulate_pair(model, entry.eps, grid, x0, seed);
      const auto filter = run_approximate_filter(pair.Y, model, entry.eps);
      const auto rescaled = reverse_and_rescale(filter, ds);
      const double X1 = pair.X.back();
      double sup = 0.0;
      const auto& g = rescaled.m_tilde.grid;
      for (std::size_t k = 0; k <= g.n_steps && g.time(k) <= entry.T_eps; ++k) {
        sup = std::max(sup, std::abs(rescaled.m_tilde.values[k] - X1));
      }
      entry.sup_dev.push_back(sup);
    }
  }
  for (auto& entry : stats.entries) {
    entry.median_sup_dev = median(entry.sup_dev);
    for (double dev : entry.sup_dev) entry.fitted_C = std::max(entry.fitted_C, dev * std::sqrt(entry.T_eps));
    stats.fitted_C = std::max(stats.fitted_C, entry.fitted_C);
  }
  return stats;
}

}  // namespace qldp
