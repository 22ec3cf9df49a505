#include "qldp/picard.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "qldp/error.hpp"
#include "qldp/parallel.hpp"
#include "qldp/quadrature.hpp"
#include "qldp/sde.hpp"

namespace qldp {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

PicardIntegrands::PicardIntegrands(const ReducedModel& model, double eps, bool use_closed_form)
    : model_(&model), eps_(eps), closed_form_(use_closed_form && model.h_antiderivative.has_value()) {
  if (!(eps > 0.0)) throw Error(ErrorKind::InvalidArgument, "integrands need eps > 0");
}

double PicardIntegrands::centered_integral(double z, double m) const {
  const double hm = model_->h(m);
  if (closed_form_) return (*model_->h_antiderivative)(z) - hm * z;
  return integrate([this, hm](double y) { return model_->h(y) - hm; }, 0.0, z, 1e-10);
}

double PicardIntegrands::F(double z, double m) const {
  return centered_integral(z, m) - m * model_->h(z) + model_->h(m) * z;
}

double PicardIntegrands::I_eps(double z, double m) const {
  const double lp = model_->log_p0(z);
  if (!(lp > kNegInf)) return kNegInf;
  return lp + centered_integral(z, m) / eps_;
}

double PicardIntegrands::g1(double z, double m) const {
  const auto& md = *model_;
  const double hz = md.h(z);
  const double hdz = md.h_deriv(z);
  const double bz = md.b(z);
  return -m * hdz * bz + m * md.h_deriv2(z) / 2.0 + hz * bz - hdz / 2.0 - eps_ * md.b_deriv(z) - hz * md.b(m);
}

double PicardIntegrands::g2(double z, double m) const {
  const auto& md = *model_;
  const double hz = md.h(z);
  const double hm = md.h(m);
  const double hdz = md.h_deriv(z);
  return hz * hm - hm * hm / 2.0 - m * hz * hdz + m * m * hdz * hdz / 2.0;
}

namespace {

struct PathSums {
  double terminal = 0.0;
  double int_g1 = 0.0;
  double int_g2 = 0.0;
  double max_abs = 0.0;
};

/// m~ with h(m~) and b(m~) cached per node.
struct TildeCache {
  std::vector<double> m;
  std::vector<double> hm;
  std::vector<double> bm;
  double ds = 0.0;

  TildeCache(const SamplePath& m_tilde, const ReducedModel& model) : m(m_tilde.values), ds(m_tilde.grid.dt()) {
    hm.resize(m.size());
    bm.resize(m.size());
    for (std::size_t k = 0; k < m.size(); ++k) {
      hm[k] = model.h(m[k]);
      bm[k] = model.b(m[k]);
    }
  }
  std::size_t steps() const { return m.size() - 1; }
};

/// One Euler sweep of Z~ with left-endpoint sums of g1 and g2. The g1/g2
/// expressions mirror PicardIntegrands but share one set of coefficient evaluations.
PathSums run_z_path(double x, const TildeCache& tilde, const ReducedModel& model, double eps,
                    std::span<const double> dW, std::size_t path_index) {
  const double ds = tilde.ds;
  const double noise = std::sqrt(eps);
  PathSums out;
  double z = x;
  double max_abs = std::abs(z);
  double s1 = 0.0;
  double s2 = 0.0;
  for (std::size_t k = 0; k < tilde.steps(); ++k) {
    const double m = tilde.m[k];
    const double hm = tilde.hm[k];
    const double hz = model.h(z);
    const double hdz = model.h_deriv(z);
    const double bz = model.b(z);
    s1 += -m * hdz * bz + m * model.h_deriv2(z) / 2.0 + hz * bz - hdz / 2.0 - eps * model.b_deriv(z) -
          hz * tilde.bm[k];
    s2 += hz * hm - hm * hm / 2.0 - m * hz * hdz + m * m * hdz * hdz / 2.0;
    z += (-hz + m * hdz - eps * bz) * ds + noise * dW[k];
    if (!std::isfinite(z)) {
      throw Error(ErrorKind::SimulationDiverged, "Z path " + std::to_string(path_index) +
                                                     " became non-finite at step " + std::to_string(k + 1));
    }
    max_abs = std::max(max_abs, std::abs(z));
  }
  out.terminal = z;
  out.int_g1 = s1 * ds;
  out.int_g2 = s2 * ds;
  out.max_abs = max_abs;
  return out;
}

SamplePath rescale_on_grid(const FilterTrajectory& filter, const TimeGrid& grid) {
  SamplePath p{grid, std::vector<double>(grid.n_steps + 1), "m_tilde"};
  p.values[0] = filter.M.values.back();
  for (std::size_t k = 1; k <= grid.n_steps; ++k) p.values[k] = interpolate(filter.M, 1.0 - filter.eps * grid.time(k));
  return p;
}

}  // namespace

ZPathBundle simulate_Z(double x, const RescaledFilterPath& m_tilde, std::size_t n_paths, std::uint64_t seed,
                       const ReducedModel& model, unsigned threads) {
  const double eps = m_tilde.eps;
  const TildeCache tilde(m_tilde.m_tilde, model);
  ZPathBundle bundle;
  bundle.x0 = x;
  bundle.eps = eps;
  bundle.ds = tilde.ds;
  bundle.horizon = m_tilde.m_tilde.grid.t1;
  bundle.n_paths = n_paths;
  bundle.terminal.resize(n_paths);
  bundle.int_g1.resize(n_paths);
  bundle.int_g2.resize(n_paths);
  bundle.max_abs.resize(n_paths);
  parallel_for(n_paths, threads, [&](std::size_t j) {
    std::vector<double> dW(tilde.steps());
    fill_increments(seed, streams::kPathBase + j, tilde.ds, 0, dW);
    const auto sums = run_z_path(x, tilde, model, eps, dW, j);
    bundle.terminal[j] = sums.terminal;
    bundle.int_g1[j] = sums.int_g1;
    bundle.int_g2[j] = sums.int_g2;
    bundle.max_abs[j] = sums.max_abs;
  });
  return bundle;
}

PicardEstimate log_rho_estimate(const UniformGrid& xgrid, const RescaledFilterPath& m_tilde,
                                const ReducedModel& model, const PicardOptions& options) {
  if (options.n_paths < 2) throw Error(ErrorKind::InvalidArgument, "Monte Carlo estimate needs at least 2 paths");
  const double eps = m_tilde.eps;
  const PicardIntegrands integrands(model, eps);
  const TildeCache tilde(m_tilde.m_tilde, model);
  const std::size_t nx = xgrid.size();
  const std::size_t np = options.n_paths;

  PicardEstimate est;
  est.exponents.assign(nx, std::vector<double>(np));
  std::vector<std::size_t> beyond(np, 0);
  // Path-major sweep: path j's increments are generated once and reused at
  // every grid point (common random numbers).
  parallel_for(np, options.threads, [&](std::size_t j) {
    std::vector<double> dW(tilde.steps());
    fill_increments(options.seed, streams::kPathBase + j, tilde.ds, 0, dW);
    for (std::size_t i = 0; i < nx; ++i) {
      const auto sums = run_z_path(xgrid[i], tilde, model, eps, dW, j);
      if (sums.max_abs > options.diagnostic_radius) ++beyond[j];
      est.exponents[i][j] =
          integrands.I_eps(sums.terminal, 0.0) + sums.int_g1 + sums.int_g2 / eps + options.exponent_shift;
    }
  });
  for (std::size_t c : beyond) est.paths_beyond_radius += c;

  const double m0 = m_tilde.m_tilde.values.front();
  std::vector<double> log_rho(nx);
  std::vector<double> se(nx, std::numeric_limits<double>::infinity());
  std::vector<double> ess(nx, 0.0);
  bool low_ess = false;
  for (std::size_t i = 0; i < nx; ++i) {
    const auto& e = est.exponents[i];
    double e_max = kNegInf;
    for (double v : e) e_max = std::max(e_max, v);
    if (!std::isfinite(e_max)) {
      log_rho[i] = kNegInf;
      low_ess = true;
      continue;
    }
    double sum = 0.0;
    double sum_sq = 0.0;
    for (double v : e) {
      const double w = std::exp(v - e_max);
      sum += w;
      sum_sq += w * w;
    }
    const double n = static_cast<double>(np);
    const double mean = sum / n;
    log_rho[i] = e_max + std::log(mean) - integrands.F(xgrid[i], m0) / eps;
    ess[i] = sum * sum / sum_sq;
    const double var = std::max(0.0, (sum_sq / n - mean * mean) * n / (n - 1.0));
    se[i] = std::sqrt(var / n) / mean;
    if (ess[i] < options.ess_warning) low_ess = true;
  }

  est.density = make_density(xgrid, std::move(log_rho), eps, DensityMethod::PicardMc);
  est.density.se_log = std::move(se);
  est.density.ess = std::move(ess);
  est.density.n_paths = np;
  if (low_ess) est.density.flags.push_back("low-ess");
  if (est.paths_beyond_radius > 0) {
    est.density.flags.push_back("beyond-diagnostic-radius:" + std::to_string(est.paths_beyond_radius));
  }
  return est;
}

double choose_ds(const FilterTrajectory& filter, const ReducedModel& model, double ds, std::uint64_t seed,
                 std::size_t pilot_paths, double rel_tol, int max_halvings) {
  const double eps = filter.eps;
  for (int halving = 0; halving < max_halvings; ++halving) {
    const auto coarse_grid = TimeGrid::with_max_step(0.0, 1.0 / eps, ds);
    const auto fine_grid = TimeGrid::make(0.0, 1.0 / eps, 2 * coarse_grid.n_steps);
    const TildeCache coarse(rescale_on_grid(filter, coarse_grid), model);
    const TildeCache fine(rescale_on_grid(filter, fine_grid), model);
    const double x = filter.M.values.back();
    double mean_c = 0.0;
    double mean_f = 0.0;
    std::vector<double> dW_f(fine.steps());
    std::vector<double> dW_c(coarse.steps());
    for (std::size_t j = 0; j < pilot_paths; ++j) {
      fill_increments(seed, streams::kPathBase + j, fine.ds, 0, dW_f);
      for (std::size_t k = 0; k < dW_c.size(); ++k) dW_c[k] = dW_f[2 * k] + dW_f[2 * k + 1];
      mean_f += run_z_path(x, fine, model, eps, dW_f, j).int_g2;
      mean_c += run_z_path(x, coarse, model, eps, dW_c, j).int_g2;
    }
    mean_c /= static_cast<double>(pilot_paths);
    mean_f /= static_cast<double>(pilot_paths);
    const double scale = std::max(std::abs(mean_c), std::abs(mean_f));
    if (std::abs(mean_f - mean_c) <= rel_tol * scale || scale < 1e-12) return coarse_grid.dt();
    ds = coarse_grid.dt() / 2.0;
  }
  return ds;
}

DensityEstimate gaussian_density(const GaussianPosterior& posterior, const UniformGrid& xgrid, double eps) {
  std::vector<double> log_rho(xgrid.size());
  const double norm = -0.5 * std::log(2.0 * std::numbers::pi * posterior.variance);
  for (std::size_t i = 0; i < xgrid.size(); ++i) {
    const double d = xgrid[i] - posterior.mean;
    log_rho[i] = norm - 0.5 * d * d / posterior.variance;
  }
  return make_density(xgrid, std::move(log_rho), eps, DensityMethod::Kalman);
}

DensityEstimate density_oracle(const ReducedModel& model, double eps, const SamplePath& Y,
                               const UniformGrid& xgrid) {
  if (model.linear && model.gaussian_prior) {
    const GaussianPosterior prior{model.gaussian_prior->mean, model.gaussian_prior->variance, 0.0};
    const auto post = kalman_bucy(Y, model.linear->a, model.linear->c, eps, prior);
    return gaussian_density(post, xgrid, eps);
  }
  return grid_bayes_filter(Y, model, eps, xgrid, Y.grid.dt());
}

}  // namespace qldp
