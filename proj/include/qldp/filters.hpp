#pragma once

#include <cstdint>
#include <vector>

#include "qldp/density.hpp"
#include "qldp/models.hpp"
#include "qldp/sde.hpp"

namespace qldp {

struct FilterTrajectory {
  SamplePath M;
  double eps = 0.0;
};

/// m~(s) = M(1 - eps s) on s in [0, 1/eps].
struct RescaledFilterPath {
  SamplePath m_tilde;
  double eps = 0.0;

  double ds() const { return m_tilde.grid.dt(); }
};

struct GaussianPosterior {
  double mean = 0.0;
  double variance = 1.0;
  double time = 0.0;
};

/// Explicit Euler on dM = b(M) dt + (dY - h(M) dt) / eps. Requires dt <= 0.1 eps^2.
FilterTrajectory run_approximate_filter(const SamplePath& Y, const ReducedModel& model, double eps,
                                        double m0 = 0.0);

/// Samples m~ on a uniform s-grid over [0, 1/eps] with step at most ds.
RescaledFilterPath reverse_and_rescale(const FilterTrajectory& filter, double ds);

/// Linear interpolation of a path at time t (clamped to the grid).
double interpolate(const SamplePath& path, double t);

/// Kalman-Bucy filter for b(x) = -a x, h(x) = c x, integrated by Euler on Y's grid.
GaussianPosterior kalman_bucy(const SamplePath& Y, double a, double c, double eps,
                              const GaussianPosterior& prior);

/// Euler transition kernel N(x + b(x) dt, dt) restricted to a grid, truncated
/// at six standard deviations. Row i holds the mass moved from node i.
class GridTransition {
 public:
  GridTransition(const ReducedModel& model, const UniformGrid& xgrid, double dt);

  /// Applies one prediction step to a vector of node masses.
  std::vector<double> predict(const std::vector<double>& mass) const;

 private:
  struct Row {
    std::ptrdiff_t first = 0;
    std::vector<double> weights;
  };
  std::size_t n_ = 0;
  std::vector<Row> rows_;
};

/// Discretized Bayes filter (prediction by the Euler kernel, correction by the
/// Gaussian increment likelihood) returning the t = 1 density.
DensityEstimate grid_bayes_filter(const SamplePath& Y, const ReducedModel& model, double eps,
                                  const UniformGrid& xgrid, double dt_obs);

struct FilterConvergenceEntry {
  double eps = 0.0;
  double T_eps = 0.0;
  std::vector<double> sup_dev;  // one per seed
  double median_sup_dev = 0.0;
  double fitted_C = 0.0;        // max over seeds of sup_dev * sqrt(T_eps)
};

struct FilterConvergenceStats {
  std::vector<FilterConvergenceEntry> entries;
  std::vector<std::uint64_t> seeds;
  double fitted_C = 0.0;  // max over all entries
};

/// For each eps and seed: simulate, filter, rescale, record
/// sup_{s <= log(1/eps)} |m~_s - X_1|.
FilterConvergenceStats check_filter_convergence(const ReducedModel& model, const std::vector<double>& eps_list,
                                                const std::vector<std::uint64_t>& seeds, double dt,
                                                double ds = 1e-2);

double median(std::vector<double> values);

}  // namespace qldp
