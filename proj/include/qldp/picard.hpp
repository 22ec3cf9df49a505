#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "qldp/density.hpp"
#include "qldp/filters.hpp"
#include "qldp/models.hpp"

namespace qldp {

/// Closed-form pieces of the path-integral representation of the
/// unnormalized filtering density.
class PicardIntegrands {
 public:
  /// With use_closed_form = false, int_0^z h is always done by quadrature.
  PicardIntegrands(const ReducedModel& model, double eps, bool use_closed_form = true);

  /// int_0^z (h(y) - h(m)) dy
  double centered_integral(double z, double m) const;

  double F(double z, double m) const;
  /// Returns -infinity where p_0(z) = 0.
  double I_eps(double z, double m) const;
  double g1(double z, double m) const;
  double g2(double z, double m) const;

  const ReducedModel& model() const { return *model_; }
  double eps() const { return eps_; }

 private:
  const ReducedModel* model_;
  double eps_;
  bool closed_form_;
};

struct ZPathBundle {
  double x0 = 0.0;
  double eps = 0.0;
  double ds = 0.0;
  double horizon = 0.0;
  std::size_t n_paths = 0;
  std::vector<double> terminal;
  std::vector<double> int_g1;
  std::vector<double> int_g2;
  std::vector<double> max_abs;
};

/// Euler-Maruyama for
///   dZ = [-h(Z) + m~_s h'(Z) - eps b(Z)] ds + sqrt(eps) dW~,  Z_0 = x,
/// over the m~ grid. Path j draws W~ from stream 2 + j of `seed`.
ZPathBundle simulate_Z(double x, const RescaledFilterPath& m_tilde, std::size_t n_paths, std::uint64_t seed,
                       const ReducedModel& model, unsigned threads = 1);

struct PicardOptions {
  std::size_t n_paths = 20000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  double ess_warning = 10.0;
  /// Paths whose max |Z~| exceeds this are counted in the metadata flags.
  double diagnostic_radius = 1e3;
  /// Added to every per-path exponent; exists to test that the normalized
  /// result does not depend on it.
  double exponent_shift = 0.0;
};

/// Per-path exponent matrix (row per grid point) and the resulting estimate.
struct PicardEstimate {
  DensityEstimate density;
  std::vector<std::vector<double>> exponents;
  std::size_t paths_beyond_radius = 0;
};

/// Monte Carlo estimate of log rho on xgrid with common random numbers across
/// grid points, normalized to log q in log domain.
PicardEstimate log_rho_estimate(const UniformGrid& xgrid, const RescaledFilterPath& m_tilde,
                                const ReducedModel& model, const PicardOptions& options);

/// Pilot refinement of the Z~ step: halves ds while the mean int g2 over
/// pilot paths started at m~_0 moves by more than rel_tol per halving.
double choose_ds(const FilterTrajectory& filter, const ReducedModel& model, double ds, std::uint64_t seed,
                 std::size_t pilot_paths = 64, double rel_tol = 0.01, int max_halvings = 4);

/// Reference density: Kalman-Bucy for declared-linear models with a Gaussian
/// prior, grid Bayes otherwise (on xgrid, with dt_obs = Y's step).
DensityEstimate density_oracle(const ReducedModel& model, double eps, const SamplePath& Y,
                               const UniformGrid& xgrid);

/// Gaussian log density evaluated on a grid and normalized there.
DensityEstimate gaussian_density(const GaussianPosterior& posterior, const UniformGrid& xgrid, double eps);

}  // namespace qldp
