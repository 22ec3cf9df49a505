#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qldp/grid.hpp"

namespace qldp {

using ScalarFn = std::function<double(double)>;

/// Coefficients of the signal/observation pair before the unit-diffusion
/// change of variables.
struct OriginalModel {
  ScalarFn beta;
  ScalarFn sigma;
  ScalarFn gamma;
  ScalarFn q0;
  ScalarFn sigma_deriv;
  ScalarFn sigma_deriv2;
  ScalarFn beta_deriv;
  ScalarFn gamma_deriv;
  double sigma0 = 0.0;
  double gamma0 = 0.0;
  Interval support{-8.0, 8.0};
};

/// b(x) = -a x, h(x) = c x. Models declaring this get the exact Kalman-Bucy
/// oracle and closed-form integrals.
struct LinearCoefficients {
  double a = 0.0;
  double c = 1.0;
};

struct GaussianPrior {
  double mean = 0.0;
  double variance = 1.0;
};

/// Unit-diffusion filtering model: dX = b(X) dt + dB, dY = h(X) dt + eps dV.
struct ReducedModel {
  std::string name;
  ScalarFn b;
  ScalarFn b_deriv;
  ScalarFn h;
  ScalarFn h_deriv;
  ScalarFn h_deriv2;
  ScalarFn log_p0;
  double h0 = 0.0;
  Interval probe_window{-5.0, 5.0};
  Interval support{-10.0, 10.0};

  /// Closed form of H(z) = int_0^z h(y) dy, when the author supplies one.
  std::optional<ScalarFn> h_antiderivative;
  std::optional<LinearCoefficients> linear;
  std::optional<GaussianPrior> gaussian_prior;
};

struct ModelParams {
  double c = 1.0;
  double alpha = 0.5;
  double prior_mean = 0.0;
  double prior_var = 1.0;
};

/// Built-in models: "linear-ou", "linear-pure", "tanh-nonlinear".
ReducedModel builtin_model(const std::string& name, const ModelParams& params = {});
std::vector<std::string> builtin_model_names();

/// Change of variables X = G(Xi), G(x) = int_0^x 1/sigma, giving unit
/// diffusion. G is tabulated once and inverted by bisection to quad_tol.
ReducedModel reduce_model(const OriginalModel& orig, Interval window, double quad_tol = 1e-10);

/// Forward and inverse coordinate maps used by reduce_model, exposed for
/// oracle tests.
class CoordinateMap {
 public:
  CoordinateMap(ScalarFn sigma, Interval window, double tol);

  double forward(double xi) const;
  double inverse(double x) const;

 private:
  double integrate_inv_sigma(double a, double b) const;

  ScalarFn sigma_;
  double tol_;
  std::vector<double> nodes_;
  std::vector<double> values_;
};

struct AssumptionCheck {
  std::string id;
  std::string description;
  bool pass = false;
  double worst_x = 0.0;
  double worst_value = 0.0;
};

struct AssumptionReport {
  std::vector<AssumptionCheck> checks;
  std::map<std::string, double> lipschitz;
  double h0_estimate = 0.0;

  bool all_pass() const;
  const AssumptionCheck* find(const std::string& id) const;
};

struct AssumptionOptions {
  double edge_h2_threshold = 1e-2;
  double derivative_fd_step = 1e-5;
  double derivative_fd_tol = 1e-5;
  double normalization_tol = 1e-6;
};

AssumptionReport check_assumptions(const ReducedModel& model, const std::vector<double>& probe_grid,
                                   const AssumptionOptions& options = {});

/// Default probe grid: 401 points over the model's probe window.
std::vector<double> default_probe_grid(const ReducedModel& model, std::size_t n = 401);

/// H(z) = int_0^z h(y) dy; closed form when declared, adaptive quadrature otherwise.
double h_integral(const ReducedModel& model, double z);

}  // namespace qldp
