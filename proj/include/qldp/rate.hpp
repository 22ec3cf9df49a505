#pragma once

#include <iosfwd>
#include <vector>

#include "qldp/grid.hpp"
#include "qldp/models.hpp"

namespace qldp {

/// J(x, X1) = int_{X1}^x (h(y) - h(X1)) dy.
double rate_J(double x, double X1, const ReducedModel& model);

struct RateTable {
  double X1 = 0.0;
  std::vector<double> xgrid;
  std::vector<double> J_values;
};

RateTable make_rate_table(const std::vector<double>& xgrid, double X1, const ReducedModel& model);

/// Finite-horizon action problem in the rescaled clock: paths from x to z
/// over [0, T], discretized with n_nodes segments.
struct ActionProblem {
  double x = 0.0;
  double z = 0.0;
  double T = 1.0;
  double X1 = 0.0;
  std::size_t n_nodes = 256;
  const ReducedModel* model = nullptr;

  void validate() const;
};

struct ActionEvaluation {
  double I_value = 0.0;
  double control_cost = 0.0;
  /// Value from the g2 form of the action; equals I_value up to discretization.
  double g2_form = 0.0;
};

struct ActionResult {
  std::vector<double> path;
  double I_value = 0.0;
  double control_cost = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// X1 (h(z) - h(x)) - h(X1) (z - x).
double endpoint_term(const ActionProblem& problem);

/// Evaluates both forms of the action on a piecewise-linear path (midpoint rule
/// integrals). Throws InternalConsistency when they disagree beyond the
/// discretization tolerance.
ActionEvaluation action_of_path(const std::vector<double>& path, const ActionProblem& problem);

/// Midpoint-rule control cost of a path and its gradient with respect to every node.
double control_cost(const std::vector<double>& path, const ActionProblem& problem,
                    std::vector<double>* gradient = nullptr);

struct SolverOptions {
  int max_iterations = 10000;
  double grad_tol = 1e-8;
};

/// Maximizes the discretized action over interior nodes.
ActionResult solve_I_T(const ActionProblem& problem, const SolverOptions& options = {});

/// RK4 integration of phi' = h(X1) - h(phi) from x, step T / 1e4.
double flow_endpoint(double x, double T, double X1, const ReducedModel& model);

/// Zero-cost flow sampled at n_nodes + 1 equally spaced nodes.
std::vector<double> flow_path(double x, double T, double X1, const ReducedModel& model, std::size_t n_nodes);

struct VLimitRow {
  double x = 0.0;
  double T = 0.0;
  double V_T = 0.0;
  double limit = 0.0;
  double abs_err = 0.0;
  bool converged = false;
};

/// V_T(x) = I_T(x, X1) against its large-T limit -X1 h(x) + h(X1) x.
std::vector<VLimitRow> v_limit_check(const std::vector<double>& xgrid, double X1, const std::vector<double>& T_list,
                                     const ReducedModel& model, std::size_t n_nodes = 256);

struct DecompositionResult {
  double residual = 0.0;
  double I_T = 0.0;
  double I_half = 0.0;
  bool converged = false;
};

/// |I_T(x, z) - [h(X1) x - h(x) X1 + I_{T/2}(X1, z)]|. The half-horizon
/// problem uses n_nodes / 2 so both share the same step.
DecompositionResult corollary_decomposition_check(double x, double z, double T, double X1,
                                                  const ReducedModel& model, std::size_t n_nodes = 256);

void write_rate_csv(std::ostream& os, const RateTable& table);

}  // namespace qldp
