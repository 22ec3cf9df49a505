#include "qldp/rate.hpp"

#include <cmath>
#include <ostream>

#include "qldp/error.hpp"
#include "qldp/io.hpp"
#include "qldp/picard.hpp"
#include "qldp/quadrature.hpp"

namespace qldp {

double rate_J(double x, double X1, const ReducedModel& model) {
  if (x == X1) return 0.0;
  const double h1 = model.h(X1);
  if (model.h_antiderivative) {
    const auto& H = *model.h_antiderivative;
    return H(x) - H(X1) - h1 * (x - X1);
  }
  return integrate([&](double y) { return model.h(y) - h1; }, X1, x, 1e-10);
}

RateTable make_rate_table(const std::vector<double>& xgrid, double X1, const ReducedModel& model) {
  RateTable t{X1, xgrid, {}};
  t.J_values.reserve(xgrid.size());
  for (double x : xgrid) t.J_values.push_back(rate_J(x, X1, model));
  return t;
}

void ActionProblem::validate() const {
  if (model == nullptr) throw Error(ErrorKind::InvalidArgument, "action problem has no model");
  if (!(T > 0.0)) throw Error(ErrorKind::InvalidArgument, "action horizon must be positive");
  if (n_nodes < 2) throw Error(ErrorKind::InvalidArgument, "action problem needs n_nodes >= 2");
}

double endpoint_term(const ActionProblem& p) {
  const auto& h = p.model->h;
  return p.X1 * (h(p.z) - h(p.x)) - h(p.X1) * (p.z - p.x);
}

namespace {

/// Cost sum_k ds/2 r_k^2 with r_k = v_k - h(X1) + h(mid_k) the residual at
/// the midpoint of segment k. Optionally the full gradient and the
/// tridiagonal Hessian over all nodes.
struct CostDerivatives {
  double cost = 0.0;
  std::vector<double> grad;
  std::vector<double> diag;
  std::vector<double> off;  // off[k] couples nodes k and k+1
};

CostDerivatives cost_derivatives(const std::vector<double>& phi, const ActionProblem& p, bool want_grad,
                                 bool want_hessian) {
  const auto& md = *p.model;
  const std::size_t n = phi.size() - 1;
  const double ds = p.T / static_cast<double>(n);
  const double inv = 1.0 / ds;
  const double h1 = md.h(p.X1);
  CostDerivatives out;
  if (want_grad) out.grad.assign(n + 1, 0.0);
  if (want_hessian) {
    out.diag.assign(n + 1, 0.0);
    out.off.assign(n, 0.0);
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double mid = 0.5 * (phi[k] + phi[k + 1]);
    const double v = (phi[k + 1] - phi[k]) * inv;
    const double r = v - h1 + md.h(mid);
    out.cost += 0.5 * ds * r * r;
    if (!want_grad && !want_hessian) continue;
    const double hd = 0.5 * md.h_deriv(mid);
    const double dr0 = hd - inv;
    const double dr1 = hd + inv;
    if (want_grad) {
      out.grad[k] += ds * r * dr0;
      out.grad[k + 1] += ds * r * dr1;
    }
    if (want_hessian) {
      const double curv = 0.25 * r * md.h_deriv2(mid);
      out.diag[k] += ds * (dr0 * dr0 + curv);
      out.diag[k + 1] += ds * (dr1 * dr1 + curv);
      out.off[k] += ds * (dr0 * dr1 + curv);
    }
  }
  return out;
}

/// Solves (tridiag(off, diag + shift, off)) x = rhs; returns false if the
/// matrix is not positive definite.
bool solve_tridiagonal_spd(const std::vector<double>& diag, const std::vector<double>& off, double shift,
                           const std::vector<double>& rhs, std::vector<double>& x) {
  const std::size_t n = diag.size();
  std::vector<double> d(n), l(n, 0.0), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = diag[i] + shift;
    if (i > 0) {
      l[i] = off[i - 1] / d[i - 1];
      d[i] -= l[i] * off[i - 1];
    }
    if (!(d[i] > 0.0)) return false;
  }
  for (std::size_t i = 0; i < n; ++i) y[i] = rhs[i] - (i > 0 ? l[i] * y[i - 1] : 0.0);
  x.assign(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    x[i] = y[i] / d[i] - (i + 1 < n ? l[i + 1] * x[i + 1] : 0.0);
  }
  return true;
}

double interior_norm(const std::vector<double>& g) {
  double s = 0.0;
  for (std::size_t k = 1; k + 1 < g.size(); ++k) s += g[k] * g[k];
  return std::sqrt(s);
}

}  // namespace

double control_cost(const std::vector<double>& path, const ActionProblem& problem, std::vector<double>* gradient) {
  problem.validate();
  if (path.size() != problem.n_nodes + 1) throw Error(ErrorKind::InvalidArgument, "path length must be n_nodes + 1");
  auto d = cost_derivatives(path, problem, gradient != nullptr, false);
  if (gradient) *gradient = std::move(d.grad);
  return d.cost;
}

ActionEvaluation action_of_path(const std::vector<double>& path, const ActionProblem& problem) {
  problem.validate();
  if (path.size() != problem.n_nodes + 1) throw Error(ErrorKind::InvalidArgument, "path length must be n_nodes + 1");
  if (std::abs(path.front() - problem.x) > 1e-12 * (1.0 + std::abs(problem.x)) ||
      std::abs(path.back() - problem.z) > 1e-12 * (1.0 + std::abs(problem.z))) {
    throw Error(ErrorKind::InvalidArgument, "path endpoints do not match the problem");
  }
  const auto& md = *problem.model;
  const PicardIntegrands integrands(md, 1.0);
  const std::size_t n = problem.n_nodes;
  const double ds = problem.T / static_cast<double>(n);
  const double X1 = problem.X1;

  ActionEvaluation ev;
  ev.control_cost = control_cost(path, problem);
  ev.I_value = endpoint_term(problem) - ev.control_cost;

  double g2_form = 0.0;
  double tol_extra = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double v = (path[k + 1] - path[k]) / ds;
    const double mid = 0.5 * (path[k] + path[k + 1]);
    const double r = v + md.h(mid) - X1 * md.h_deriv(mid);
    g2_form += ds * (integrands.g2(mid, X1) - 0.5 * r * r);
    // The two forms differ by X1 times (midpoint rule for h'(phi) dphi minus the exact increment of h).
    tol_extra += std::abs(X1) * std::abs(path[k + 1] - path[k]) *
                 std::abs(md.h_deriv(path[k + 1]) - md.h_deriv(path[k]));
  }
  ev.g2_form = g2_form;
  const double tol = 1e-6 * (1.0 + std::abs(ev.I_value)) + tol_extra;
  if (!(std::abs(ev.g2_form - ev.I_value) <= tol)) {
    throw Error(ErrorKind::InternalConsistency, "action forms disagree: " + std::to_string(ev.I_value) + " vs " +
                                                    std::to_string(ev.g2_form));
  }
  return ev;
}

double flow_endpoint(double x, double T, double X1, const ReducedModel& model) {
  const double h1 = model.h(X1);
  auto f = [&](double phi) { return h1 - model.h(phi); };
  constexpr int kSteps = 10000;
  const double dt = T / kSteps;
  double phi = x;
  for (int i = 0; i < kSteps; ++i) {
    const double k1 = f(phi);
    const double k2 = f(phi + 0.5 * dt * k1);
    const double k3 = f(phi + 0.5 * dt * k2);
    const double k4 = f(phi + dt * k3);
    phi += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return phi;
}

std::vector<double> flow_path(double x, double T, double X1, const ReducedModel& model, std::size_t n_nodes) {
  const double h1 = model.h(X1);
  auto f = [&](double phi) { return h1 - model.h(phi); };
  const std::size_t sub = (10000 + n_nodes - 1) / n_nodes;
  const double dt = T / static_cast<double>(n_nodes * sub);
  std::vector<double> path(n_nodes + 1);
  double phi = x;
  path[0] = phi;
  for (std::size_t k = 0; k < n_nodes; ++k) {
    for (std::size_t i = 0; i < sub; ++i) {
      const double k1 = f(phi);
      const double k2 = f(phi + 0.5 * dt * k1);
      const double k3 = f(phi + 0.5 * dt * k2);
      const double k4 = f(phi + dt * k3);
      phi += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    path[k + 1] = phi;
  }
  return path;
}

ActionResult solve_I_T(const ActionProblem& problem, const SolverOptions& options) {
  problem.validate();
  const std::size_t n = problem.n_nodes;
  const double endpoint = endpoint_term(problem);

  ActionResult res;
  auto flow = flow_path(problem.x, problem.T, problem.X1, *problem.model, n);
  if (std::abs(flow.back() - problem.z) <= 1e-10 * (1.0 + std::abs(problem.z))) {
    res.path = std::move(flow);
  } else {
    res.path.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
      res.path[k] = problem.x + (problem.z - problem.x) * static_cast<double>(k) / static_cast<double>(n);
    }
  }
  res.path.front() = problem.x;
  res.path.back() = problem.z;

  // Damped Newton ascent on the interior nodes. The objective's Hessian is
  // tridiagonal, so each step is an O(n) solve; the shift grows whenever the
  // Hessian is indefinite or the backtracking line search stalls.
  double shift = 0.0;
  auto d = cost_derivatives(res.path, problem, true, true);
  const std::size_t m = n - 1;
  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    res.grad_norm = interior_norm(d.grad);
    const double I = endpoint - d.cost;
    if (m == 0 || res.grad_norm <= options.grad_tol * (1.0 + std::abs(I))) {
      res.converged = true;
      break;
    }
    std::vector<double> diag(d.diag.begin() + 1, d.diag.end() - 1);
    std::vector<double> off(d.off.begin() + 1, d.off.end() - 1);
    std::vector<double> rhs(m);
    for (std::size_t k = 0; k < m; ++k) rhs[k] = -d.grad[k + 1];
    double scale = 0.0;
    for (double v : diag) scale = std::max(scale, std::abs(v));
    std::vector<double> step;
    bool accepted = false;
    for (int attempt = 0; attempt < 40 && !accepted; ++attempt) {
      if (!solve_tridiagonal_spd(diag, off, shift * scale, rhs, step)) {
        shift = std::max(1e-8, shift * 10.0);
        continue;
      }
      double slope = 0.0;
      for (std::size_t k = 0; k < m; ++k) slope += step[k] * d.grad[k + 1];
      double t = 1.0;
      for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
        std::vector<double> trial = res.path;
        for (std::size_t k = 0; k < m; ++k) trial[k + 1] += t * step[k];
        const double c = cost_derivatives(trial, problem, false, false).cost;
        if (c <= d.cost + 1e-4 * t * slope) {
          res.path = std::move(trial);
          accepted = true;
          break;
        }
      }
      if (!accepted) shift = std::max(1e-8, shift * 10.0);
    }
    if (!accepted) break;
    shift *= 0.1;
    if (shift < 1e-12) shift = 0.0;
    d = cost_derivatives(res.path, problem, true, true);
  }
  res.control_cost = d.cost;
  res.I_value = endpoint - d.cost;
  res.grad_norm = interior_norm(d.grad);
  return res;
}

std::vector<VLimitRow> v_limit_check(const std::vector<double>& xgrid, double X1, const std::vector<double>& T_list,
                                     const ReducedModel& model, std::size_t n_nodes) {
  for (std::size_t i = 1; i < T_list.size(); ++i) {
    if (!(T_list[i] > T_list[i - 1])) throw Error(ErrorKind::InvalidArgument, "T list must be increasing");
  }
  std::vector<VLimitRow> rows;
  for (double x : xgrid) {
    const double limit = -X1 * model.h(x) + model.h(X1) * x;
    for (double T : T_list) {
      const auto r = solve_I_T(ActionProblem{x, X1, T, X1, n_nodes, &model});
      rows.push_back({x, T, r.I_value, limit, std::abs(r.I_value - limit), r.converged});
    }
  }
  return rows;
}

DecompositionResult corollary_decomposition_check(double x, double z, double T, double X1,
                                                  const ReducedModel& model, std::size_t n_nodes) {
  const auto full = solve_I_T(ActionProblem{x, z, T, X1, n_nodes, &model});
  const auto half = solve_I_T(ActionProblem{X1, z, T / 2.0, X1, std::max<std::size_t>(n_nodes / 2, 2), &model});
  DecompositionResult out;
  out.I_T = full.I_value;
  out.I_half = half.I_value;
  out.residual = std::abs(full.I_value - (model.h(X1) * x - model.h(x) * X1 + half.I_value));
  out.converged = full.converged && half.converged;
  return out;
}

void write_rate_csv(std::ostream& os, const RateTable& table) {
  os << "x,J_value\n";
  for (std::size_t i = 0; i < table.xgrid.size(); ++i) {
    os << format_double(table.xgrid[i]) << ',' << format_double(table.J_values[i]) << '\n';
  }
}

}  // namespace qldp
