#include "qldp/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "qldp/error.hpp"
#include "qldp/quadrature.hpp"

namespace qldp {

namespace {

double log_cosh(double x) {
  const double a = std::abs(x);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

double sech2(double x) {
  const double c = std::cosh(x);
  return std::isfinite(c) ? 1.0 / (c * c) : 0.0;
}

void attach_gaussian_prior(ReducedModel& m, const ModelParams& p) {
  if (!(p.prior_var > 0.0)) {
    throw Error(ErrorKind::InvalidModel, "prior variance must be positive");
  }
  const double mean = p.prior_mean;
  const double var = p.prior_var;
  m.gaussian_prior = GaussianPrior{mean, var};
  m.log_p0 = [mean, var](double x) {
    const double d = x - mean;
    return -0.5 * d * d / var - 0.5 * std::log(2.0 * std::numbers::pi * var);
  };
  const double sd = std::sqrt(var);
  m.support = Interval{std::min(-10.0, mean - 12.0 * sd), std::max(10.0, mean + 12.0 * sd)};
}

}  // namespace

std::vector<std::string> builtin_model_names() { return {"linear-ou", "linear-pure", "tanh-nonlinear"}; }

ReducedModel builtin_model(const std::string& name, const ModelParams& params) {
  ReducedModel m;
  m.name = name;
  if (name == "linear-ou" || name == "linear-pure") {
    const double c = params.c;
    if (!(c > 0.0)) throw Error(ErrorKind::InvalidModel, "linear model needs c > 0");
    const double a = (name == "linear-ou") ? 1.0 : 0.0;
    m.b = [a](double x) { return -a * x; };
    m.b_deriv = [a](double) { return -a; };
    m.h = [c](double x) { return c * x; };
    m.h_deriv = [c](double) { return c; };
    m.h_deriv2 = [](double) { return 0.0; };
    m.h_antiderivative = [c](double z) { return 0.5 * c * z * z; };
    m.h0 = c;
    m.linear = LinearCoefficients{a, c};
  } else if (name == "tanh-nonlinear") {
    const double alpha = params.alpha;
    if (!(alpha > 0.0 && alpha <= 1.0)) {
      throw Error(ErrorKind::InvalidModel, "tanh-nonlinear needs alpha in (0, 1]");
    }
    m.b = [](double x) { return -x; };
    m.b_deriv = [](double) { return -1.0; };
    m.h = [alpha](double x) { return x + alpha * std::tanh(x); };
    m.h_deriv = [alpha](double x) { return 1.0 + alpha * sech2(x); };
    m.h_deriv2 = [alpha](double x) { return -2.0 * alpha * sech2(x) * std::tanh(x); };
    m.h_antiderivative = [alpha](double z) { return 0.5 * z * z + alpha * log_cosh(z); };
    m.h0 = 1.0;
  } else {
    throw Error(ErrorKind::InvalidArgument, "unknown model '" + name + "'");
  }
  attach_gaussian_prior(m, params);
  return m;
}

double h_integral(const ReducedModel& model, double z) {
  if (model.h_antiderivative) return (*model.h_antiderivative)(z);
  return integrate(model.h, 0.0, z, 1e-10);
}

// ---------------------------------------------------------------------------
// Coordinate map

CoordinateMap::CoordinateMap(ScalarFn sigma, Interval window, double tol) : sigma_(std::move(sigma)), tol_(tol) {
  if (!(window.hi > window.lo)) throw Error(ErrorKind::InvalidArgument, "coordinate window is empty");
  constexpr std::size_t kNodes = 257;
  nodes_.resize(kNodes);
  values_.resize(kNodes);
  const double step = window.width() / static_cast<double>(kNodes - 1);
  for (std::size_t i = 0; i < kNodes; ++i) {
    nodes_[i] = (i + 1 == kNodes) ? window.hi : window.lo + static_cast<double>(i) * step;
  }
  // Probe sigma on a finer grid than the table before trusting monotonicity.
  for (std::size_t i = 0; i <= 4 * (kNodes - 1); ++i) {
    const double xi = window.lo + window.width() * static_cast<double>(i) / static_cast<double>(4 * (kNodes - 1));
    const double s = sigma_(xi);
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw Error(ErrorKind::InvalidModel, "coordinate map is not monotone: sigma(" + std::to_string(xi) +
                                               ") = " + std::to_string(s));
    }
  }
  // G(0) = 0 anchors the table.
  const double g_lo = integrate_inv_sigma(0.0, nodes_[0]);
  values_[0] = g_lo;
  for (std::size_t i = 1; i < kNodes; ++i) {
    values_[i] = values_[i - 1] + integrate_inv_sigma(nodes_[i - 1], nodes_[i]);
  }
}

double CoordinateMap::integrate_inv_sigma(double a, double b) const {
  if (a == b) return 0.0;
  using boost::math::quadrature::gauss_kronrod;
  auto inv = [this](double u) { return 1.0 / sigma_(u); };
  if (std::abs(b - a) <= 0.1) {
    double err = 0.0;
    const unsigned depth = std::abs(b - a) <= 1e-3 ? 0 : 6;
    return gauss_kronrod<double, 15>::integrate(inv, a, b, depth, 1e-12, &err);
  }
  return integrate(inv, a, b, tol_ * 1e-2);
}

double CoordinateMap::forward(double xi) const {
  if (xi == 0.0) return 0.0;
  if (xi <= nodes_.front()) return values_.front() - integrate_inv_sigma(xi, nodes_.front());
  if (xi >= nodes_.back()) return values_.back() + integrate_inv_sigma(nodes_.back(), xi);
  const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), xi);
  const std::size_t i = static_cast<std::size_t>(it - nodes_.begin()) - 1;
  return values_[i] + integrate_inv_sigma(nodes_[i], xi);
}

double CoordinateMap::inverse(double x) const {
  double lo = 0.0;
  double hi = 0.0;
  double g_lo = 0.0;
  if (x < values_.front() || x > values_.back()) {
    // Walk outward from the table end with doubling steps until bracketed.
    const bool right = x > values_.back();
    double anchor = right ? nodes_.back() : nodes_.front();
    double g_anchor = right ? values_.back() : values_.front();
    double width = nodes_.back() - nodes_.front();
    bool bracketed = false;
    for (int k = 0; k < 64 && !bracketed; ++k) {
      const double next = right ? anchor + width : anchor - width;
      const double g_next = right ? g_anchor + integrate_inv_sigma(anchor, next)
                                  : g_anchor - integrate_inv_sigma(next, anchor);
      if ((right && g_next >= x) || (!right && g_next <= x)) {
        lo = right ? anchor : next;
        hi = right ? next : anchor;
        g_lo = right ? g_anchor : g_next;
        bracketed = true;
      } else {
        anchor = next;
        g_anchor = g_next;
        width *= 2.0;
      }
    }
    if (!bracketed) throw Error(ErrorKind::Tolerance, "coordinate inverse could not bracket " + std::to_string(x));
  } else {
    auto it = std::upper_bound(values_.begin(), values_.end(), x);
    std::size_t i = static_cast<std::size_t>(it - values_.begin());
    i = std::clamp<std::size_t>(i, 1, values_.size() - 1) - 1;
    lo = nodes_[i];
    hi = nodes_[i + 1];
    g_lo = values_[i];
  }
  // Safeguarded Newton on G(xi) - x with G' = 1/sigma; G is accumulated from the left bracket.
  double g_left = g_lo;
  double g_right = g_lo + integrate_inv_sigma(lo, hi);
  double xi = lo + (hi - lo) * std::clamp((x - g_left) / (g_right - g_left), 0.0, 1.0);
  double g_xi = g_left + integrate_inv_sigma(lo, xi);
  for (int iter = 0; iter < 100; ++iter) {
    const double f = g_xi - x;
    if (std::abs(f) <= 1e-2 * tol_) break;
    if (f < 0.0) {
      lo = xi;
      g_left = g_xi;
    } else {
      hi = xi;
      g_right = g_xi;
    }
    const double step = f * sigma_(xi);
    if (std::abs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(xi))) break;
    double next = xi - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next <= lo || next >= hi) break;
    g_xi = g_left + integrate_inv_sigma(lo, next);
    xi = next;
  }
  if (std::abs(g_left - x) < std::abs(g_xi - x)) {
    xi = lo;
    g_xi = g_left;
  }
  if (std::abs(g_right - x) < std::abs(g_xi - x)) {
    xi = hi;
    g_xi = g_right;
  }
  const double residual = std::abs(g_xi - x);
  if (!(residual <= tol_)) {
    throw Error(ErrorKind::Tolerance, "coordinate inverse residual " + std::to_string(residual) +
                                          " exceeds tolerance at x = " + std::to_string(x));
  }
  return xi;
}

ReducedModel reduce_model(const OriginalModel& orig, Interval window, double quad_tol) {
  if (!orig.beta || !orig.sigma || !orig.gamma || !orig.q0 || !orig.sigma_deriv || !orig.sigma_deriv2 ||
      !orig.beta_deriv || !orig.gamma_deriv) {
    throw Error(ErrorKind::InvalidModel, "original model is missing a coefficient function");
  }
  if (!(orig.sigma0 > 0.0)) throw Error(ErrorKind::InvalidModel, "sigma0 must be positive");
  constexpr std::size_t kProbe = 401;
  for (std::size_t i = 0; i < kProbe; ++i) {
    const double xi = window.lo + window.width() * static_cast<double>(i) / static_cast<double>(kProbe - 1);
    const double s = orig.sigma(xi);
    if (!(s >= orig.sigma0)) {
      throw Error(ErrorKind::InvalidModel,
                  "sigma(" + std::to_string(xi) + ") = " + std::to_string(s) + " is below sigma0");
    }
  }
  auto map = std::make_shared<const CoordinateMap>(orig.sigma, window, quad_tol);
  const OriginalModel o = orig;

  ReducedModel m;
  m.name = "reduced";
  m.b = [map, o](double x) {
    const double xi = map->inverse(x);
    return o.beta(xi) / o.sigma(xi) - 0.5 * o.sigma_deriv(xi);
  };
  m.b_deriv = [map, o](double x) {
    const double xi = map->inverse(x);
    const double s = o.sigma(xi);
    return o.beta_deriv(xi) - o.beta(xi) * o.sigma_deriv(xi) / s - 0.5 * s * o.sigma_deriv2(xi);
  };
  m.h = [map, o](double x) { return o.gamma(map->inverse(x)); };
  m.h_deriv = [map, o](double x) {
    const double xi = map->inverse(x);
    return o.gamma_deriv(xi) * o.sigma(xi);
  };
  // gamma'' is not part of the original model, so h'' is a central difference of h'.
  m.h_deriv2 = [hd = m.h_deriv](double x) {
    constexpr double step = 1e-5;
    return (hd(x + step) - hd(x - step)) / (2.0 * step);
  };
  m.log_p0 = [map, o](double x) {
    const double xi = map->inverse(x);
    const double q = o.q0(xi);
    return q > 0.0 ? std::log(q) + std::log(o.sigma(xi)) : -std::numeric_limits<double>::infinity();
  };
  m.h0 = orig.gamma0 * orig.sigma0;
  m.probe_window = Interval{map->forward(window.lo), map->forward(window.hi)};
  m.support = Interval{map->forward(orig.support.lo), map->forward(orig.support.hi)};
  return m;
}

// ---------------------------------------------------------------------------
// Assumption spot checks

bool AssumptionReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const AssumptionCheck& c) { return c.pass; });
}

const AssumptionCheck* AssumptionReport::find(const std::string& id) const {
  for (const auto& c : checks) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

std::vector<double> default_probe_grid(const ReducedModel& model, std::size_t n) {
  return UniformGrid(model.probe_window.lo, model.probe_window.hi, n).points();
}

namespace {

struct LipschitzEstimate {
  double value = 0.0;
  double at = 0.0;
};

LipschitzEstimate lipschitz(const std::vector<double>& grid, const std::vector<double>& f) {
  LipschitzEstimate est;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double q = std::abs(f[i + 1] - f[i]) / (grid[i + 1] - grid[i]);
    if (!(q <= est.value)) {  // also captures NaN
      est.value = q;
      est.at = grid[i];
    }
  }
  return est;
}

std::vector<double> sample(const ScalarFn& f, const std::vector<double>& grid) {
  std::vector<double> out(grid.size());
  std::transform(grid.begin(), grid.end(), out.begin(), f);
  return out;
}

}  // namespace

AssumptionReport check_assumptions(const ReducedModel& model, const std::vector<double>& probe_grid,
                                   const AssumptionOptions& options) {
  if (probe_grid.empty() || !std::is_sorted(probe_grid.begin(), probe_grid.end())) {
    throw Error(ErrorKind::InvalidArgument, "probe grid must be non-empty and sorted");
  }
  AssumptionReport report;
  const auto& x = probe_grid;
  const auto b = sample(model.b, x);
  const auto h = sample(model.h, x);
  const auto bd = sample(model.b_deriv, x);
  const auto hd = sample(model.h_deriv, x);
  const auto hdd = sample(model.h_deriv2, x);
  const auto lp = sample(model.log_p0, x);

  auto record_lipschitz = [&](const std::string& key, const std::vector<double>& f) {
    const auto est = lipschitz(x, f);
    report.lipschitz[key] = est.value;
    return est;
  };
  auto worst_of = [](std::initializer_list<LipschitzEstimate> list) {
    LipschitzEstimate w;
    for (const auto& e : list) {
      if (!(e.value <= w.value)) w = e;
    }
    return w;
  };

  {
    const auto w = worst_of({record_lipschitz("b", b), record_lipschitz("h", h), record_lipschitz("b'", bd),
                             record_lipschitz("h'", hd)});
    report.checks.push_back({"A-1", "b, h, b', h' Lipschitz on the probe grid", std::isfinite(w.value), w.at,
                             w.value});
  }
  {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < x.size(); ++i) {
      if (!(hd[i] >= hd[arg])) arg = i;
    }
    report.h0_estimate = hd[arg];
    const bool pass = model.h0 > 0.0 && hd[arg] >= model.h0 * (1.0 - 1e-9);
    report.checks.push_back({"A-2", "h'(x) >= h0 > 0", pass, x[arg], hd[arg]});
  }
  {
    // Growth constant c in |log p0(x) - log p0(y)| <= c (1 + |x| + |y|) |x - y|.
    double c = 0.0;
    double at = x.front();
    double p_max = 0.0;
    double p_at = x.front();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double p = std::exp(lp[i]);
      if (!(p <= p_max)) {
        p_max = p;
        p_at = x[i];
      }
      if (i + 1 < x.size()) {
        const double ratio = std::abs(lp[i + 1] - lp[i]) /
                             ((1.0 + std::abs(x[i]) + std::abs(x[i + 1])) * (x[i + 1] - x[i]));
        if (!(ratio <= c)) {
          c = ratio;
          at = x[i];
        }
      }
    }
    report.lipschitz["log_p0_growth"] = c;
    report.checks.push_back({"A-3", "log p0 has linear-growth Lipschitz constant", std::isfinite(c), at, c});
    report.checks.push_back({"A-3-bounded", "p0 uniformly bounded", std::isfinite(p_max), p_at, p_max});
  }
  {
    std::vector<double> hdb(x.size()), hdh(x.size()), hb(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      hdb[i] = hd[i] * b[i];
      hdh[i] = hd[i] * h[i];
      hb[i] = h[i] * b[i];
    }
    const auto w = worst_of({record_lipschitz("h'b", hdb), record_lipschitz("h'h", hdh), record_lipschitz("h''", hdd),
                             record_lipschitz("hb", hb)});
    report.checks.push_back({"A-4", "h'b, h'h, h'', hb Lipschitz on the probe grid", std::isfinite(w.value), w.at,
                             w.value});
    const double edge_lo = std::abs(hdd.front());
    const double edge_hi = std::abs(hdd.back());
    const bool lo_worse = edge_lo >= edge_hi;
    const double edge = std::max(edge_lo, edge_hi);
    report.checks.push_back({"A-4-edge", "|h''| small at the probe window edges", edge <= options.edge_h2_threshold,
                             lo_worse ? x.front() : x.back(), edge});
  }
  {
    const double mass = integrate([&](double u) { return std::exp(model.log_p0(u)); }, model.support.lo,
                                  model.support.hi, 1e-9);
    report.checks.push_back({"p0-normalized", "p0 integrates to 1 over the support window",
                             std::abs(mass - 1.0) <= options.normalization_tol, model.support.lo, mass});
  }
  {
    bool pass = true;
    double at = x.front();
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
      const double gap = h[i + 1] - h[i];
      if (!(gap >= worst)) {
        worst = gap;
        at = x[i];
      }
      if (!(gap > 0.0)) pass = false;
    }
    report.checks.push_back({"h-monotone", "h strictly increasing on the probe grid", pass, at, worst});
  }
  {
    const double step = options.derivative_fd_step;
    auto fd_check = [&](const std::string& id, const std::string& desc, const ScalarFn& f,
                        const std::vector<double>& deriv) {
      double worst = 0.0;
      double at = x.front();
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double fd = (f(x[i] + step) - f(x[i] - step)) / (2.0 * step);
        const double err = std::abs(fd - deriv[i]) / (1.0 + std::abs(deriv[i]));
        if (!(err <= worst)) {
          worst = err;
          at = x[i];
        }
      }
      report.checks.push_back({id, desc, worst <= options.derivative_fd_tol, at, worst});
    };
    fd_check("deriv-b", "b' matches a central difference of b", model.b, bd);
    fd_check("deriv-h", "h' matches a central difference of h", model.h, hd);
    fd_check("deriv-h2", "h'' matches a central difference of h'", model.h_deriv, hdd);
  }
  return report;
}

}  // namespace qldp
