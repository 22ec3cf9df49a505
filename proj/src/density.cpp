#include "qldp/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "qldp/error.hpp"
#include "qldp/io.hpp"

namespace qldp {

const char* to_string(DensityMethod method) {
  switch (method) {
    case DensityMethod::PicardMc: return "picard-mc";
    case DensityMethod::GridBayes: return "grid-bayes";
    case DensityMethod::Kalman: return "kalman";
  }
  return "unknown";
}

std::vector<double> DensityEstimate::density() const {
  std::vector<double> out(log_q.size());
  std::transform(log_q.begin(), log_q.end(), out.begin(), [](double v) { return std::exp(v); });
  return out;
}

double log_sum_exp(std::span<const double> values) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : values) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

double log_trapezoid(std::span<const double> log_f, double step) {
  if (log_f.size() < 2) throw Error(ErrorKind::InvalidArgument, "trapezoid needs at least two points");
  double m = -std::numeric_limits<double>::infinity();
  for (double v : log_f) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < log_f.size(); ++i) {
    const double w = (i == 0 || i + 1 == log_f.size()) ? 0.5 : 1.0;
    s += w * std::exp(log_f[i] - m);
  }
  return m + std::log(s * step);
}

std::vector<double> normalize_log_density(std::span<const double> log_rho, double step) {
  const double log_z = log_trapezoid(log_rho, step);
  if (!std::isfinite(log_z)) {
    throw Error(ErrorKind::NumericalInstability, "density has no finite mass on its grid");
  }
  std::vector<double> out(log_rho.size());
  std::transform(log_rho.begin(), log_rho.end(), out.begin(), [log_z](double v) { return v - log_z; });
  return out;
}

DensityEstimate make_density(const UniformGrid& xgrid, std::vector<double> log_rho, double eps,
                             DensityMethod method) {
  if (log_rho.size() != xgrid.size()) throw Error(ErrorKind::InvalidArgument, "density size does not match grid");
  DensityEstimate d;
  d.xgrid = xgrid;
  d.log_q = normalize_log_density(log_rho, xgrid.step());
  d.log_rho = std::move(log_rho);
  d.se_log.assign(xgrid.size(), 0.0);
  d.ess.assign(xgrid.size(), 0.0);
  d.eps = eps;
  d.method = method;
  return d;
}

double total_variation(const DensityEstimate& p, const DensityEstimate& q) {
  if (p.xgrid.size() != q.xgrid.size() || std::abs(p.xgrid.lo() - q.xgrid.lo()) > 1e-12 ||
      std::abs(p.xgrid.hi() - q.xgrid.hi()) > 1e-12) {
    throw Error(ErrorKind::InvalidArgument, "total variation needs densities on the same grid");
  }
  const std::size_t n = p.xgrid.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
    s += w * std::abs(std::exp(p.log_q[i]) - std::exp(q.log_q[i]));
  }
  return 0.5 * s * p.xgrid.step();
}

DensityEstimate resample(const DensityEstimate& source, const UniformGrid& target) {
  std::vector<double> log_rho(target.size());
  const auto& g = source.xgrid;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double x = target[i];
    if (x < g.lo() - 1e-12 || x > g.hi() + 1e-12) {
      throw Error(ErrorKind::InvalidArgument, "resample target extends beyond the source grid");
    }
    const double pos = std::clamp((x - g.lo()) / g.step(), 0.0, static_cast<double>(g.size() - 1));
    const auto k = std::min(static_cast<std::size_t>(pos), g.size() - 2);
    const double frac = pos - static_cast<double>(k);
    const double a = source.log_q[k];
    const double b = source.log_q[k + 1];
    if (frac == 0.0) {
      log_rho[i] = a;
    } else if (!std::isfinite(a) || !std::isfinite(b)) {
      log_rho[i] = frac < 0.5 ? a : b;
    } else {
      log_rho[i] = a + frac * (b - a);
    }
  }
  auto d = make_density(target, std::move(log_rho), source.eps, source.method);
  d.n_paths = source.n_paths;
  d.flags = source.flags;
  return d;
}

void write_density_csv(std::ostream& os, const DensityEstimate& d) {
  os << "x,log_rho,log_q,se_log,ess\n";
  for (std::size_t i = 0; i < d.xgrid.size(); ++i) {
    os << format_double(d.xgrid[i]) << ',' << format_double(d.log_rho[i]) << ',' << format_double(d.log_q[i])
       << ',' << format_double(d.se_log[i]) << ',' << format_double(d.ess[i]) << '\n';
  }
}

}  // namespace qldp
