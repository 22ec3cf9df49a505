#include "qldp/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qldp/error.hpp"

namespace qldp {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidModel: return "invalid-model";
    case ErrorKind::Tolerance: return "tolerance";
    case ErrorKind::SimulationDiverged: return "simulation-diverged";
    case ErrorKind::NumericalInstability: return "numerical-instability";
    case ErrorKind::GridTooSmall: return "grid-too-small";
    case ErrorKind::InternalConsistency: return "internal-consistency";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

UniformGrid::UniformGrid(double lo, double hi, std::size_t n) : lo_(lo), hi_(hi), n_(n) {
  if (n < 2 || !(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw Error(ErrorKind::InvalidArgument, "uniform grid needs n >= 2 and lo < hi, got n=" + std::to_string(n) +
                                                " on [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  step_ = (hi - lo) / static_cast<double>(n - 1);
}

UniformGrid UniformGrid::anchored(double anchor, double step, double lo, double hi) {
  if (!(step > 0.0) || !(hi > lo)) {
    throw Error(ErrorKind::InvalidArgument, "anchored grid needs step > 0 and lo < hi");
  }
  const double k_lo = std::floor((lo - anchor) / step);
  const double k_hi = std::ceil((hi - anchor) / step);
  const auto n = static_cast<std::size_t>(k_hi - k_lo) + 1;
  UniformGrid g;
  g.lo_ = anchor + k_lo * step;
  g.hi_ = anchor + k_hi * step;
  g.n_ = n;
  g.step_ = step;
  return g;
}

double UniformGrid::operator[](std::size_t i) const {
  if (i + 1 == n_) return hi_;
  return lo_ + static_cast<double>(i) * step_;
}

std::vector<double> UniformGrid::points() const {
  std::vector<double> pts(n_);
  for (std::size_t i = 0; i < n_; ++i) pts[i] = (*this)[i];
  return pts;
}

std::size_t UniformGrid::nearest(double x) const {
  const double k = std::round((x - lo_) / step_);
  if (k <= 0.0) return 0;
  return std::min(n_ - 1, static_cast<std::size_t>(k));
}

}  // namespace qldp
