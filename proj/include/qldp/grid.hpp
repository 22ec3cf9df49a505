#pragma once

#include <cstddef>
#include <vector>

namespace qldp {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  bool contains(double x) const { return x >= lo && x <= hi; }
};

/// Uniform grid of n >= 2 points on [lo, hi].
class UniformGrid {
 public:
  UniformGrid() = default;
  UniformGrid(double lo, double hi, std::size_t n);

  /// Grid with a fixed spacing, anchored so that `anchor` is a node, covering
  /// at least [lo, hi].
  static UniformGrid anchored(double anchor, double step, double lo, double hi);

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  std::size_t size() const { return n_; }
  double step() const { return step_; }
  double operator[](std::size_t i) const;
  std::vector<double> points() const;

  /// Index of the node nearest to x (clamped).
  std::size_t nearest(double x) const;

 private:
  double lo_ = 0.0;
  double hi_ = 0.0;
  std::size_t n_ = 0;
  double step_ = 0.0;
};

}  // namespace qldp
