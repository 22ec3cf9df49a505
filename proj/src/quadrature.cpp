#include "qldp/quadrature.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace qldp {

double integrate(const std::function<double(double)>& f, double a, double b, double abs_tol) {
  if (a == b) return 0.0;
  if (a > b) return -integrate(f, b, a, abs_tol);
  using boost::math::quadrature::gauss_kronrod;
  double err = 0.0;
  double l1 = 0.0;
  // A single Kronrod pass gives the L1 scale, which turns abs_tol into the
  // relative target the adaptive pass expects.
  double value = gauss_kronrod<double, 15>::integrate(f, a, b, 0, 1.0, &err, &l1);
  if (err <= abs_tol) return value;
  const double rel = std::max(abs_tol / std::max(l1, 1e-300), 1e-15);
  value = gauss_kronrod<double, 15>::integrate(f, a, b, 25, rel, &err, &l1);
  return value;
}

}  // namespace qldp
