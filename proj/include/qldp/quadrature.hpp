#pragma once

#include <functional>

namespace qldp {

/// Adaptive Gauss-Kronrod (15-point) integral of f over [a, b]; a > b flips sign.
double integrate(const std::function<double(double)>& f, double a, double b, double abs_tol = 1e-10);

}  // namespace qldp
