#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "qldp/grid.hpp"

namespace qldp {

enum class DensityMethod { PicardMc, GridBayes, Kalman };

const char* to_string(DensityMethod method);

/// Log-domain density on a uniform x-grid. log_q is normalized so that the
/// trapezoid integral of exp(log_q) over the grid is 1.
struct DensityEstimate {
  UniformGrid xgrid;
  std::vector<double> log_rho;
  std::vector<double> log_q;
  std::vector<double> se_log;
  std::vector<double> ess;
  double eps = 0.0;
  DensityMethod method = DensityMethod::Kalman;
  std::size_t n_paths = 0;
  std::vector<std::string> flags;

  std::vector<double> density() const;
};

double log_sum_exp(std::span<const double> values);

/// log of the trapezoid integral of exp(log_f) on a uniform grid.
double log_trapezoid(std::span<const double> log_f, double step);

/// log_q = log_rho - log_trapezoid(log_rho).
std::vector<double> normalize_log_density(std::span<const double> log_rho, double step);

/// Builds a normalized estimate from unnormalized log values.
DensityEstimate make_density(const UniformGrid& xgrid, std::vector<double> log_rho, double eps,
                             DensityMethod method);

/// Half the trapezoid integral of |p - q|; both must share a grid.
double total_variation(const DensityEstimate& p, const DensityEstimate& q);

/// Linear interpolation of log_q onto another grid, then renormalized there.
DensityEstimate resample(const DensityEstimate& source, const UniformGrid& target);

/// Columns: x, log_rho, log_q, se_log, ess.
void write_density_csv(std::ostream& os, const DensityEstimate& d);

}  // namespace qldp
