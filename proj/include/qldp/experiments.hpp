#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qldp/density.hpp"
#include "qldp/filters.hpp"
#include "qldp/models.hpp"

namespace qldp {

enum class MethodPolicy { Auto, PicardMc, Oracle, Kalman, GridBayes };

MethodPolicy parse_method_policy(const std::string& name);
const char* to_string(MethodPolicy policy);

struct SweepConfig {
  std::string model_name = "linear-ou";
  ModelParams model_params;
  std::vector<double> eps_list{0.4, 0.2, 0.1, 0.05};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  double k0_halfwidth = 1.0;
  std::size_t grid_points = 41;
  MethodPolicy method = MethodPolicy::Auto;
  double mc_threshold = 0.2;
  std::size_t n_paths = 5000;
  double ds = 1e-2;
  double dt = 1e-3;
  /// Spacing of the oracle support grid (must divide the K0 spacing).
  double oracle_step = 1e-2;
  /// Optional set G = [X1 + lo, X1 + hi] for the set-level check.
  std::optional<std::pair<double, double>> set_offsets;
  unsigned threads = 1;

  void validate() const;
};

struct SweepRow {
  std::uint64_t seed = 0;
  double eps = 0.0;
  double x = 0.0;
  double eps_log_q = 0.0;
  double neg_J = 0.0;
  double abs_err = 0.0;
  DensityMethod method = DensityMethod::Kalman;
  bool ess_flag = false;
};

struct SweepCell {
  std::uint64_t seed = 0;
  double eps = 0.0;
  double X1 = 0.0;
  std::uint64_t x_hash = 0;
  bool complete = false;
  std::string error;
  double sup_err = 0.0;
  DensityMethod method = DensityMethod::Kalman;
  /// eps log int_G q and -inf_G J when a set was configured.
  std::optional<double> eps_log_mass_G;
  std::optional<double> neg_inf_J_G;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::vector<SweepCell> cells;
  std::map<double, double> median_sup_err;         // by eps
  std::map<double, double> median_set_err;         // by eps, when a set is configured
};

SweepReport run_sweep(const SweepConfig& config);

void write_sweep_outputs(const std::filesystem::path& dir, const SweepReport& report);

struct CrosscheckRow {
  std::string pair;
  double tv = 0.0;
  double sup_dlogq = 0.0;
};

struct CrosscheckResult {
  double X1 = 0.0;
  std::vector<DensityEstimate> densities;
  std::vector<CrosscheckRow> rows;
};

struct CrosscheckOptions {
  double dt = 1e-3;
  double ds = 1e-2;
  std::size_t n_paths = 20000;
  double halfwidth = 1.5;
  std::size_t grid_points = 41;
  unsigned threads = 1;
};

/// Picard MC, grid Bayes and (for linear models) Kalman on one observation path.
CrosscheckResult crosscheck_estimators(const ReducedModel& model, double eps, std::uint64_t seed,
                                       const CrosscheckOptions& options = {});

/// Filter convergence statistics plus their JSON export.
FilterConvergenceStats lemma_m_experiment(const ReducedModel& model, const std::vector<double>& eps_list,
                                          const std::vector<std::uint64_t>& seeds, double dt,
                                          const std::optional<std::filesystem::path>& json_out = std::nullopt);

/// Oracle support grid: spacing `step` anchored at X1, covering the prior
/// window, the signal's range and K0 with margin.
UniformGrid oracle_support_grid(const ReducedModel& model, const SamplePath& X, double X1, double step,
                                double halfwidth);

/// Picks the largest step <= max_step that divides `coarse` into a whole number of cells.
double dividing_step(double coarse, double max_step);

}  // namespace qldp
