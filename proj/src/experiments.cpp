#include "qldp/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "qldp/error.hpp"
#include "qldp/io.hpp"
#include "qldp/parallel.hpp"
#include "qldp/picard.hpp"
#include "qldp/rate.hpp"

namespace qldp {

MethodPolicy parse_method_policy(const std::string& name) {
  if (name == "auto") return MethodPolicy::Auto;
  if (name == "picard-mc") return MethodPolicy::PicardMc;
  if (name == "oracle") return MethodPolicy::Oracle;
  if (name == "kalman") return MethodPolicy::Kalman;
  if (name == "grid-bayes") return MethodPolicy::GridBayes;
  throw Error(ErrorKind::Config, "unknown density method '" + name + "'");
}

const char* to_string(MethodPolicy policy) {
  switch (policy) {
    case MethodPolicy::Auto: return "auto";
    case MethodPolicy::PicardMc: return "picard-mc";
    case MethodPolicy::Oracle: return "oracle";
    case MethodPolicy::Kalman: return "kalman";
    case MethodPolicy::GridBayes: return "grid-bayes";
  }
  return "unknown";
}

void SweepConfig::validate() const {
  if (eps_list.empty()) throw Error(ErrorKind::Config, "sweep needs at least one eps");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > 0.0)) throw Error(ErrorKind::Config, "eps values must be positive");
    if (i > 0 && !(eps_list[i] < eps_list[i - 1])) throw Error(ErrorKind::Config, "eps list must be strictly decreasing");
  }
  if (seeds.empty()) throw Error(ErrorKind::Config, "sweep needs at least one seed");
  if (!(k0_halfwidth > 0.0) || !std::isfinite(k0_halfwidth)) throw Error(ErrorKind::Config, "K0 must be a compact interval");
  if (grid_points < 2) throw Error(ErrorKind::Config, "sweep grid needs at least 2 points");
  if (!(dt > 0.0) || !(ds > 0.0) || !(oracle_step > 0.0)) throw Error(ErrorKind::Config, "steps must be positive");
  if (set_offsets && !(set_offsets->second > set_offsets->first)) {
    throw Error(ErrorKind::Config, "set offsets must satisfy lo < hi");
  }
}

double dividing_step(double coarse, double max_step) {
  const double cells = std::max(1.0, std::ceil(coarse / max_step * (1.0 - 1e-12)));
  return coarse / cells;
}

UniformGrid oracle_support_grid(const ReducedModel& model, const SamplePath& X, double X1, double step,
                                double halfwidth) {
  double lo = X1 - halfwidth - 1.0;
  double hi = X1 + halfwidth + 1.0;
  for (double v : X.values) {
    lo = std::min(lo, v - 4.0);
    hi = std::max(hi, v + 4.0);
  }
  if (model.gaussian_prior) {
    const double sd = std::sqrt(model.gaussian_prior->variance);
    lo = std::min(lo, model.gaussian_prior->mean - 7.0 * sd);
    hi = std::max(hi, model.gaussian_prior->mean + 7.0 * sd);
  } else {
    lo = std::min(lo, model.support.lo);
    hi = std::max(hi, model.support.hi);
  }
  return UniformGrid::anchored(X1, step, lo, hi);
}

namespace {

DensityMethod resolve_method(MethodPolicy policy, double eps, double threshold, const ReducedModel& model) {
  const bool linear = model.linear && model.gaussian_prior;
  switch (policy) {
    case MethodPolicy::PicardMc: return DensityMethod::PicardMc;
    case MethodPolicy::Kalman:
      if (!linear) throw Error(ErrorKind::Config, "kalman density needs a declared-linear model");
      return DensityMethod::Kalman;
    case MethodPolicy::GridBayes: return DensityMethod::GridBayes;
    case MethodPolicy::Oracle: return linear ? DensityMethod::Kalman : DensityMethod::GridBayes;
    case MethodPolicy::Auto:
      if (eps >= threshold) return DensityMethod::PicardMc;
      return linear ? DensityMethod::Kalman : DensityMethod::GridBayes;
  }
  return DensityMethod::Kalman;
}

double neg_inf_J_over(double lo, double hi, double X1, const ReducedModel& model) {
  // J(., X1) is convex with its zero at X1.
  if (X1 < lo) return -rate_J(lo, X1, model);
  if (X1 > hi) return -rate_J(hi, X1, model);
  return 0.0;
}

/// Log of the trapezoid mass of a density over the nodes inside [lo, hi].
double log_mass_between(const DensityEstimate& d, double lo, double hi) {
  const auto& g = d.xgrid;
  const std::size_t i0 = g.nearest(lo);
  const std::size_t i1 = g.nearest(hi);
  if (i1 <= i0) throw Error(ErrorKind::InvalidArgument, "set is narrower than one grid cell");
  std::vector<double> slice(d.log_q.begin() + static_cast<std::ptrdiff_t>(i0),
                            d.log_q.begin() + static_cast<std::ptrdiff_t>(i1) + 1);
  return log_trapezoid(slice, g.step());
}

struct CellOutput {
  SweepCell cell;
  std::vector<SweepRow> rows;
};

CellOutput run_cell(const SweepConfig& cfg, const ReducedModel& model, const TimeGrid& grid, std::uint64_t seed,
                    double x0, std::size_t eps_index) {
  CellOutput out;
  const double eps = cfg.eps_list[eps_index];
  out.cell.seed = seed;
  out.cell.eps = eps;
  const auto pair = simulate_pair(model, eps, grid, x0, seed,
                                  streams::kObservation + eps_index * streams::kSweepObservationStride);
  const double X1 = pair.X.back();
  out.cell.X1 = X1;
  out.cell.x_hash = path_hash(pair.X);
  const DensityMethod method = resolve_method(cfg.method, eps, cfg.mc_threshold, model);
  out.cell.method = method;

  const UniformGrid k0(X1 - cfg.k0_halfwidth, X1 + cfg.k0_halfwidth, cfg.grid_points);
  DensityEstimate density;
  if (method == DensityMethod::PicardMc) {
    const double width = cfg.k0_halfwidth + 5.0 * std::sqrt(eps);
    const UniformGrid mc_grid = UniformGrid::anchored(X1, k0.step(), X1 - width, X1 + width);
    const auto filter = run_approximate_filter(pair.Y, model, eps);
    const double ds = choose_ds(filter, model, cfg.ds, seed);
    const auto rescaled = reverse_and_rescale(filter, ds);
    PicardOptions opts;
    opts.n_paths = cfg.n_paths;
    opts.seed = seed;
    opts.threads = 1;
    density = log_rho_estimate(mc_grid, rescaled, model, opts).density;
  } else {
    const double step = dividing_step(k0.step(), cfg.oracle_step);
    const auto support = oracle_support_grid(model, pair.X, X1, step, cfg.k0_halfwidth);
    if (method == DensityMethod::Kalman) {
      const GaussianPrior prior = *model.gaussian_prior;
      const auto post = kalman_bucy(pair.Y, model.linear->a, model.linear->c, eps,
                                    GaussianPosterior{prior.mean, prior.variance, 0.0});
      density = gaussian_density(post, support, eps);
    } else {
      density = grid_bayes_filter(pair.Y, model, eps, support, pair.Y.grid.dt());
    }
  }

  double sup = 0.0;
  for (std::size_t i = 0; i < k0.size(); ++i) {
    const double x = k0[i];
    const std::size_t j = density.xgrid.nearest(x);
    SweepRow row;
    row.seed = seed;
    row.eps = eps;
    row.x = x;
    row.eps_log_q = eps * density.log_q[j];
    row.neg_J = -rate_J(x, X1, model);
    row.abs_err = std::abs(row.eps_log_q - row.neg_J);
    row.method = method;
    row.ess_flag = method == DensityMethod::PicardMc && density.ess[j] < 10.0;
    if (!(row.abs_err <= sup)) sup = row.abs_err;
    out.rows.push_back(row);
  }
  out.cell.sup_err = sup;
  if (cfg.set_offsets) {
    const double lo = X1 + cfg.set_offsets->first;
    const double hi = X1 + cfg.set_offsets->second;
    out.cell.eps_log_mass_G = eps * log_mass_between(density, lo, hi);
    out.cell.neg_inf_J_G = neg_inf_J_over(lo, hi, X1, model);
  }
  out.cell.complete = true;
  return out;
}

}  // namespace

SweepReport run_sweep(const SweepConfig& config) {
  config.validate();
  const ReducedModel model = builtin_model(config.model_name, config.model_params);
  const auto grid = TimeGrid::with_max_step(0.0, 1.0, config.dt);
  const std::size_t n_eps = config.eps_list.size();
  const std::size_t n_cells = config.seeds.size() * n_eps;

  std::vector<CellOutput> outputs(n_cells);
  parallel_for(n_cells, config.threads, [&](std::size_t c) {
    const std::size_t s = c / n_eps;
    const std::size_t e = c % n_eps;
    const std::uint64_t seed = config.seeds[s];
    try {
      outputs[c] = run_cell(config, model, grid, seed, draw_initial_state(model, seed), e);
    } catch (const Error& err) {
      outputs[c].cell.seed = seed;
      outputs[c].cell.eps = config.eps_list[e];
      outputs[c].cell.complete = false;
      outputs[c].cell.error = std::string(to_string(err.kind())) + ": " + err.what();
    }
  });

  SweepReport report;
  std::map<double, std::vector<double>> sup_by_eps;
  std::map<double, std::vector<double>> set_by_eps;
  for (auto& out : outputs) {
    if (out.cell.complete) {
      sup_by_eps[out.cell.eps].push_back(out.cell.sup_err);
      if (out.cell.eps_log_mass_G) {
        set_by_eps[out.cell.eps].push_back(std::abs(*out.cell.eps_log_mass_G - *out.cell.neg_inf_J_G));
      }
    }
    report.rows.insert(report.rows.end(), out.rows.begin(), out.rows.end());
    report.cells.push_back(out.cell);
  }
  for (auto& [eps, v] : sup_by_eps) report.median_sup_err[eps] = median(v);
  for (auto& [eps, v] : set_by_eps) report.median_set_err[eps] = median(v);
  return report;
}

void write_sweep_outputs(const std::filesystem::path& dir, const SweepReport& report) {
  ensure_directory(dir);
  std::ostringstream csv;
  csv << "seed,eps,x,eps_log_q,neg_J,abs_err,method,ess_flag\n";
  for (const auto& r : report.rows) {
    csv << r.seed << ',' << format_double(r.eps) << ',' << format_double(r.x) << ',' << format_double(r.eps_log_q)
        << ',' << format_double(r.neg_J) << ',' << format_double(r.abs_err) << ',' << to_string(r.method) << ','
        << (r.ess_flag ? 1 : 0) << '\n';
  }
  write_text_file(dir / "sweep.csv", csv.str());

  std::ostringstream cells;
  cells << "seed,eps,X1,x_hash,sup_err,method,complete,eps_log_mass_G,neg_inf_J_G,error\n";
  for (const auto& c : report.cells) {
    cells << c.seed << ',' << format_double(c.eps) << ',' << format_double(c.X1) << ',' << c.x_hash << ','
          << format_double(c.sup_err) << ',' << to_string(c.method) << ',' << (c.complete ? 1 : 0) << ','
          << (c.eps_log_mass_G ? format_double(*c.eps_log_mass_G) : "") << ','
          << (c.neg_inf_J_G ? format_double(*c.neg_inf_J_G) : "") << ',' << '"' << c.error << '"' << '\n';
  }
  write_text_file(dir / "cells.csv", cells.str());

  nlohmann::ordered_json summary;
  nlohmann::ordered_json sup = nlohmann::ordered_json::object();
  // Largest eps first, matching the sweep order.
  for (auto it = report.median_sup_err.rbegin(); it != report.median_sup_err.rend(); ++it) {
    sup[format_double(it->first)] = it->second;
  }
  summary["median_sup_err"] = sup;
  if (!report.median_set_err.empty()) {
    nlohmann::ordered_json set = nlohmann::ordered_json::object();
    for (auto it = report.median_set_err.rbegin(); it != report.median_set_err.rend(); ++it) {
      set[format_double(it->first)] = it->second;
    }
    summary["median_set_err"] = set;
  }
  std::size_t incomplete = 0;
  for (const auto& c : report.cells) incomplete += c.complete ? 0 : 1;
  summary["incomplete_cells"] = incomplete;
  write_json_file(dir / "summary.json", summary);
}

CrosscheckResult crosscheck_estimators(const ReducedModel& model, double eps, std::uint64_t seed,
                                       const CrosscheckOptions& options) {
  const auto grid = TimeGrid::with_max_step(0.0, 1.0, options.dt);
  const auto pair = simulate_pair(model, eps, grid, draw_initial_state(model, seed), seed);
  const double X1 = pair.X.back();
  const UniformGrid k(X1 - options.halfwidth, X1 + options.halfwidth, options.grid_points);

  CrosscheckResult result;
  result.X1 = X1;
  const auto filter = run_approximate_filter(pair.Y, model, eps);
  const auto rescaled = reverse_and_rescale(filter, options.ds);
  PicardOptions opts;
  opts.n_paths = options.n_paths;
  opts.seed = seed;
  opts.threads = options.threads;
  result.densities.push_back(log_rho_estimate(k, rescaled, model, opts).density);

  const auto support = oracle_support_grid(model, pair.X, X1, dividing_step(k.step(), 1e-2), options.halfwidth);
  result.densities.push_back(resample(grid_bayes_filter(pair.Y, model, eps, support, pair.Y.grid.dt()), k));
  if (model.linear && model.gaussian_prior) {
    const auto post = kalman_bucy(pair.Y, model.linear->a, model.linear->c, eps,
                                  GaussianPosterior{model.gaussian_prior->mean, model.gaussian_prior->variance, 0.0});
    result.densities.push_back(gaussian_density(post, k, eps));
  }

  const auto& mc = result.densities.front();
  for (std::size_t a = 0; a < result.densities.size(); ++a) {
    for (std::size_t b = a + 1; b < result.densities.size(); ++b) {
      const auto& p = result.densities[a];
      const auto& q = result.densities[b];
      CrosscheckRow row;
      row.pair = std::string(to_string(p.method)) + "/" + to_string(q.method);
      row.tv = total_variation(p, q);
      for (std::size_t i = 0; i < k.size(); ++i) {
        if (mc.ess[i] < 10.0) continue;
        row.sup_dlogq = std::max(row.sup_dlogq, std::abs(p.log_q[i] - q.log_q[i]));
      }
      result.rows.push_back(row);
    }
  }
  return result;
}

FilterConvergenceStats lemma_m_experiment(const ReducedModel& model, const std::vector<double>& eps_list,
                                          const std::vector<std::uint64_t>& seeds, double dt,
                                          const std::optional<std::filesystem::path>& json_out) {
  auto stats = check_filter_convergence(model, eps_list, seeds, dt);
  if (json_out) {
    nlohmann::ordered_json j;
    j["eps"] = nlohmann::ordered_json::array();
    j["T_eps"] = nlohmann::ordered_json::array();
    j["median_sup_dev"] = nlohmann::ordered_json::array();
    j["fitted_C"] = nlohmann::ordered_json::array();
    for (const auto& e : stats.entries) {
      j["eps"].push_back(e.eps);
      j["T_eps"].push_back(e.T_eps);
      j["median_sup_dev"].push_back(e.median_sup_dev);
      j["fitted_C"].push_back(e.fitted_C);
    }
    j["fitted_C_overall"] = stats.fitted_C;
    j["seeds"] = stats.seeds;
    write_json_file(*json_out, j);
  }
  return stats;
}

}  // namespace qldp
