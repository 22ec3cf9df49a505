#include "qldp/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "qldp/error.hpp"
#include "qldp/experiments.hpp"
#include "qldp/filters.hpp"
#include "qldp/io.hpp"
#include "qldp/models.hpp"
#include "qldp/picard.hpp"
#include "qldp/rate.hpp"
#include "qldp/sde.hpp"

#ifndef QLDP_VERSION
#define QLDP_VERSION "dev"
#endif
#ifndef QLDP_BUILD_TYPE
#define QLDP_BUILD_TYPE "unknown"
#endif

namespace qldp::cli {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

const std::vector<std::string> kSubcommands{"simulate", "filter", "density", "rate", "sweep", "crosscheck",
                                            "check-model"};

struct RunConfig {
  std::string subcommand;
  // model block
  std::string model = "linear-ou";
  ModelParams params;
  // numeric block
  std::optional<double> eps;
  std::optional<std::vector<double>> eps_list;
  std::optional<double> dt;
  std::optional<double> ds;
  std::optional<std::size_t> n_paths;
  std::optional<double> grid_min;
  std::optional<double> grid_max;
  std::optional<std::size_t> grid_n;
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<double> x1;
  std::optional<double> z;
  std::optional<std::vector<double>> T_list;
  std::optional<std::string> method;
  std::optional<double> k0_halfwidth;
  std::optional<double> mc_threshold;
  std::optional<double> oracle_step;
  std::optional<std::vector<double>> set_offsets;
  std::optional<unsigned> threads;
  // io block
  std::optional<std::string> out;
  std::vector<std::string> formats{"csv", "json"};

  bool wants(const std::string& format) const {
    return std::find(formats.begin(), formats.end(), format) != formats.end();
  }
};

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorKind::Config, msg); }

void reject_unknown(const json& block, const std::string& where, const std::set<std::string>& allowed) {
  if (!block.is_object()) config_error("'" + where + "' must be an object");
  for (const auto& [key, value] : block.items()) {
    if (!allowed.count(key)) config_error("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T take(const json& block, const std::string& key, const std::string& where) {
  try {
    return block.at(key).get<T>();
  } catch (const json::exception&) {
    config_error("'" + where + "." + key + "' has the wrong type");
  }
}

double take_number(const json& block, const std::string& key, const std::string& where) {
  const auto& v = block.at(key);
  if (!v.is_number()) config_error("'" + where + "." + key + "' must be a number");
  return v.get<double>();
}

std::size_t take_count(const json& block, const std::string& key, const std::string& where) {
  const auto& v = block.at(key);
  if (!v.is_number_unsigned()) config_error("'" + where + "." + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

void load_config_file(const fs::path& path, RunConfig& cfg) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot read config file " + path.string());
  json root;
  try {
    root = json::parse(is);
  } catch (const json::parse_error& e) {
    config_error(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(root, "config", {"subcommand", "model", "numeric", "io"});
  if (root.contains("subcommand")) {
    const auto sub = take<std::string>(root, "subcommand", "config");
    if (sub != cfg.subcommand) config_error("config is for '" + sub + "' but '" + cfg.subcommand + "' was requested");
  }
  if (root.contains("model")) {
    const auto& m = root["model"];
    reject_unknown(m, "model", {"name", "c", "alpha", "prior_mean", "prior_var"});
    if (m.contains("name")) cfg.model = take<std::string>(m, "name", "model");
    if (m.contains("c")) cfg.params.c = take_number(m, "c", "model");
    if (m.contains("alpha")) cfg.params.alpha = take_number(m, "alpha", "model");
    if (m.contains("prior_mean")) cfg.params.prior_mean = take_number(m, "prior_mean", "model");
    if (m.contains("prior_var")) cfg.params.prior_var = take_number(m, "prior_var", "model");
  }
  if (root.contains("numeric")) {
    const auto& n = root["numeric"];
    const std::string w = "numeric";
    reject_unknown(n, w, {"eps", "eps_list", "dt", "ds", "n_paths", "grid_min", "grid_max", "grid_n", "seed", "seeds",
                          "x1", "z", "T_list", "method", "k0_halfwidth", "mc_threshold", "oracle_step", "set",
                          "threads"});
    if (n.contains("eps")) cfg.eps = take_number(n, "eps", w);
    if (n.contains("eps_list")) cfg.eps_list = take<std::vector<double>>(n, "eps_list", w);
    if (n.contains("dt")) cfg.dt = take_number(n, "dt", w);
    if (n.contains("ds")) cfg.ds = take_number(n, "ds", w);
    if (n.contains("n_paths")) cfg.n_paths = take_count(n, "n_paths", w);
    if (n.contains("grid_min")) cfg.grid_min = take_number(n, "grid_min", w);
    if (n.contains("grid_max")) cfg.grid_max = take_number(n, "grid_max", w);
    if (n.contains("grid_n")) cfg.grid_n = take_count(n, "grid_n", w);
    if (n.contains("seed")) cfg.seed = take_count(n, "seed", w);
    if (n.contains("seeds")) cfg.seeds = take<std::vector<std::uint64_t>>(n, "seeds", w);
    if (n.contains("x1")) cfg.x1 = take_number(n, "x1", w);
    if (n.contains("z")) cfg.z = take_number(n, "z", w);
    if (n.contains("T_list")) cfg.T_list = take<std::vector<double>>(n, "T_list", w);
    if (n.contains("method")) cfg.method = take<std::string>(n, "method", w);
    if (n.contains("k0_halfwidth")) cfg.k0_halfwidth = take_number(n, "k0_halfwidth", w);
    if (n.contains("mc_threshold")) cfg.mc_threshold = take_number(n, "mc_threshold", w);
    if (n.contains("oracle_step")) cfg.oracle_step = take_number(n, "oracle_step", w);
    if (n.contains("set")) cfg.set_offsets = take<std::vector<double>>(n, "set", w);
    if (n.contains("threads")) cfg.threads = static_cast<unsigned>(take_count(n, "threads", w));
  }
  if (root.contains("io")) {
    const auto& io = root["io"];
    reject_unknown(io, "io", {"out", "formats"});
    if (io.contains("out")) cfg.out = take<std::string>(io, "out", "io");
    if (io.contains("formats")) {
      cfg.formats = take<std::vector<std::string>>(io, "formats", "io");
      for (const auto& f : cfg.formats) {
        if (f != "csv" && f != "json") config_error("io.formats entries must be 'csv' or 'json'");
      }
    }
  }
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const std::string& flag) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !(is >> std::ws).eof()) config_error("cannot parse '" + item + "' in " + flag);
    out.push_back(v);
  }
  if (out.empty()) config_error(flag + " is empty");
  return out;
}

// Resolved-value accessors with per-subcommand defaults.
double eps_of(const RunConfig& c) { return c.eps.value_or(0.3); }
double dt_of(const RunConfig& c) { return c.dt.value_or(1e-3); }
double ds_of(const RunConfig& c) { return c.ds.value_or(1e-2); }
std::uint64_t seed_of(const RunConfig& c) { return c.seed.value_or(1); }
unsigned threads_of(const RunConfig& c) { return std::max(1U, c.threads.value_or(1)); }
fs::path out_of(const RunConfig& c) { return c.out.value_or("runs/" + c.subcommand); }

std::vector<std::uint64_t> seeds_of(const RunConfig& c, std::size_t count) {
  if (c.seeds) return *c.seeds;
  std::vector<std::uint64_t> s(count);
  for (std::size_t i = 0; i < count; ++i) s[i] = i + 1;
  return s;
}

json model_json(const RunConfig& c) {
  json m;
  m["name"] = c.model;
  m["c"] = c.params.c;
  m["alpha"] = c.params.alpha;
  m["prior_mean"] = c.params.prior_mean;
  m["prior_var"] = c.params.prior_var;
  return m;
}

/// Full configuration as actually used, written next to every output.
json resolved_config(const RunConfig& c, const json& numeric) {
  json j;
  j["subcommand"] = c.subcommand;
  j["model"] = model_json(c);
  j["numeric"] = numeric;
  j["io"] = json{{"out", out_of(c).generic_string()}, {"formats", c.formats}};
  return j;
}

void write_csv(const RunConfig& c, const fs::path& path, const std::string& text) {
  if (c.wants("csv")) write_text_file(path, text);
}

void write_meta(const RunConfig& c, const fs::path& path, const json& j) {
  if (c.wants("json")) write_json_file(path, j);
}

std::string path_csv(const SamplePath& p) {
  std::ostringstream os;
  write_path_csv(os, p);
  return os.str();
}

int cmd_simulate(const RunConfig& c) {
  const auto model = builtin_model(c.model, c.params);
  const double eps = eps_of(c);
  const auto grid = TimeGrid::with_max_step(0.0, 1.0, dt_of(c));
  const auto seed = seed_of(c);
  const double x0 = draw_initial_state(model, seed);
  const auto pair = simulate_pair(model, eps, grid, x0, seed);
  const fs::path dir = out_of(c);
  ensure_directory(dir);
  write_json_file(dir / "config.json",
                  resolved_config(c, json{{"eps", eps}, {"dt", grid.dt()}, {"seed", seed}}));
  write_csv(c, dir / "X.csv", path_csv(pair.X));
  write_csv(c, dir / "Y.csv", path_csv(pair.Y));
  write_meta(c, dir / "metadata.json",
             json{{"model", c.model}, {"eps", eps}, {"dt", grid.dt()}, {"seed", seed}, {"x0", x0},
                  {"X1", pair.X.back()}, {"streams", json{{"X", streams::kSignal}, {"V", streams::kObservation}}}});
  return 0;
}

int cmd_filter(const RunConfig& c) {
  const auto model = builtin_model(c.model, c.params);
  const double eps = eps_of(c);
  const auto grid = TimeGrid::with_max_step(0.0, 1.0, dt_of(c));
  const auto seed = seed_of(c);
  const auto pair = simulate_pair(model, eps, grid, draw_initial_state(model, seed), seed);
  const auto filter = run_approximate_filter(pair.Y, model, eps);
  const auto rescaled = reverse_and_rescale(filter, ds_of(c));
  const fs::path dir = out_of(c);
  ensure_directory(dir);
  json numeric{{"eps", eps}, {"dt", grid.dt()}, {"ds", ds_of(c)}, {"seed", seed}};
  if (c.eps_list) {
    numeric["eps_list"] = *c.eps_list;
    numeric["seeds"] = seeds_of(c, 20);
  }
  write_json_file(dir / "config.json", resolved_config(c, numeric));
  write_csv(c, dir / "filter.csv", path_csv(filter.M));
  write_csv(c, dir / "m_tilde.csv", path_csv(rescaled.m_tilde));
  json meta{{"model", c.model}, {"eps", eps}, {"seed", seed}, {"X1", pair.X.back()}, {"M1", filter.M.back()}};
  if (model.linear && model.gaussian_prior) {
    const auto post = kalman_bucy(pair.Y, model.linear->a, model.linear->c, eps,
                                  GaussianPosterior{model.gaussian_prior->mean, model.gaussian_prior->variance, 0.0});
    meta["kalman"] = json{{"mean", post.mean}, {"variance", post.variance}};
  }
  write_meta(c, dir / "metadata.json", meta);
  if (c.eps_list) {
    lemma_m_experiment(model, *c.eps_list, seeds_of(c, 20), grid.dt(),
                       c.wants("json") ? std::optional<fs::path>(dir / "lemma_m.json") : std::nullopt);
  }
  return 0;
}

int cmd_density(const RunConfig& c) {
  const auto model = builtin_model(c.model, c.params);
  const double eps = eps_of(c);
  const auto grid = TimeGrid::with_max_step(0.0, 1.0, dt_of(c));
  const auto seed = seed_of(c);
  const auto pair = simulate_pair(model, eps, grid, draw_initial_state(model, seed), seed);
  const double X1 = pair.X.back();
  const double lo = c.grid_min.value_or(X1 - 1.5);
  const double hi = c.grid_max.value_or(X1 + 1.5);
  const UniformGrid xgrid(lo, hi, c.grid_n.value_or(41));
  const std::string method = c.method.value_or("picard-mc");
  const std::size_t n_paths = c.n_paths.value_or(20000);

  DensityEstimate d;
  double ds = ds_of(c);
  if (method == "picard-mc") {
    const auto filter = run_approximate_filter(pair.Y, model, eps);
    ds = choose_ds(filter, model, ds, seed);
    PicardOptions opts;
    opts.n_paths = n_paths;
    opts.seed = seed;
    opts.threads = threads_of(c);
    d = log_rho_estimate(xgrid, reverse_and_rescale(filter, ds), model, opts).density;
  } else if (method == "kalman" || method == "grid-bayes" || method == "oracle") {
    const bool linear = model.linear && model.gaussian_prior;
    if (method == "kalman" && !linear) config_error("kalman density needs a declared-linear model");
    if (method == "kalman" || (method == "oracle" && linear)) {
      const auto post = kalman_bucy(pair.Y, model.linear->a, model.linear->c, eps,
                                    GaussianPosterior{model.gaussian_prior->mean, model.gaussian_prior->variance, 0.0});
      d = gaussian_density(post, xgrid, eps);
    } else {
      const auto support = oracle_support_grid(model, pair.X, X1, dividing_step(xgrid.step(), 1e-2),
                                               std::max(hi - X1, X1 - lo));
      d = resample(grid_bayes_filter(pair.Y, model, eps, support, pair.Y.grid.dt()), xgrid);
    }
  } else {
    config_error("unknown density method '" + method + "'");
  }

  const fs::path dir = out_of(c);
  ensure_directory(dir);
  write_json_file(dir / "config.json",
                  resolved_config(c, json{{"eps", eps}, {"dt", grid.dt()}, {"ds", ds_of(c)}, {"n_paths", n_paths},
                                          {"seed", seed}, {"grid_min", lo}, {"grid_max", hi},
                                          {"grid_n", xgrid.size()}, {"method", method}, {"threads", threads_of(c)}}));
  std::ostringstream os;
  write_density_csv(os, d);
  write_csv(c, dir / "density.csv", os.str());
  write_meta(c, dir / "metadata.json",
             json{{"model", c.model}, {"eps", eps}, {"ds", ds}, {"n_paths", method == "picard-mc" ? n_paths : 0},
                  {"seed", seed}, {"flags", d.flags}, {"method", to_string(d.method)}, {"X1", X1}});
  return 0;
}

int cmd_rate(const RunConfig& c) {
  const auto model = builtin_model(c.model, c.params);
  const double X1 = c.x1.value_or(0.0);
  const UniformGrid xgrid(c.grid_min.value_or(X1 - 1.0), c.grid_max.value_or(X1 + 1.0), c.grid_n.value_or(101));
  const auto table = make_rate_table(xgrid.points(), X1, model);
  const fs::path dir = out_of(c);
  ensure_directory(dir);
  json numeric{{"x1", X1}, {"grid_min", xgrid.lo()}, {"grid_max", xgrid.hi()}, {"grid_n", xgrid.size()}};
  if (c.T_list) {
    numeric["T_list"] = *c.T_list;
    numeric["z"] = c.z.value_or(X1);
  }
  write_json_file(dir / "config.json", resolved_config(c, numeric));
  std::ostringstream os;
  write_rate_csv(os, table);
  write_csv(c, dir / "rate.csv", os.str());
  if (c.T_list) {
    const double z = c.z.value_or(X1);
    std::ostringstream act;
    act << "x,z,T,I_value,control_cost,converged\n";
    for (std::size_t i = 0; i < xgrid.size(); ++i) {
      for (double T : *c.T_list) {
        const auto r = solve_I_T(ActionProblem{xgrid[i], z, T, X1, 256, &model});
        act << format_double(xgrid[i]) << ',' << format_double(z) << ',' << format_double(T) << ','
            << format_double(r.I_value) << ',' << format_double(r.control_cost) << ',' << (r.converged ? 1 : 0)
            << '\n';
      }
    }
    write_csv(c, dir / "action.csv", act.str());
  }
  return 0;
}

int cmd_sweep(const RunConfig& c) {
  SweepConfig s;
  s.model_name = c.model;
  s.model_params = c.params;
  if (c.eps_list) s.eps_list = *c.eps_list;
  s.seeds = seeds_of(c, 10);
  if (c.k0_halfwidth) s.k0_halfwidth = *c.k0_halfwidth;
  if (c.grid_n) s.grid_points = *c.grid_n;
  if (c.method) s.method = parse_method_policy(*c.method);
  if (c.mc_threshold) s.mc_threshold = *c.mc_threshold;
  if (c.n_paths) s.n_paths = *c.n_paths;
  s.ds = ds_of(c);
  s.dt = dt_of(c);
  if (c.oracle_step) s.oracle_step = *c.oracle_step;
  if (c.set_offsets) {
    if (c.set_offsets->size() != 2) config_error("numeric.set must be [lo, hi] offsets from X1");
    s.set_offsets = std::make_pair((*c.set_offsets)[0], (*c.set_offsets)[1]);
  }
  s.threads = threads_of(c);
  s.validate();
  const auto report = run_sweep(s);
  const fs::path dir = out_of(c);
  json numeric{{"eps_list", s.eps_list}, {"seeds", s.seeds}, {"k0_halfwidth", s.k0_halfwidth},
               {"grid_n", s.grid_points}, {"method", to_string(s.method)}, {"mc_threshold", s.mc_threshold},
               {"n_paths", s.n_paths}, {"ds", s.ds}, {"dt", s.dt}, {"oracle_step", s.oracle_step},
               {"threads", s.threads}};
  if (s.set_offsets) numeric["set"] = {s.set_offsets->first, s.set_offsets->second};
  ensure_directory(dir);
  write_json_file(dir / "config.json", resolved_config(c, numeric));
  write_sweep_outputs(dir, report);
  return 0;
}

int cmd_crosscheck(const RunConfig& c) {
  const auto model = builtin_model(c.model, c.params);
  CrosscheckOptions opts;
  opts.dt = dt_of(c);
  opts.ds = ds_of(c);
  opts.n_paths = c.n_paths.value_or(20000);
  opts.grid_points = c.grid_n.value_or(41);
  opts.threads = threads_of(c);
  const double eps = eps_of(c);
  const auto seed = seed_of(c);
  const auto result = crosscheck_estimators(model, eps, seed, opts);
  const fs::path dir = out_of(c);
  ensure_directory(dir);
  write_json_file(dir / "config.json",
                  resolved_config(c, json{{"eps", eps}, {"dt", opts.dt}, {"ds", opts.ds}, {"n_paths", opts.n_paths},
                                          {"seed", seed}, {"grid_n", opts.grid_points}, {"threads", opts.threads}}));
  std::ostringstream os;
  os << "pair,tv,sup_dlogq\n";
  for (const auto& r : result.rows) os << r.pair << ',' << format_double(r.tv) << ',' << format_double(r.sup_dlogq) << '\n';
  write_csv(c, dir / "crosscheck.csv", os.str());
  for (const auto& d : result.densities) {
    std::ostringstream ds;
    write_density_csv(ds, d);
    write_csv(c, dir / (std::string("density_") + to_string(d.method) + ".csv"), ds.str());
  }
  write_meta(c, dir / "metadata.json", json{{"model", c.model}, {"eps", eps}, {"seed", seed}, {"X1", result.X1}});
  return 0;
}

int cmd_check_model(const RunConfig& c, std::ostream& out) {
  const auto model = builtin_model(c.model, c.params);
  const auto report = check_assumptions(model, default_probe_grid(model));
  json j;
  j["model"] = c.model;
  j["all_pass"] = report.all_pass();
  j["h0_estimate"] = report.h0_estimate;
  j["checks"] = json::array();
  for (const auto& ch : report.checks) {
    j["checks"].push_back(json{{"id", ch.id}, {"description", ch.description}, {"pass", ch.pass},
                               {"worst_x", ch.worst_x}, {"worst_value", ch.worst_value}});
  }
  j["lipschitz"] = json::object();
  for (const auto& [k, v] : report.lipschitz) j["lipschitz"][k] = v;
  const fs::path dir = out_of(c);
  ensure_directory(dir);
  write_json_file(dir / "config.json", resolved_config(c, json::object()));
  write_json_file(dir / "assumptions.json", j);
  out << (report.all_pass() ? "all assumption checks passed" : "some assumption checks failed") << '\n';
  return 0;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::InvalidArgument:
    case ErrorKind::InvalidModel: return 2;
    case ErrorKind::Io: return 4;
    default: return 3;
  }
}

int report_error(std::ostream& err, const std::string& kind, const std::string& message, int code) {
  err << json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << '\n';
  return code;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  if (argc >= 2 && std::string(argv[1]) == "--version") {
    out << "qldp " << QLDP_VERSION << " (C++" << (__cplusplus / 100 % 100) << ", " << __VERSION__ << ", "
        << QLDP_BUILD_TYPE << ")\n";
    return 0;
  }
  if (argc >= 2 && (std::string(argv[1]) == "--help" || std::string(argv[1]) == "-h")) {
    out << "usage: qldp <subcommand> [options]\nsubcommands:";
    for (const auto& s : kSubcommands) out << ' ' << s;
    out << "\nrun 'qldp <subcommand> --help' for options\n";
    return 0;
  }
  if (argc < 2) return report_error(err, "config", "missing subcommand", 2);
  RunConfig cfg;
  cfg.subcommand = argv[1];
  if (std::find(kSubcommands.begin(), kSubcommands.end(), cfg.subcommand) == kSubcommands.end()) {
    return report_error(err, "config", "unknown subcommand '" + cfg.subcommand + "'", 2);
  }

  CLI::App app{"qldp " + cfg.subcommand};
  std::string config_path;
  std::optional<double> eps, grid_min, grid_max, x1, z, dt, ds, c_param, alpha;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths, grid_n;
  std::optional<unsigned> threads;
  std::optional<std::string> out_dir, model, method, eps_list, seeds, T_list;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--eps", eps);
  app.add_option("--eps-list", eps_list, "comma-separated, decreasing");
  app.add_option("--seed", seed);
  app.add_option("--seeds", seeds, "comma-separated");
  app.add_option("--paths", paths);
  app.add_option("--grid-min", grid_min);
  app.add_option("--grid-max", grid_max);
  app.add_option("--grid-n", grid_n);
  app.add_option("--out", out_dir);
  app.add_option("--model", model);
  app.add_option("--method", method);
  app.add_option("--threads", threads);
  app.add_option("--x1", x1);
  app.add_option("--z", z);
  app.add_option("--T-list", T_list, "comma-separated horizons");
  app.add_option("--dt", dt);
  app.add_option("--ds", ds);
  app.add_option("--c", c_param);
  app.add_option("--alpha", alpha);

  try {
    app.parse(argc - 1, argv + 1);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    return report_error(err, "config", e.what(), 2);
  }

  try {
    if (!config_path.empty()) load_config_file(config_path, cfg);
    if (model) cfg.model = *model;
    if (c_param) cfg.params.c = *c_param;
    if (alpha) cfg.params.alpha = *alpha;
    if (eps) cfg.eps = *eps;
    if (eps_list) cfg.eps_list = parse_list<double>(*eps_list, "--eps-list");
    if (seed) cfg.seed = *seed;
    if (seeds) cfg.seeds = parse_list<std::uint64_t>(*seeds, "--seeds");
    if (paths) cfg.n_paths = *paths;
    if (grid_min) cfg.grid_min = *grid_min;
    if (grid_max) cfg.grid_max = *grid_max;
    if (grid_n) cfg.grid_n = *grid_n;
    if (out_dir) cfg.out = *out_dir;
    if (method) cfg.method = *method;
    if (threads) cfg.threads = *threads;
    if (x1) cfg.x1 = *x1;
    if (z) cfg.z = *z;
    if (T_list) cfg.T_list = parse_list<double>(*T_list, "--T-list");
    if (dt) cfg.dt = *dt;
    if (ds) cfg.ds = *ds;

    const auto& sub = cfg.subcommand;
    if (sub == "simulate") return cmd_simulate(cfg);
    if (sub == "filter") return cmd_filter(cfg);
    if (sub == "density") return cmd_density(cfg);
    if (sub == "rate") return cmd_rate(cfg);
    if (sub == "sweep") return cmd_sweep(cfg);
    if (sub == "crosscheck") return cmd_crosscheck(cfg);
    return cmd_check_model(cfg, out);
  } catch (const Error& e) {
    const int code = exit_code_for(e.kind());
    return report_error(err, to_string(e.kind()), e.what(), code);
  } catch (const fs::filesystem_error& e) {
    return report_error(err, "io", e.what(), 4);
  } catch (const std::exception& e) {
    return report_error(err, "internal", e.what(), 3);
  }
}

}  // namespace qldp::cli
