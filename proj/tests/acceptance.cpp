// Acceptance suite: one PASS/FAIL line per criterion.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qldp/cli.hpp"
#include "qldp/experiments.hpp"
#include "qldp/filters.hpp"
#include "qldp/models.hpp"
#include "qldp/picard.hpp"
#include "qldp/rate.hpp"
#include "qldp/sde.hpp"

using namespace qldp;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

std::string list(const std::map<double, double>& by_eps) {
  std::string s;
  for (auto it = by_eps.rbegin(); it != by_eps.rend(); ++it) {
    if (!s.empty()) s += ", ";
    s += "eps=" + fmt(it->first, 3) + ":" + fmt(it->second);
  }
  return s;
}

bool strictly_decreasing_in_eps(const std::map<double, double>& by_eps) {
  // Map is ordered by increasing eps; the error must grow with eps.
  double prev = -INFINITY;
  for (const auto& [eps, v] : by_eps) {
    if (!(v > prev)) return false;
    prev = v;
  }
  return true;
}

std::vector<std::uint64_t> seeds(std::size_t n) {
  std::vector<std::uint64_t> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = i + 1;
  return s;
}

fs::path g_work = fs::temp_directory_path() / "qldp_acceptance";

// ---------------------------------------------------------------------------

Verdict oracle_agreement() {
  const auto model = builtin_model("linear-ou");
  const double eps = 0.3;
  const auto grid = TimeGrid::with_max_step(0.0, 1.0, 1e-3);
  const auto pair = simulate_pair(model, eps, grid, draw_initial_state(model, 1), 1);
  const UniformGrid xgrid(-4.0, 4.0, 801);
  const auto gb = grid_bayes_filter(pair.Y, model, eps, xgrid, 1e-3);
  const auto post = kalman_bucy(pair.Y, 1.0, 1.0, eps, GaussianPosterior{0.0, 1.0, 0.0});
  const double tv = total_variation(gb, gaussian_density(post, xgrid, eps));
  return {tv <= 0.02, "TV(grid-bayes, kalman) = " + fmt(tv) + " (<= 0.02)"};
}

Verdict picard_representation() {
  const auto model = builtin_model("linear-pure");
  const double eps = 0.3;
  const auto grid = TimeGrid::with_max_step(0.0, 1.0, 1e-3);
  int good = 0;
  double worst = 0.0;
  for (std::uint64_t seed : seeds(10)) {
    const auto pair = simulate_pair(model, eps, grid, draw_initial_state(model, seed), seed);
    const double X1 = pair.X.back();
    const UniformGrid xgrid(X1 - 1.5, X1 + 1.5, 41);
    const auto tilde = reverse_and_rescale(run_approximate_filter(pair.Y, model, eps), 1e-2);
    PicardOptions opt;
    opt.n_paths = 20000;
    opt.seed = seed;
    const auto est = log_rho_estimate(xgrid, tilde, model, opt);
    const auto post = kalman_bucy(pair.Y, 0.0, 1.0, eps, GaussianPosterior{0.0, 1.0, 0.0});
    const double tv = total_variation(est.density, gaussian_density(post, xgrid, eps));
    worst = std::max(worst, tv);
    good += tv <= 0.15;
  }
  return {good >= 8, std::to_string(good) + "/10 seeds with TV(picard-mc, kalman) <= 0.15 (need 8), worst TV = " +
                         fmt(worst)};
}

SweepReport g_linear_sweep;

Verdict ldp_trend_linear() {
  SweepConfig cfg;
  cfg.model_name = "linear-ou";
  cfg.method = MethodPolicy::Kalman;
  cfg.set_offsets = std::make_pair(0.5, 1.0);
  g_linear_sweep = run_sweep(cfg);
  write_sweep_outputs(g_work / "criterion3", g_linear_sweep);
  const auto& med = g_linear_sweep.median_sup_err;
  const bool mono = strictly_decreasing_in_eps(med);
  const double last = med.at(0.05);
  return {mono && last <= 0.25 && med.size() == 4, "median sup-err " + list(med) + "; strictly decreasing: " +
                                                       (mono ? "yes" : "no") + "; at eps=0.05 " + fmt(last) +
                                                       " (<= 0.25)"};
}

Verdict ldp_trend_nonlinear() {
  SweepConfig cfg;
  cfg.model_name = "tanh-nonlinear";
  cfg.method = MethodPolicy::GridBayes;
  const auto report = run_sweep(cfg);
  write_sweep_outputs(g_work / "criterion4", report);
  const auto& med = report.median_sup_err;
  const bool mono = strictly_decreasing_in_eps(med);
  const double last = med.at(0.05);
  return {mono && last <= 0.35 && med.size() == 4, "median sup-err " + list(med) + "; strictly decreasing: " +
                                                       (mono ? "yes" : "no") + "; at eps=0.05 " + fmt(last) +
                                                       " (<= 0.35)"};
}

Verdict set_form() {
  if (g_linear_sweep.cells.empty()) ldp_trend_linear();
  const double err = g_linear_sweep.median_set_err.at(0.05);
  return {err <= 0.15, "median |eps log q(G) + J(X1+0.5, X1)| at eps=0.05 = " + fmt(err) + " (<= 0.15)"};
}

Verdict variational_identities() {
  const std::vector<std::string> names = builtin_model_names();
  double worst_equil = 0.0, worst_v = 0.0;
  bool all_converged = true;
  for (const auto& name : names) {
    const auto m = builtin_model(name);
    for (double X1 : {-0.7, 0.0, 0.5}) {
      const auto r = solve_I_T(ActionProblem{X1, X1, 20.0, X1, 256, &m});
      worst_equil = std::max(worst_equil, std::abs(r.I_value));
      all_converged &= r.converged;
      std::vector<double> xs;
      for (int i = 0; i <= 20; ++i) xs.push_back(X1 - 1.0 + 0.1 * i);
      for (const auto& row : v_limit_check(xs, X1, {20.0}, m)) {
        worst_v = std::max(worst_v, row.abs_err);
        all_converged &= row.converged;
      }
    }
  }
  struct Case {
    std::string model;
    double x, z, X1;
  };
  const std::vector<Case> cases{{"linear-pure", 1.0, 0.5, 0.0}, {"linear-ou", -0.5, 0.8, 0.3},
                                {"tanh-nonlinear", 1.0, 0.2, 0.5}};
  double worst_res = 0.0;
  bool decreasing = true;
  std::string residuals;
  for (const auto& c : cases) {
    const auto m = builtin_model(c.model);
    double prev = INFINITY;
    for (double T : {8.0, 12.0, 16.0, 20.0}) {
      const auto r = corollary_decomposition_check(c.x, c.z, T, c.X1, m);
      all_converged &= r.converged;
      decreasing &= r.residual < prev;
      prev = r.residual;
      if (T == 20.0) worst_res = std::max(worst_res, r.residual);
    }
    residuals += (residuals.empty() ? "" : ", ") + c.model + ":" + fmt(prev);
  }
  const bool pass = worst_equil <= 1e-8 && worst_v <= 1e-2 && worst_res <= 2e-2 && decreasing && all_converged;
  return {pass, "max|I_T(X1,X1)| = " + fmt(worst_equil) + " (<= 1e-8); max VT error at T=20 = " + fmt(worst_v) +
                    " (<= 1e-2); decomposition residual at T=20 [" + residuals + "] (<= 2e-2), decreasing from T=8: " +
                    (decreasing ? "yes" : "no") + "; solver converged: " + (all_converged ? "yes" : "no")};
}

Verdict gradient_check() {
  std::mt19937_64 rng(20260101);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::uniform_real_distribution<double> horizon(0.5, 20.0);
  std::uniform_int_distribution<std::size_t> nodes(4, 64);
  const auto names = builtin_model_names();
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = builtin_model(names[static_cast<std::size_t>(trial) % names.size()]);
    const std::size_t n = nodes(rng);
    std::vector<double> path(n + 1);
    for (auto& v : path) v = u(rng);
    const ActionProblem p{path.front(), path.back(), horizon(rng), u(rng), n, &m};
    std::vector<double> g;
    control_cost(path, p, &g);
    double err = 0.0, scale = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
      auto plus = path, minus = path;
      plus[k] += 1e-6;
      minus[k] -= 1e-6;
      const double fd = (control_cost(plus, p) - control_cost(minus, p)) / 2e-6;
      err = std::max(err, std::abs(fd - g[k]));
      scale = std::max(scale, std::abs(fd));
    }
    worst = std::max(worst, err / std::max(scale, 1e-12));
  }
  return {worst <= 1e-5, "max relative gradient error over 100 configurations = " + fmt(worst) + " (<= 1e-5)"};
}

Verdict algebraic_invariants() {
  const auto lin = builtin_model("linear-pure");
  const PicardIntegrands pl(lin, 0.2);
  double g2_lin = 0.0;
  for (int i = 0; i <= 100; ++i) {
    for (int j = 0; j <= 100; ++j) g2_lin = std::max(g2_lin, std::abs(pl.g2(-3.0 + 0.06 * i, -3.0 + 0.06 * j)));
  }
  double square = 0.0, spread = 0.0;
  for (const auto& name : builtin_model_names()) {
    const auto m = builtin_model(name);
    const PicardIntegrands pi(m, 0.2);
    for (int i = 0; i <= 100; ++i) {
      const double z = -3.0 + 0.06 * i;
      const double r = m.h(z) - z * m.h_deriv(z);
      square = std::max(square, std::abs(pi.g2(z, z) - r * r / 2));
    }
    for (double X1 : {-1.1, 0.0, 0.45}) {
      double lo = INFINITY, hi = -INFINITY;
      for (int i = 0; i <= 100; ++i) {
        const double x = X1 - 2.0 + 0.04 * i;
        const double v = m.h(X1) * x - m.h(x) * X1 - pi.F(x, X1) + rate_J(x, X1, m);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      spread = std::max(spread, hi - lo);
    }
  }
  const bool pass = g2_lin <= 1e-12 && square <= 1e-10 && spread <= 1e-8;
  return {pass, "max|g2| for h=id = " + fmt(g2_lin) + " (<= 1e-12); square identity error = " + fmt(square) +
                    " (<= 1e-10); bookkeeping spread = " + fmt(spread) + " (<= 1e-8)"};
}

Verdict filter_lemma() {
  const auto stats = check_filter_convergence(builtin_model("linear-pure"), {0.3, 0.2, 0.1}, seeds(20), 1e-3);
  bool decreasing = true;
  std::string meds;
  for (std::size_t i = 0; i < stats.entries.size(); ++i) {
    meds += (i ? ", " : "") + std::string("eps=") + fmt(stats.entries[i].eps, 3) + ":" +
            fmt(stats.entries[i].median_sup_dev);
    if (i > 0) decreasing &= stats.entries[i].median_sup_dev < stats.entries[i - 1].median_sup_dev;
  }
  const double c1 = stats.entries[1].fitted_C, c2 = stats.entries[2].fitted_C;
  const double variation = std::abs(c1 - c2) / std::min(c1, c2);
  return {decreasing && variation < 0.5, "median sup|m~ - X1| " + meds + "; decreasing in 1/eps: " +
                                             (decreasing ? "yes" : "no") + "; fitted C " + fmt(c1) + " vs " + fmt(c2) +
                                             ", variation " + fmt(variation) + " (< 0.5)"};
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "qldp");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = qldp::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

Verdict determinism() {
  const std::vector<std::vector<std::string>> runs{
      {"simulate", "--model", "tanh-nonlinear", "--eps", "0.2", "--seed", "4"},
      {"filter", "--model", "linear-ou", "--eps", "0.2", "--eps-list", "0.3,0.2", "--seeds", "1,2,3"},
      {"density", "--model", "tanh-nonlinear", "--eps", "0.3", "--seed", "5", "--paths", "2000"},
      {"density", "--model", "linear-ou", "--eps", "0.1", "--method", "grid-bayes", "--seed", "5"},
      {"rate", "--model", "tanh-nonlinear", "--x1", "0.3", "--T-list", "4,8"},
      {"sweep", "--model", "tanh-nonlinear", "--eps-list", "0.3,0.1", "--seeds", "1,2,3", "--paths", "300"},
      {"crosscheck", "--model", "linear-ou", "--eps", "0.3", "--paths", "1000", "--seed", "2"},
      {"check-model", "--model", "linear-ou"}};
  std::size_t files = 0;
  std::vector<std::string> mismatches;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    std::vector<fs::path> dirs;
    for (const char* threads : {"1", "1", "4"}) {
      const fs::path dir = g_work / "determinism" / (std::to_string(r) + "_" + std::to_string(dirs.size()));
      fs::remove_all(dir);
      auto args = runs[r];
      args.insert(args.end(), {"--threads", threads, "--out", dir.string()});
      if (cli(args) != 0) return {false, "run failed: " + runs[r][0]};
      dirs.push_back(dir);
    }
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
      const auto name = entry.path().filename();
      if (name == "config.json") continue;  // echoes the output directory and thread count
      ++files;
      const auto ref = slurp(entry.path());
      for (std::size_t k = 1; k < dirs.size(); ++k) {
        if (slurp(dirs[k] / name) != ref) mismatches.push_back(runs[r][0] + "/" + name.string());
      }
    }
  }
  std::string detail = std::to_string(files) + " output files across " + std::to_string(runs.size()) +
                       " configs compared over reruns and --threads 1/4";
  if (!mismatches.empty()) detail += "; mismatches: " + mismatches.front();
  return {mismatches.empty() && files > 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work-dir" && i + 1 < argc) {
      g_work = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      only.insert(std::stoi(argv[++i]));
    } else {
      std::cerr << "usage: qldp_acceptance [--work-dir DIR] [--only N]...\n";
      return 2;
    }
  }
  fs::create_directories(g_work);

  struct Criterion {
    int id;
    std::string name;
    double time_limit_s;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "oracle agreement (linear)", 60, oracle_agreement},
      {2, "path-integral estimator vs Kalman-Bucy", 600, picard_representation},
      {3, "LDP trend, linear-ou with kalman", 600, ldp_trend_linear},
      {4, "LDP trend, tanh-nonlinear with grid-bayes", 1800, ldp_trend_nonlinear},
      {5, "set-form LDP, linear-ou", 600, set_form},
      {6, "variational identities", 0, variational_identities},
      {7, "action gradient check", 0, gradient_check},
      {8, "algebraic invariants", 0, algebraic_invariants},
      {9, "filter convergence trend", 0, filter_lemma},
      {10, "determinism across reruns and thread counts", 0, determinism},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string timing = fmt(secs, 3) + " s";
    if (c.time_limit_s > 0) {
      timing += " (limit " + fmt(c.time_limit_s, 4) + " s)";
      if (secs > c.time_limit_s) v.pass = false;
    }
    failures += v.pass ? 0 : 1;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << c.id << " [" << c.name << "]: " << v.detail << "; "
              << timing << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
