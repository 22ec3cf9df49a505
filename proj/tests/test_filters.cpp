#include <doctest.h>

#include <cmath>
#include <numbers>

#include "qldp/density.hpp"
#include "qldp/error.hpp"
#include "qldp/filters.hpp"
#include "qldp/models.hpp"
#include "qldp/picard.hpp"
#include "qldp/sde.hpp"

using namespace qldp;

namespace {

SamplePath affine_path(const TimeGrid& grid, double slope, double intercept = 0.0) {
  SamplePath p{grid, std::vector<double>(grid.n_steps + 1), "Y"};
  for (std::size_t k = 0; k <= grid.n_steps; ++k) p.values[k] = intercept + slope * grid.time(k);
  return p;
}

ReducedModel blind_ou() {
  auto m = builtin_model("linear-ou");
  m.h = [](double) { return 0.0; };
  m.h_deriv = [](double) { return 0.0; };
  m.linear.reset();
  return m;
}

}  // namespace

TEST_CASE("approximate filter tracks a constant signal") {
  const auto m = builtin_model("linear-pure");
  const double eps = 0.2, xstar = 1.5;
  const auto grid = TimeGrid::with_max_step(0.0, 1.0, 1e-3);
  const auto f = run_approximate_filter(affine_path(grid, xstar), m, eps);
  CHECK(f.M.values[0] == 0.0);
  CHECK(std::abs(f.M.back() - xstar) <= std::exp(-1.0 / (2 * eps)) * xstar + 10 * grid.dt() / eps);
}

TEST_CASE("approximate filter fixed point") {
  const auto m = builtin_model("linear-pure");
  const auto grid = TimeGrid::with_max_step(0.0, 1.0, 1e-3);
  const auto f = run_approximate_filter(affine_path(grid, 0.0), m, 0.3);
  for (double v : f.M.values) CHECK(v == 0.0);
}

TEST_CASE("approximate filter error scale on linear-ou") {
  const auto m = builtin_model("linear-ou");
  const double eps = 0.1;
  const auto grid = TimeGrid::with_max_step(0.0, 1.0, 1e-4);
  std::vector<double> err;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto p = simulate_pair(m, eps, grid, draw_initial_state(m, seed), seed);
    const auto f = run_approximate_filter(p.Y, m, eps);
    err.push_back(std::abs(f.M.back() - p.X.back()));
    // Boundedness: no blow-up beyond the driving paths' scale.
    double max_v = 0.0, v = 0.0;
    const auto dV = brownian(seed, streams::kObservation, grid);
    for (double d : dV.values) max_v = std::max(max_v, std::abs(v += d));
    CHECK(f.M.max_abs() <= p.X.max_abs() + 1.0 + 2.0 * max_v + 3.0);
  }
  CHECK(median(err) <= 3 * std::sqrt(eps));
}

TEST_CASE("approximate filter rejects a coarse step with advice") {
  const auto m = builtin_model("linear-pure");
  const auto grid = TimeGrid::with_max_step(0.0, 1.0, 1e-2);
  try {
    run_approximate_filter(affine_path(grid, 0.0), m, 0.1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NumericalInstability);
    CHECK(std::string(e.what()).find("0.1 * eps^2") != std::string::npos);
  }
  CHECK_THROWS_AS(run_approximate_filter(affine_path(grid, 0.0), m, 0.0), Error);
}

TEST_CASE("reverse and rescale") {
  const auto grid = TimeGrid::make(0.0, 1.0, 100);
  SUBCASE("constant") {
    const FilterTrajectory f{affine_path(grid, 0.0, 0.7), 0.3};
    const auto r = reverse_and_rescale(f, 1e-2);
    for (double v : r.m_tilde.values) CHECK(v == 0.7);
  }
  SUBCASE("affine") {
    const FilterTrajectory f{affine_path(grid, 1.0), 0.5};
    const auto r = reverse_and_rescale(f, 1e-2);
    CHECK(r.m_tilde.grid.t1 == 2.0);
    CHECK(r.ds() == doctest::Approx(1e-2));
    for (std::size_t k = 0; k <= r.m_tilde.grid.n_steps; ++k) {
      CHECK(std::abs(r.m_tilde.values[k] - (1.0 - 0.5 * r.m_tilde.grid.time(k))) <= 1e-12);
    }
    CHECK(r.m_tilde.values.front() == f.M.back());
  }
  SUBCASE("ds that does not divide the horizon is reduced") {
    const FilterTrajectory f{affine_path(grid, 1.0), 0.3};
    const auto r = reverse_and_rescale(f, 1e-2);
    CHECK(r.ds() <= 1e-2);
    CHECK(std::abs(r.m_tilde.grid.t1 - 1.0 / 0.3) <= 1e-12);
  }
}

TEST_CASE("reverse and rescale round trip on a filter path") {
  const auto m = builtin_model("tanh-nonlinear");
  const double eps = 0.25;
  const auto grid = TimeGrid::with_max_step(0.0, 1.0, 1e-3);
  const auto p = simulate_pair(m, eps, grid, 0.2, 4);
  const auto f = run_approximate_filter(p.Y, m, eps);
  const auto r = reverse_and_rescale(f, 1e-2);
  CHECK(r.m_tilde.values.front() == f.M.back());
  double max_step = 0.0;
  for (std::size_t k = 0; k < grid.n_steps; ++k) {
    max_step = std::max(max_step, std::abs(f.M.values[k + 1] - f.M.values[k]));
  }
  for (std::size_t k = 0; k <= grid.n_steps; ++k) {
    const double back = interpolate(r.m_tilde, (1.0 - grid.time(k)) / eps);
    CHECK(std::abs(back - f.M.values[k]) <= max_step + 1e-12);
  }
  // Grid-coincident points: s = 0.04 k / eps hits every fourth M node here.
  for (std::size_t k = 0; k <= r.m_tilde.grid.n_steps; ++k) {
    const double t = 1.0 - eps * r.m_tilde.grid.time(k);
    const double nodes = t / grid.dt();
    if (std::abs(nodes - std::round(nodes)) < 1e-9) {
      CHECK(std::abs(r.m_tilde.values[k] - f.M.values[static_cast<std::size_t>(std::llround(nodes))]) <= 1e-12);
    }
  }
}

TEST_CASE("Kalman-Bucy stationary variance, a = 0") {
  const double eps = 0.3, c = 1.0;
  const auto grid = TimeGrid::with_max_step(0.0, 1.0, 1e-3);
  const auto Y = simulate_pair(builtin_model("linear-pure"), eps, grid, 0.0, 2).Y;
  const auto post = kalman_bucy(Y, 0.0, c, eps, GaussianPosterior{0.0, eps / c, 0.0});
  CHECK(std::abs(post.variance - eps / c) <= 1e-6);
  CHECK(post.time == 1.0);
}

TEST_CASE("Kalman-Bucy Riccati root, a = c = 1") {
  const double eps = 0.1;
  const auto grid = TimeGrid::with_max_step(0.0, 1.0, 1e-4);
  const auto Y = simulate_pair(builtin_model("linear-ou"), eps, grid, 0.0, 3).Y;
  const auto post = kalman_bucy(Y, 1.0, 1.0, eps, GaussianPosterior{0.0, 1.0, 0.0});
  const double root = eps * eps * (-1.0 + std::sqrt(1.0 + 1.0 / (eps * eps)));
  CHECK(std::abs(post.variance / root - 1.0) <= 1e-3);
}

TEST_CASE("Kalman-Bucy variance approaches eps/c monotonically") {
  const double eps = 0.3;
  double prev_gap = INFINITY;
  for (std::size_t n : {50, 100, 200, 400, 800}) {
    const auto grid = TimeGrid::make(0.0, static_cast<double>(n) / 800.0, n);
    const auto post = kalman_bucy(affine_path(grid, 0.0), 0.0, 1.0, eps, GaussianPosterior{0.0, 1.0, 0.0});
    CHECK(post.variance > 0.0);
    const double gap = post.variance - eps;
    CHECK(gap >= 0.0);
    CHECK(gap < prev_gap);
    prev_gap = gap;
  }
}

TEST_CASE("Kalman-Bucy zero innovation") {
  const double m0 = 0.8, c = 2.0;
  const auto grid = TimeGrid::make(0.0, 1.0, 1000);
  const auto post = kalman_bucy(affine_path(grid, c * m0), 0.0, c, 0.3, GaussianPosterior{m0, 0.5, 0.0});
  CHECK(std::abs(post.mean - m0) <= 1e-12);
}

TEST_CASE("Kalman-Bucy instability and argument errors") {
  const auto grid = TimeGrid::make(0.0, 1.0, 10);
  try {
    kalman_bucy(affine_path(grid, 0.0), 0.0, 1.0, 0.01, GaussianPosterior{0.0, 1.0, 0.0});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NumericalInstability);
    CHECK(std::string(e.what()).find("smaller dt") != std::string::npos);
  }
  CHECK_THROWS_AS(kalman_bucy(affine_path(grid, 0.0), 0.0, 0.0, 0.3, {}), Error);
}

TEST_CASE("grid Bayes agrees with Kalman-Bucy on linear-ou") {
  const auto m = builtin_model("linear-ou");
  const double eps = 0.3;
  const auto grid = TimeGrid::with_max_step(0.0, 1.0, 1e-3);
  const UniformGrid xgrid(-4.0, 4.0, 801);
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto p = simulate_pair(m, eps, grid, draw_initial_state(m, seed), seed);
    const auto gb = grid_bayes_filter(p.Y, m, eps, xgrid, 1e-3);
    const auto post = kalman_bucy(p.Y, 1.0, 1.0, eps, GaussianPosterior{0.0, 1.0, 0.0});
    CHECK(total_variation(gb, gaussian_density(post, xgrid, eps)) <= 0.02);
    const auto d = gb.density();
    double mass = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) mass += ((i == 0 || i + 1 == d.size()) ? 0.5 : 1.0) * d[i];
    CHECK(std::abs(mass * xgrid.step() - 1.0) <= 1e-8);
    for (double v : d) CHECK(v >= 0.0);
  }
}

TEST_CASE("grid Bayes without information is the propagated prior") {
  const auto m = blind_ou();
  const auto grid = TimeGrid::with_max_step(0.0, 1.0, 1e-3);
  const UniformGrid xgrid(-6.0, 6.0, 601);
  const auto gb = grid_bayes_filter(affine_path(grid, 0.0), m, 0.3, xgrid, 1e-3);
  const double var = (1.0 + std::exp(-2.0)) / 2.0;
  std::vector<double> lr(xgrid.size());
  for (std::size_t i = 0; i < xgrid.size(); ++i) lr[i] = -xgrid[i] * xgrid[i] / (2 * var);
  CHECK(total_variation(gb, make_density(xgrid, lr, 0.3, DensityMethod::Kalman)) <= 2e-3);
  CHECK(gb.flags.empty());

  // One prediction step conserves interior mass.
  const GridTransition tr(m, xgrid, 1e-3);
  std::vector<double> mass(xgrid.size(), 0.0);
  for (std::size_t i = 200; i <= 400; ++i) mass[i] = 1.0 / 201.0;
  double total = 0.0;
  for (double v : tr.predict(mass)) total += v;
  CHECK(std::abs(total - 1.0) <= 1e-8);
}

TEST_CASE("grid Bayes single step matches brute-force Bayes") {
  auto m = builtin_model("linear-pure");
  const double mu0 = 0.2, sd0 = 0.05, eps = 0.3, dt = 0.01;
  m.log_p0 = [=](double x) { return -0.5 * (x - mu0) * (x - mu0) / (sd0 * sd0); };
  m.gaussian_prior.reset();
  const auto grid = TimeGrid::make(0.0, dt, 1);
  SamplePath Y{grid, {0.0, 0.5 * dt}, "Y"};
  const UniformGrid xgrid(-1.0, 1.5, 1001);
  const auto gb = grid_bayes_filter(Y, m, eps, xgrid, dt);

  const std::size_t n = xgrid.size();
  std::vector<double> post(n);
  double z = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double x = xgrid[j];
    const double innov = 0.5 * dt - x * dt;
    post[j] = std::exp(m.log_p0(x) - innov * innov / (2 * eps * eps * dt));
    z += post[j];
  }
  std::vector<double> pred(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += std::exp(-0.5 * std::pow(xgrid[j] - xgrid[i], 2) / dt);
    for (std::size_t j = 0; j < n; ++j) {
      pred[j] += post[i] / z * std::exp(-0.5 * std::pow(xgrid[j] - xgrid[i], 2) / dt) / row;
    }
  }
  double mean_bf = 0.0, mass_bf = 0.0, mean_gb = 0.0, mass_gb = 0.0;
  const auto d = gb.density();
  for (std::size_t j = 0; j < n; ++j) {
    mean_bf += pred[j] * xgrid[j];
    mass_bf += pred[j];
    mean_gb += d[j] * xgrid[j];
    mass_gb += d[j];
  }
  mean_bf /= mass_bf;
  mean_gb /= mass_gb;
  CHECK(mean_bf > mu0);
  CHECK(std::abs(mean_gb - mean_bf) <= 1e-8);
}

TEST_CASE("grid Bayes boundary diagnostics") {
  const auto m = builtin_model("linear-ou");
  const auto grid = TimeGrid::with_max_step(0.0, 1.0, 1e-3);
  const auto p = simulate_pair(m, 0.3, grid, 0.0, 1);
  const auto narrow = grid_bayes_filter(p.Y, m, 0.3, UniformGrid(1.0, 1.5, 51), 1e-3);
  CHECK(std::find(narrow.flags.begin(), narrow.flags.end(), "boundary-leak") != narrow.flags.end());
  try {
    grid_bayes_filter(p.Y, m, 0.3, UniformGrid(40.0, 41.0, 11), 1e-3);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::GridTooSmall);
    CHECK(std::string(e.what()).find("40") != std::string::npos);
  }
  CHECK_THROWS_AS(grid_bayes_filter(p.Y, m, 0.3, UniformGrid(-4, 4, 81), 1.5e-3), Error);
}

TEST_CASE("filter convergence statistics") {
  const auto m = builtin_model("linear-pure");
  const auto stats = check_filter_convergence(m, {0.3, 0.2, 0.1}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15,
                                                                    16, 17, 18, 19, 20},
                                              1e-3);
  REQUIRE(stats.entries.size() == 3);
  CHECK(stats.entries[0].T_eps == doctest::Approx(1.20397).epsilon(1e-5));
  for (const auto& e : stats.entries) {
    CHECK(e.sup_dev.size() == 20);
    CHECK(std::isfinite(e.fitted_C));
    CHECK(e.T_eps == std::log(1.0 / e.eps));
  }
  CHECK(stats.entries[1].median_sup_dev < stats.entries[0].median_sup_dev);
  CHECK(stats.entries[2].median_sup_dev < stats.entries[1].median_sup_dev);
  const double c1 = stats.entries[1].fitted_C, c2 = stats.entries[2].fitted_C;
  CHECK(std::abs(c1 - c2) / std::min(c1, c2) < 0.5);
  CHECK_THROWS_AS(check_filter_convergence(m, {0.1, 0.2}, {1}, 1e-3), Error);
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
}
