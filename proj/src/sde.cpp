#include "qldp/sde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <cstring>
#include <ostream>

#include "qldp/error.hpp"
#include "qldp/io.hpp"
#include "qldp/rng.hpp"

namespace qldp {

TimeGrid TimeGrid::make(double t0, double t1, std::size_t n_steps) {
  TimeGrid g{t0, t1, n_steps};
  g.validate();
  return g;
}

TimeGrid TimeGrid::with_max_step(double t0, double t1, double max_step) {
  if (!(max_step > 0.0)) throw Error(ErrorKind::InvalidArgument, "time step must be positive");
  const double span = t1 - t0;
  // Tolerate ratios like 1/1e-3 = 999.9999999999999.
  const auto n = static_cast<std::size_t>(std::ceil(span / max_step * (1.0 - 1e-12)));
  return make(t0, t1, std::max<std::size_t>(n, 1));
}

void TimeGrid::validate() const {
  if (n_steps == 0 || !(t1 > t0) || !std::isfinite(t0) || !std::isfinite(t1)) {
    throw Error(ErrorKind::InvalidArgument, "time grid needs t1 > t0 and at least one step");
  }
}

double SamplePath::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

void fill_increments(std::uint64_t seed, std::uint64_t stream_id, double dt, std::uint64_t first,
                     std::span<double> out) {
  const CounterNormal rng(seed, stream_id);
  const double scale = std::sqrt(dt);
  std::size_t i = 0;
  std::uint64_t k = first;
  // Odd start: take the second half of a Box-Muller pair on its own.
  if (!out.empty() && (k & 1U)) {
    out[i++] = scale * rng.normal(k++);
  }
  for (; i + 1 < out.size(); i += 2, k += 2) {
    const double u1 = rng.uniform(k);
    const double u2 = rng.uniform(k + 1);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    out[i] = scale * (r * std::cos(angle));
    out[i + 1] = scale * (r * std::sin(angle));
  }
  if (i < out.size()) out[i] = scale * rng.normal(k);
}

BrownianIncrements brownian(std::uint64_t seed, std::uint64_t stream_id, const TimeGrid& grid) {
  grid.validate();
  BrownianIncrements inc{seed, stream_id, grid, std::vector<double>(grid.n_steps)};
  fill_increments(seed, stream_id, grid.dt(), 0, inc.values);
  return inc;
}

namespace {

[[noreturn]] void diverged(const std::string& what, std::size_t step) {
  throw Error(ErrorKind::SimulationDiverged, what + " became non-finite at step " + std::to_string(step));
}

}  // namespace

SignalObservation simulate_pair(const ReducedModel& model, double eps, const TimeGrid& grid, double x0,
                                std::uint64_t seed, std::uint64_t observation_stream) {
  grid.validate();
  if (!(eps >= 0.0)) throw Error(ErrorKind::InvalidArgument, "eps must be non-negative");
  const auto dB = brownian(seed, streams::kSignal, grid);
  const auto dV = brownian(seed, observation_stream, grid);
  const double dt = grid.dt();
  SignalObservation out;
  out.X = SamplePath{grid, std::vector<double>(grid.n_steps + 1), "X"};
  out.Y = SamplePath{grid, std::vector<double>(grid.n_steps + 1), "Y"};
  double x = x0;
  double y = 0.0;
  out.X.values[0] = x;
  out.Y.values[0] = y;
  for (std::size_t k = 0; k < grid.n_steps; ++k) {
    const double drift = model.b(x);
    const double obs = model.h(x);
    x += drift * dt + dB.values[k];
    y += obs * dt + eps * dV.values[k];
    if (!std::isfinite(x)) diverged("signal X", k + 1);
    if (!std::isfinite(y)) diverged("observation Y", k + 1);
    out.X.values[k + 1] = x;
    out.Y.values[k + 1] = y;
  }
  return out;
}

SamplePath simulate_diffusion(const TimeDrift& drift, double noise_scale, const TimeGrid& grid, double x0,
                              std::span<const double> increments) {
  grid.validate();
  if (increments.size() < grid.n_steps) {
    throw Error(ErrorKind::InvalidArgument, "fewer increments than time steps");
  }
  const double dt = grid.dt();
  SamplePath path{grid, std::vector<double>(grid.n_steps + 1), "diffusion"};
  double x = x0;
  path.values[0] = x;
  for (std::size_t k = 0; k < grid.n_steps; ++k) {
    x += drift(grid.time(k), x) * dt + noise_scale * increments[k];
    if (!std::isfinite(x)) diverged("diffusion", k + 1);
    path.values[k + 1] = x;
  }
  return path;
}

double draw_initial_state(const ReducedModel& model, std::uint64_t seed) {
  const CounterNormal rng(seed, streams::kSignal);
  if (model.gaussian_prior) {
    return model.gaussian_prior->mean +
           std::sqrt(model.gaussian_prior->variance) * rng.normal(streams::kInitialStateCounter);
  }
  // Inverse CDF of the tabulated prior over its support window.
  constexpr std::size_t kNodes = 4001;
  const double lo = model.support.lo;
  const double step = model.support.width() / static_cast<double>(kNodes - 1);
  std::vector<double> cdf(kNodes, 0.0);
  double prev = std::exp(model.log_p0(lo));
  for (std::size_t i = 1; i < kNodes; ++i) {
    const double cur = std::exp(model.log_p0(lo + static_cast<double>(i) * step));
    cdf[i] = cdf[i - 1] + 0.5 * (prev + cur) * step;
    prev = cur;
  }
  const double u = rng.uniform(streams::kInitialStateCounter) * cdf.back();
  const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
  const std::size_t i = std::clamp<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), 1, kNodes - 1);
  const double frac = (u - cdf[i - 1]) / std::max(cdf[i] - cdf[i - 1], 1e-300);
  return lo + (static_cast<double>(i - 1) + frac) * step;
}

void write_path_csv(std::ostream& os, const SamplePath& path) {
  os << "t,value\n";
  for (std::size_t k = 0; k < path.values.size(); ++k) {
    os << format_double(path.grid.time(k)) << ',' << format_double(path.values[k]) << '\n';
  }
}

std::uint64_t path_hash(const SamplePath& path) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : path.values) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char byte : bytes) {
      h ^= byte;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace qldp
