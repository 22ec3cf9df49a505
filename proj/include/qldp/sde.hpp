#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "qldp/models.hpp"

namespace qldp {

/// Stream assignment for everything driven by one seed.
namespace streams {
inline constexpr std::uint64_t kSignal = 0;       // B, drives X
inline constexpr std::uint64_t kObservation = 1;  // V, drives Y
inline constexpr std::uint64_t kPathBase = 2;     // W~ of Monte Carlo path j is 2 + j
/// In an eps sweep the observation noise of the e-th eps uses
/// kObservation + e * kSweepObservationStride, so e = 0 coincides with a plain run.
inline constexpr std::uint64_t kSweepObservationStride = std::uint64_t{1} << 40;
/// Counter within the signal stream reserved for drawing X_0 from p_0.
inline constexpr std::uint64_t kInitialStateCounter = ~std::uint64_t{0} - 1;
}  // namespace streams

struct TimeGrid {
  double t0 = 0.0;
  double t1 = 1.0;
  std::size_t n_steps = 1000;

  static TimeGrid make(double t0, double t1, std::size_t n_steps);
  /// Grid on [t0, t1] whose step is the largest value <= max_step that divides the span.
  static TimeGrid with_max_step(double t0, double t1, double max_step);

  double dt() const { return (t1 - t0) / static_cast<double>(n_steps); }
  double time(std::size_t k) const { return t0 + static_cast<double>(k) * dt(); }
  void validate() const;
};

struct BrownianIncrements {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  TimeGrid grid;
  std::vector<double> values;
};

struct SamplePath {
  TimeGrid grid;
  std::vector<double> values;
  std::string label;

  double back() const { return values.back(); }
  double max_abs() const;
};

struct SignalObservation {
  SamplePath X;
  SamplePath Y;
};

BrownianIncrements brownian(std::uint64_t seed, std::uint64_t stream_id, const TimeGrid& grid);

/// Writes sqrt(dt) * N(0,1) draws k = first, first + 1, ... of the stream into out.
void fill_increments(std::uint64_t seed, std::uint64_t stream_id, double dt, std::uint64_t first,
                     std::span<double> out);

/// Euler-Maruyama for the signal/observation pair with Y_0 = 0. X uses the
/// signal stream of `seed`, V uses `observation_stream`.
SignalObservation simulate_pair(const ReducedModel& model, double eps, const TimeGrid& grid, double x0,
                                std::uint64_t seed,
                                std::uint64_t observation_stream = streams::kObservation);

using TimeDrift = std::function<double(double t, double x)>;

/// x_{k+1} = x_k + drift(t_k, x_k) dt + noise_scale * increments[k].
SamplePath simulate_diffusion(const TimeDrift& drift, double noise_scale, const TimeGrid& grid, double x0,
                              std::span<const double> increments);

/// X_0 ~ p_0 from the reserved counter of the signal stream.
double draw_initial_state(const ReducedModel& model, std::uint64_t seed);

void write_path_csv(std::ostream& os, const SamplePath& path);

/// FNV-1a over the raw bytes of the values; used to assert bit-identical paths.
std::uint64_t path_hash(const SamplePath& path);

}  // namespace qldp
