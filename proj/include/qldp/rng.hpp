#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace qldp {

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Stateless normal generator: draw k of stream (seed, stream_id) is a pure
/// function of the triple, so paths can be produced in any order or thread.
/// Internally SplitMix64 with jump-ahead, paired through Box-Muller.
class CounterNormal {
 public:
  CounterNormal(std::uint64_t seed, std::uint64_t stream_id)
      : key_(mix64(seed ^ mix64(stream_id + 0x632be59bd9b4e019ULL))) {}

  double uniform(std::uint64_t counter) const {
    const std::uint64_t bits = mix64(key_ + (counter + 1) * 0x9e3779b97f4a7c15ULL);
    // 53 random bits mapped into (0, 1).
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal(std::uint64_t k) const {
    const std::uint64_t pair = k >> 1;
    const double u1 = uniform(2 * pair);
    const double u2 = uniform(2 * pair + 1);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return (k & 1U) ? r * std::sin(angle) : r * std::cos(angle);
  }

 private:
  std::uint64_t key_;
};

}  // namespace qldp
