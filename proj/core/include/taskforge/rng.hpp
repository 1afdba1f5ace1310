#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace taskforge {

// Deterministic, platform-independent generator (splitmix64 core). Every
// consumer draws a predictable number of values, which keeps evaluation
// streams reproducible and composable: running two diagrams in sequence
// consumes the same draws as running their composite.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller; always consumes exactly two draws.
  double gaussian() {
    double u1 = double((next_u64() >> 11) + 1) * 0x1.0p-53; // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // Independent stream for a labelled sub-purpose of this seed.
  Rng fork(std::uint64_t salt) {
    Rng r(state_ ^ (0x5851f42d4c957f2dull * (salt + 1)));
    r.next_u64();
    return r;
  }

private:
  std::uint64_t state_;
};

} // namespace taskforge
