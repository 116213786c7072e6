#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace clearfield {

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Seed of an independent stream identified by (seed, purpose tag, index).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0);

/// Seedable 64-bit generator (mt19937_64) with distributions implemented
/// here rather than through <random>, whose distribution algorithms are
/// implementation-defined. Same seed gives the same draws on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  static Rng stream(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) {
    return Rng(derive_seed(seed, tag, index));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi], unbiased.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal (Box-Muller, one value per call).
  double normal();

  /// Poisson-distributed count with the given mean.
  std::int64_t poisson(double mean);

 private:
  std::mt19937_64 engine_;
};

}  // namespace clearfield
