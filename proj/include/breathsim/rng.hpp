#pragma once

#include <cstdint>
#include <random>

namespace breathsim {

/// Seeded 64-bit generator with portable uniform and Gaussian draws.
///
/// std::*_distribution output differs between standard libraries, so the
/// conversions are done here; a given seed yields the same stream on every
/// platform. Independent streams are derived with derive_seed().
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();

  /// Standard normal (Box-Muller, second variate cached).
  double normal();

  /// Exponential with the given rate, by inverse CDF: -ln(1 - u) / rate.
  double exponential(double rate);

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

/// SplitMix64 finalizer; mixes a base seed with a stream index.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace breathsim
