#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace anatomia {

/// Seeded random stream used by every randomized operation.
///
/// Distributions are implemented here rather than taken from <random> so that
/// sequences are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed), origin_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] (inclusive).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller (one value per call, the pair's second
  /// half is cached).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Independent child stream keyed by (construction seed, a, b). Does not
  /// advance this stream, so derived streams are stable regardless of how
  /// much of the parent has been consumed.
  [[nodiscard]] Rng derive(std::uint64_t a, std::uint64_t b = 0) const;

  [[nodiscard]] std::string serialize() const;
  static Rng deserialize(const std::string& state);

  friend bool operator==(const Rng& x, const Rng& y) {
    return x.engine_ == y.engine_ && x.has_spare_ == y.has_spare_ && x.spare_ == y.spare_ &&
           x.origin_ == y.origin_;
  }

  /// Seed stream derived deterministically from a base seed and indices.
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
  std::uint64_t origin_ = 0;
};

}  // namespace anatomia
