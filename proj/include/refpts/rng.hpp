#pragma once

#include <cstdint>
#include <random>

namespace refpts {

/// splitmix64 finalizer over (seed, stream); used to derive decorrelated
/// sub-stream seeds from a master seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Deterministic random source. The distribution layer is hand-rolled on top
/// of mt19937_64 because std::uniform_real_distribution / normal_distribution
/// are not specified bit-for-bit across standard library implementations, and
/// frozen report fixtures depend on reproducible draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform01();

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Gaussian via Box-Muller; consumes two uniforms every other call.
  double normal(double mean, double sigma);

  bool bernoulli(double p) { return uniform01() < p; }

  /// Independent generator seeded from this generator's seed and a stream id.
  Rng fork(std::uint64_t stream) const { return Rng(mix_seed(seed_, stream)); }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace refpts
