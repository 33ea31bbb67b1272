#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace swnet {

/// Seedable, splittable random stream.
///
/// The engine is std::mt19937_64 (its output sequence is fixed by the C++
/// standard). Seeds are mixed through SplitMix64 first, uniforms take the top
/// 53 bits of one engine draw, and normals use the Box-Muller transform, so a
/// given seed produces the same stream on every platform. The standard
/// library distributions are deliberately not used: their algorithms are
/// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n);

  double normal();
  double normal(double mean, double std) { return mean + std * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Independent child stream; the parent's state is not advanced.
  Rng split(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Deterministic seed derivation for (base, a, b) triples.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

}  // namespace swnet
