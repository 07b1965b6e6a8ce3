#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace ctpomdp {

/// SplitMix64 step. Used only to expand user seeds into engine seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Derives an independent stream seed from a base seed and a path of stream
/// identifiers, e.g. derive_seed(seed, {trajectory, Stream::observation}).
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = base;
  std::uint64_t out = splitmix64(s);
  for (std::uint64_t p : path) {
    s = out ^ (p * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL);
    out = splitmix64(s);
  }
  return out;
}

/// Named sub-streams of one trajectory seed.
enum Stream : std::uint64_t {
  stream_dynamics = 1,
  stream_observation = 2,
  stream_policy = 3,
  stream_particles = 4,
};

/// mt19937_64 seeded through SplitMix64. Uniform, exponential and normal
/// variates are generated here (not through <random> distributions) so that
/// simulation output does not depend on the standard library implementation.
class Rng {
 public:
  using engine_type = std::mt19937_64;

  explicit Rng(std::uint64_t seed = 0) : engine_(expand(seed)) {}

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  /// Standard normal via Box-Muller; one variate per call, no cached state.
  double normal() {
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    return r * std::cos(6.283185307179586 * uniform());
  }

  std::uint64_t next() { return engine_(); }

  engine_type& engine() { return engine_; }

 private:
  static std::uint64_t expand(std::uint64_t seed) {
    std::uint64_t s = seed;
    return splitmix64(s);
  }

  engine_type engine_;
};

}  // namespace ctpomdp
