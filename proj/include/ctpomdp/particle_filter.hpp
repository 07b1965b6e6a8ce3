#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ctpomdp/error.hpp"
#include "ctpomdp/model.hpp"
#include "ctpomdp/rng.hpp"
#include "ctpomdp/simulate.hpp"

namespace ctpomdp {

/// Weighted particle approximation of the filtering distribution.
struct ParticleSet {
  std::vector<State> particles;
  std::vector<double> weights;
  std::size_t resamples = 0;

  ParticleSet() = default;
  ParticleSet(std::vector<State> p) : particles(std::move(p)) {  // NOLINT(google-explicit-constructor)
    weights.assign(particles.size(), particles.empty() ? 0.0 : 1.0 / static_cast<double>(particles.size()));
  }

  static ParticleSet replicate(const State& x, std::size_t n) { return ParticleSet(std::vector<State>(n, x)); }

  std::size_t size() const { return particles.size(); }

  double ess() const {
    double s2 = 0.0;
    for (double w : weights) s2 += w * w;
    return s2 > 0.0 ? 1.0 / s2 : 0.0;
  }

  std::vector<double> mean() const {
    std::vector<double> m(particles.empty() ? 0 : particles[0].size(), 0.0);
    for (std::size_t p = 0; p < particles.size(); ++p)
      for (std::size_t i = 0; i < m.size(); ++i) m[i] += weights[p] * particles[p][i];
    return m;
  }

  std::vector<double> variance() const {
    const std::vector<double> m = mean();
    std::vector<double> v(m.size(), 0.0);
    for (std::size_t p = 0; p < particles.size(); ++p)
      for (std::size_t i = 0; i < m.size(); ++i) {
        const double d = particles[p][i] - m[i];
        v[i] += weights[p] * d * d;
      }
    return v;
  }

  /// Draws one particle index proportionally to the weights.
  std::size_t draw(Rng& rng) const {
    const double target = rng.uniform();
    double acc = 0.0;
    for (std::size_t p = 0; p < weights.size(); ++p) {
      acc += weights[p];
      if (target < acc) return p;
    }
    return weights.size() - 1;
  }
};

/// Moves every particle forward by Gillespie simulation under constant u.
/// Particle p uses the substream derived from (seed, p), so the result does
/// not depend on how particles are scheduled.
inline ParticleSet pf_predict(const Model& model, Action u, ParticleSet set, double horizon, std::uint64_t seed) {
  require(horizon >= 0.0, ErrorKind::invalid_argument, "pf_predict: negative horizon");
  if (horizon == 0.0) return set;
  for (std::size_t p = 0; p < set.particles.size(); ++p) {
    Rng rng(derive_seed(seed, {stream_particles, p}));
    ssa_advance(model, set.particles[p], u, horizon, rng);
  }
  return set;
}

/// Systematic resampling to equal weights.
inline void systematic_resample(ParticleSet& set, Rng& rng) {
  const std::size_t n = set.size();
  std::vector<State> out;
  out.reserve(n);
  const double step = 1.0 / static_cast<double>(n);
  double u = rng.uniform() * step;
  double acc = set.weights[0];
  std::size_t p = 0;
  for (std::size_t k = 0; k < n; ++k) {
    while (u > acc && p + 1 < n) acc += set.weights[++p];
    out.push_back(set.particles[p]);
    u += step;
  }
  set.particles = std::move(out);
  set.weights.assign(n, step);
  ++set.resamples;
}

/// Reweights by N(y | x_i, var) on the masked components and resamples
/// systematically when the effective sample size drops below half.
inline ParticleSet pf_update(ParticleSet set, std::span<const double> y, double var, const std::vector<bool>& mask,
                             Rng& rng) {
  require(var > 0.0, ErrorKind::invalid_argument, "pf_update: variance must be positive");
  require(!set.particles.empty(), ErrorKind::invalid_argument, "pf_update: empty particle set");
  std::vector<double> loglik(set.size(), 0.0);
  double best = -INFINITY;
  for (std::size_t p = 0; p < set.size(); ++p) {
    std::size_t k = 0;
    double ll = 0.0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!mask[i]) continue;
      const double d = y[k++] - set.particles[p][i];
      ll -= 0.5 * d * d / var;
    }
    loglik[p] = set.weights[p] > 0.0 ? ll + std::log(set.weights[p]) : -INFINITY;
    best = std::max(best, loglik[p]);
  }
  // Absolute likelihood scale (same threshold as the exact filter).
  const double log_norm = -0.5 * static_cast<double>(y.size()) * std::log(2.0 * M_PI * var);
  double z = 0.0;
  for (std::size_t p = 0; p < set.size(); ++p) {
    set.weights[p] = std::exp(loglik[p] - best);
    z += set.weights[p];
  }
  if (!std::isfinite(best) || std::log(z) + best + log_norm < std::log(1e-300))
    throw Error(ErrorKind::degenerate_observation, "pf_update: total particle weight underflow");
  for (double& w : set.weights) w /= z;
  if (set.ess() < 0.5 * static_cast<double>(set.size())) systematic_resample(set, rng);
  return set;
}

}  // namespace ctpomdp
