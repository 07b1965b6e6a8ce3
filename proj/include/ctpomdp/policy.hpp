#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ctpomdp/belief.hpp"
#include "ctpomdp/error.hpp"
#include "ctpomdp/exact_filter.hpp"
#include "ctpomdp/mdp_solver.hpp"
#include "ctpomdp/particle_filter.hpp"
#include "ctpomdp/rng.hpp"

namespace ctpomdp {

/// Draws one state from any belief representation.
template <class Belief>
State sample_state(const Belief& belief, Rng& rng) {
  return belief.sample(rng);
}

inline State sample_state(const DenseBelief& belief, Rng& rng) {
  const double target = rng.uniform();
  double acc = 0.0;
  std::size_t last = 0;
  const std::vector<double>& p = belief.probs();
  for (std::size_t s = 0; s < p.size(); ++s) {
    if (p[s] <= 0.0) continue;
    acc += p[s];
    last = s;
    if (target < acc) return belief.box().state(s);
  }
  return belief.box().state(last);
}

inline State sample_state(const ParticleSet& set, Rng& rng) { return set.particles[set.draw(rng)]; }

/// Lowest-index argmax.
inline Action argmax(const std::vector<double>& v) {
  Action best = 0;
  for (std::size_t u = 1; u < v.size(); ++u)
    if (v[u] > v[static_cast<std::size_t>(best)]) best = static_cast<Action>(u);
  return best;
}

/// QMDP with a Monte-Carlo expectation: the same k samples are scored under
/// every action. Samples outside the Q box are clamped. `clamped` counts
/// clamped samples when given.
template <class Belief>
Action qmdp_action_mc(const QTable& table, const Belief& belief, int k, Rng& rng, int* clamped = nullptr) {
  require(k >= 1, ErrorKind::invalid_argument, "qmdp: need at least one sample");
  std::vector<double> score(static_cast<std::size_t>(table.actions()), 0.0);
  for (int n = 0; n < k; ++n) {
    const State x = sample_state(belief, rng);
    bool c = false;
    const std::size_t s = table.slot(x, &c);
    if (c && clamped) ++*clamped;
    for (Action u = 0; u < table.actions(); ++u) score[static_cast<std::size_t>(u)] += table.at(s, u);
  }
  return argmax(score);
}

/// E_q[Q(X, u)] for every action by summation over the Q box.
template <class Belief>
std::vector<double> expected_q(const QTable& table, const Belief& belief) {
  const auto [w, mass] = weights_on_box(belief, table.box());
  if (mass < 1.0 - 1e-6)
    throw Error(ErrorKind::truncation,
                "qmdp: Q box holds only " + std::to_string(mass) + " of the belief mass");
  std::vector<double> e(static_cast<std::size_t>(table.actions()), 0.0);
  for (std::size_t s = 0; s < w.size(); ++s) {
    if (w[s] == 0.0) continue;
    for (Action u = 0; u < table.actions(); ++u) e[static_cast<std::size_t>(u)] += w[s] * table.at(s, u);
  }
  return e;
}

inline std::vector<double> expected_q(const QTable& table, const DenseBelief& belief) {
  std::vector<double> e(static_cast<std::size_t>(table.actions()), 0.0);
  double mass = 0.0;
  belief.for_each([&](const State& x, double p) {
    const auto s = table.box().find(x);
    if (!s) return;
    mass += p;
    for (Action u = 0; u < table.actions(); ++u) e[static_cast<std::size_t>(u)] += p * table.at(*s, u);
  });
  if (mass < 1.0 - 1e-6)
    throw Error(ErrorKind::truncation,
                "qmdp: Q box holds only " + std::to_string(mass) + " of the belief mass");
  return e;
}

/// Weighted particle average; particles outside the Q box are clamped.
inline std::vector<double> expected_q(const QTable& table, const ParticleSet& set) {
  std::vector<double> e(static_cast<std::size_t>(table.actions()), 0.0);
  double total = 0.0;
  for (std::size_t p = 0; p < set.particles.size(); ++p) {
    const double w = set.weights.empty() ? 1.0 : set.weights[p];
    const std::size_t s = table.slot(set.particles[p]);
    total += w;
    for (Action u = 0; u < table.actions(); ++u) e[static_cast<std::size_t>(u)] += w * table.at(s, u);
  }
  for (double& v : e) v /= total;
  return e;
}

/// QMDP with the exact belief expectation.
template <class Belief>
Action qmdp_exact(const QTable& table, const Belief& belief) {
  return argmax(expected_q(table, belief));
}

/// E_q[Q(X, u) - V(X)] at one belief.
template <class Belief>
double expected_advantage(const QTable& table, const Belief& belief, Action u) {
  const auto [w, mass] = weights_on_box(belief, table.box());
  if (mass < 1.0 - 1e-6)
    throw Error(ErrorKind::truncation,
                "advantage: Q box holds only " + std::to_string(mass) + " of the belief mass");
  double a = 0.0;
  for (std::size_t s = 0; s < w.size(); ++s)
    if (w[s] != 0.0) a += w[s] * (table.at(s, u) - table.value_at(s));
  return a;
}

/// Advantage over a grid of beliefs: make(theta) builds the belief for each
/// grid point.
template <class Make>
std::vector<double> advantage_surface(const QTable& table, const std::vector<std::vector<double>>& grid, Action u,
                                      Make&& make) {
  std::vector<double> out;
  out.reserve(grid.size());
  for (const auto& theta : grid) out.push_back(expected_advantage(table, make(theta), u));
  return out;
}

}  // namespace ctpomdp
