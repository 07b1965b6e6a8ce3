#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ctpomdp/error.hpp"
#include "ctpomdp/model.hpp"
#include "ctpomdp/ode.hpp"
#include "ctpomdp/state_box.hpp"

namespace ctpomdp {

/// Probability vector over the slots of a StateBox (invalid slots hold 0).
class DenseBelief {
 public:
  DenseBelief() = default;
  explicit DenseBelief(StateBox box) : box_(std::move(box)), probs_(box_.size(), 0.0) {}
  DenseBelief(StateBox box, std::vector<double> probs) : box_(std::move(box)), probs_(std::move(probs)) {
    require(probs_.size() == box_.size(), ErrorKind::invalid_argument,
            "dense belief: probability vector does not match box size");
  }

  static DenseBelief point_mass(StateBox box, const State& x) {
    require(box.contains(x), ErrorKind::invalid_argument, "dense belief: point mass outside box");
    DenseBelief b(std::move(box));
    b.probs_[b.box_.index(x)] = 1.0;
    return b;
  }

  const StateBox& box() const { return box_; }
  const std::vector<double>& probs() const { return probs_; }
  std::vector<double>& probs() { return probs_; }
  double operator[](std::size_t i) const { return probs_[i]; }

  double total() const { return std::accumulate(probs_.begin(), probs_.end(), 0.0); }

  /// Clips negative entries to zero and rescales to unit mass. Returns the
  /// clipped (negative) mass.
  double normalize() {
    double clipped = 0.0;
    for (double& p : probs_)
      if (p < 0.0) {
        clipped -= p;
        p = 0.0;
      }
    const double z = total();
    require(z > 0.0, ErrorKind::degenerate_observation, "dense belief: zero total mass");
    for (double& p : probs_) p /= z;
    return clipped;
  }

  template <class F>
  void for_each(F&& f) const {
    State x;
    for (std::size_t s = 0; s < probs_.size(); ++s) {
      if (probs_[s] == 0.0) continue;
      box_.decode(s, x);
      f(x, probs_[s]);
    }
  }

  std::vector<double> mean() const {
    std::vector<double> m(static_cast<std::size_t>(box_.dims()), 0.0);
    for_each([&](const State& x, double p) {
      for (std::size_t i = 0; i < m.size(); ++i) m[i] += p * x[i];
    });
    return m;
  }

  std::vector<double> variance() const {
    const std::vector<double> m = mean();
    std::vector<double> v(m.size(), 0.0);
    for_each([&](const State& x, double p) {
      for (std::size_t i = 0; i < m.size(); ++i) v[i] += p * (x[i] - m[i]) * (x[i] - m[i]);
    });
    return v;
  }

 private:
  StateBox box_;
  std::vector<double> probs_;
};

/// [L_u p](x) = sum_{x'} Lambda(x', x, u) p(x') - Lambda(x, u) p(x) on the box.
inline void master_rhs(const BoxGenerator& gen, Action u, const std::vector<double>& p,
                       std::vector<double>& dp) {
  dp.assign(p.size(), 0.0);
  for (std::size_t s = 0; s < p.size(); ++s) {
    const double ps = p[s];
    if (ps == 0.0) continue;
    dp[s] -= gen.exit_rate(s, u) * ps;
    for (const auto* e = gen.begin(s, u); e != gen.end(s, u); ++e) dp[e->target] += e->rate * ps;
  }
}

inline std::vector<double> master_rhs(const BoxGenerator& gen, Action u, const DenseBelief& p) {
  std::vector<double> dp;
  master_rhs(gen, u, p.probs(), dp);
  return dp;
}

inline std::vector<double> master_rhs(const Model& model, Action u, const DenseBelief& p) {
  return master_rhs(BoxGenerator(model, p.box()), u, p);
}

namespace detail {

inline void clip_and_renormalize(std::vector<double>& p) {
  double z = 0.0;
  for (double& v : p) {
    if (v < 0.0) v = 0.0;
    z += v;
  }
  if (z > 0.0)
    for (double& v : p) v /= z;
}

inline std::vector<char> slice_mask(const StateBox& box, std::span<const int> observed,
                                    std::span<const int> y) {
  std::vector<char> mask(box.size(), 0);
  State x;
  for (std::size_t s = 0; s < box.size(); ++s) {
    if (!box.valid(s)) continue;
    box.decode(s, x);
    bool on = true;
    for (std::size_t k = 0; k < observed.size() && on; ++k)
      on = x[static_cast<std::size_t>(observed[k])] == y[k];
    mask[s] = on ? 1 : 0;
  }
  return mask;
}

}  // namespace detail

/// Prediction between noisy observations: integrates the master equation
/// over `horizon` and renormalizes.
inline DenseBelief predict_D(const BoxGenerator& gen, Action u, DenseBelief belief, double horizon,
                             const OdeOptions& opt = {}) {
  require(horizon >= 0.0, ErrorKind::invalid_argument, "predict_D: negative horizon");
  if (horizon == 0.0) return belief;
  auto rhs = [&](double, const std::vector<double>& p, std::vector<double>& dp) {
    master_rhs(gen, u, p, dp);
  };
  integrate_adaptive(rhs, belief.probs(), 0.0, horizon, opt, detail::clip_and_renormalize);
  belief.normalize();
  return belief;
}

inline DenseBelief predict_D(const Model& model, Action u, DenseBelief belief, double horizon,
                             const OdeOptions& opt = {}) {
  BoxGenerator gen(model, belief.box());
  return predict_D(gen, u, std::move(belief), horizon, opt);
}

/// Bayes update with the Gaussian likelihood N(y_k | x_i, var) over the
/// observed components i (mask[i] true, y listed in component order).
inline DenseBelief update_D(DenseBelief belief, std::span<const double> y,
                            const std::vector<bool>& mask, double var) {
  require(var > 0.0, ErrorKind::invalid_argument, "update_D: noise variance must be positive");
  std::vector<std::size_t> comps;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) comps.push_back(i);
  require(comps.size() == y.size(), ErrorKind::invalid_argument,
          "update_D: observation length does not match the observed mask");
  std::vector<double>& p = belief.probs();
  std::vector<double> loglik(p.size(), -INFINITY);
  double best = -INFINITY;
  State x;
  for (std::size_t s = 0; s < p.size(); ++s) {
    if (p[s] <= 0.0) continue;
    belief.box().decode(s, x);
    double ll = 0.0;
    for (std::size_t k = 0; k < comps.size(); ++k) {
      const double d = y[k] - x[comps[k]];
      ll -= 0.5 * d * d / var;
    }
    loglik[s] = ll;
    best = std::max(best, ll);
  }
  require(std::isfinite(best), ErrorKind::degenerate_observation, "update_D: prior has no mass");
  double z = 0.0;
  for (std::size_t s = 0; s < p.size(); ++s) {
    p[s] = p[s] > 0.0 ? p[s] * std::exp(loglik[s] - best) : 0.0;
    z += p[s];
  }
  const double log_norm = -0.5 * static_cast<double>(comps.size()) * std::log(2.0 * M_PI * var);
  const double log_z = std::log(z) + best + log_norm;
  if (log_z < std::log(1e-300))
    throw Error(ErrorKind::degenerate_observation,
                "update_D: observation has likelihood below 1e-300 under the prior");
  for (double& v : p) v /= z;
  return belief;
}

/// Conditional master equation between jumps of the observed block:
/// dpi = 1_y [L pi] - pi * sum 1_y [L pi].
inline DenseBelief predict_C(const BoxGenerator& gen, Action u, DenseBelief belief,
                             std::span<const int> observed, std::span<const int> y_const,
                             double horizon, const OdeOptions& opt = {}) {
  require(horizon >= 0.0, ErrorKind::invalid_argument, "predict_C: negative horizon");
  if (horizon == 0.0) return belief;
  const std::vector<char> mask = detail::slice_mask(belief.box(), observed, y_const);
  auto rhs = [&](double, const std::vector<double>& p, std::vector<double>& dp) {
    master_rhs(gen, u, p, dp);
    double leak = 0.0;
    for (std::size_t s = 0; s < dp.size(); ++s) {
      if (!mask[s]) dp[s] = 0.0;
      leak += dp[s];
    }
    for (std::size_t s = 0; s < dp.size(); ++s) dp[s] -= p[s] * leak;
  };
  auto project = [&](std::vector<double>& p) {
    for (std::size_t s = 0; s < p.size(); ++s)
      if (!mask[s]) p[s] = 0.0;
    detail::clip_and_renormalize(p);
  };
  integrate_adaptive(rhs, belief.probs(), 0.0, horizon, opt, project);
  belief.normalize();
  return belief;
}

/// Reset at a jump of the observed block to y_new:
/// pi(x) proportional to 1_{y_new}(x) [L pi_-](x).
inline DenseBelief update_C(const BoxGenerator& gen, Action u, const DenseBelief& belief,
                            std::span<const int> observed, std::span<const int> y_new) {
  const std::vector<char> mask = detail::slice_mask(belief.box(), observed, y_new);
  std::vector<double> dp;
  master_rhs(gen, u, belief.probs(), dp);
  DenseBelief post(belief.box());
  double z = 0.0;
  for (std::size_t s = 0; s < dp.size(); ++s) {
    if (!mask[s]) continue;
    // The belief has no mass on the new slice before the jump, so dp is pure inflow.
    post.probs()[s] = std::max(0.0, dp[s]);
    z += post.probs()[s];
  }
  if (!(z > 0.0))
    throw Error(ErrorKind::impossible_jump,
                "update_C: no transition explains the observed jump under the current belief");
  for (double& p : post.probs()) p /= z;
  return post;
}

/// Probability mass on box states adjacent to an artificial truncation face
/// (a bound that cuts the model's own state space).
inline double truncation_mass(const DenseBelief& belief, const Model& model) {
  const StateBox& box = belief.box();
  const std::vector<int> caps = model.caps();
  double mass = 0.0;
  belief.for_each([&](const State& x, double p) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const bool upper_cut = caps[i] < 0 || box.upper()[i] < caps[i];
      const bool lower_cut = box.lower()[i] > 0;
      if ((upper_cut && x[i] == box.upper()[i]) || (lower_cut && x[i] == box.lower()[i])) {
        mass += p;
        return;
      }
    }
  });
  return mass;
}

inline void check_truncation(const DenseBelief& belief, const Model& model, double limit = 1e-3,
                             double time = std::numeric_limits<double>::quiet_NaN()) {
  const double mass = truncation_mass(belief, model);
  if (mass > limit)
    throw Error(ErrorKind::truncation,
                "exact filter: " + std::to_string(mass) + " probability mass on the truncation boundary",
                time);
}

}  // namespace ctpomdp
