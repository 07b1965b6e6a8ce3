#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctpomdp/belief.hpp"
#include "ctpomdp/error.hpp"
#include "ctpomdp/model.hpp"
#include "ctpomdp/state_box.hpp"

// Brute-force entropic-matching drift: F(theta)^-1 E_q[L^dagger s] with the
// Fisher matrix and the adjoint expectation both summed explicitly over a
// finite box. Slow, but independent of the closed forms it verifies.

namespace ctpomdp {

/// Score d/dtheta log q_theta(x) for each family, in the coordinates the
/// oracle solves in. For the multinomial these are the first n-1 simplex
/// entries (the last is 1 minus their sum).
inline std::vector<double> belief_score(const BinomialBelief& b, const State& x) {
  std::vector<double> s(b.theta.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    s[i] = (x[i] - b.trials[i] * b.theta[i]) / (b.theta[i] * (1.0 - b.theta[i]));
  return s;
}

inline std::vector<double> belief_score(const PoissonBelief& b, const State& x) {
  std::vector<double> s(b.theta.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = x[i] / b.theta[i] - 1.0;
  return s;
}

inline std::vector<double> belief_score(const MultinomialBelief& b, const State& x) {
  const std::size_t m = b.latent.size() - 1;
  std::vector<double> s(m);
  const double last = x[static_cast<std::size_t>(b.latent[m])] / b.theta[m];
  for (std::size_t i = 0; i < m; ++i)
    s[i] = x[static_cast<std::size_t>(b.latent[i])] / b.theta[i] - last;
  return s;
}

inline std::size_t score_dims(const BinomialBelief& b) { return b.theta.size(); }
inline std::size_t score_dims(const PoissonBelief& b) { return b.theta.size(); }
inline std::size_t score_dims(const MultinomialBelief& b) { return b.latent.size() - 1; }

namespace detail {

inline std::vector<double> to_parameters(const BinomialBelief&, std::vector<double> d) { return d; }
inline std::vector<double> to_parameters(const PoissonBelief&, std::vector<double> d) { return d; }
inline std::vector<double> to_parameters(const MultinomialBelief&, std::vector<double> d) {
  double sum = 0.0;
  for (double v : d) sum += v;
  d.push_back(-sum);
  return d;
}

inline bool on_slice(const State& x, std::span<const int> observed, std::span<const int> y) {
  for (std::size_t k = 0; k < observed.size(); ++k)
    if (x[static_cast<std::size_t>(observed[k])] != y[k]) return false;
  return true;
}

template <class Belief>
std::vector<double> oracle_drift(const Model& model, Action u, const Belief& belief, const StateBox& box,
                                 std::span<const int> observed, std::span<const int> y) {
  const std::size_t m = score_dims(belief);
  if (m == 0) return to_parameters(belief, {});
  const auto [weights, mass] = weights_on_box(belief, box);
  if (mass < 1.0 - 1e-6)
    throw Error(ErrorKind::truncation,
                "oracle: box captures only " + std::to_string(mass) + " of the belief mass");

  Eigen::MatrixXd fisher = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  State x, target;
  for (std::size_t s = 0; s < box.size(); ++s) {
    const double q = weights[s];
    if (q == 0.0) continue;
    box.decode(s, x);
    const std::vector<double> sx = belief_score(belief, x);
    const Eigen::Map<const Eigen::VectorXd> vx(sx.data(), static_cast<Eigen::Index>(m));
    fisher.noalias() += q * vx * vx.transpose();
    // [L^dagger (1_y s)](x) = sum_x' Lambda(x, x') (1_y(x') s(x') - s(x)).
    model.for_each_transition(x, u, [&](const std::vector<int>& v, double r) {
      target = x;
      for (std::size_t i = 0; i < target.size(); ++i) target[i] += v[i];
      rhs -= q * r * vx;
      if (!on_slice(target, observed, y)) return;
      const std::vector<double> st = belief_score(belief, target);
      rhs += q * r * Eigen::Map<const Eigen::VectorXd>(st.data(), static_cast<Eigen::Index>(m));
    });
  }

  Eigen::LLT<Eigen::MatrixXd> llt(fisher);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-13))
    throw Error(ErrorKind::singular_fisher, "oracle: Fisher matrix is singular at this parameter");
  const Eigen::VectorXd d = llt.solve(rhs);
  return to_parameters(belief, std::vector<double>(d.data(), d.data() + d.size()));
}

}  // namespace detail

/// Oracle drift for observation model D (no conditioning between observations).
template <class Belief>
std::vector<double> oracle_drift_D(const Model& model, Action u, const Belief& belief, const StateBox& box) {
  return detail::oracle_drift(model, u, belief, box, {}, {});
}

/// Oracle drift for observation model C: the score is masked by 1_y on the
/// target state, so transitions that change the observed block drop out.
template <class Belief>
std::vector<double> oracle_drift_C(const Model& model, Action u, const Belief& belief,
                                   std::span<const int> observed, std::span<const int> y,
                                   const StateBox& box) {
  return detail::oracle_drift(model, u, belief, box, observed, y);
}

inline std::vector<double> oracle_drift_C(const Model& model, Action u, const MultinomialBelief& belief,
                                          const StateBox& box) {
  return detail::oracle_drift(model, u, belief, box, belief.observed, belief.y);
}

}  // namespace ctpomdp
