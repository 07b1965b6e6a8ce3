#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "ctpomdp/belief.hpp"
#include "ctpomdp/error.hpp"
#include "ctpomdp/model.hpp"
#include "ctpomdp/ode.hpp"

// Entropic-matching (projection) filters. Between observations the belief
// parameters follow dtheta/dt = F(theta)^-1 E_q[L^dagger grad log q_theta];
// the functions below are the closed forms of that drift for three families.

namespace ctpomdp {

namespace detail {

/// E[min(X, c)] for X ~ Binomial(n, p): c + sum_{x<c} Bin(x) (x - c).
inline double expected_busy_servers(int n, double p, int c) {
  double acc = c;
  for (int x = 0; x < std::min(c, n + 1); ++x) acc += std::exp(log_binomial_pmf(x, n, p)) * (x - c);
  return acc;
}

/// N! / (N - k)! / N, the multinomial factorial-moment factor divided by the
/// number of trials. Zero when k > N.
inline double falling_over_n(int n, int k) {
  if (k > n || n <= 0) return 0.0;
  if (k == 0) return 1.0 / n;
  double r = 1.0;
  for (int i = 1; i < k; ++i) r *= static_cast<double>(n - i);
  return r;
}

inline double falling(int n, int k) {
  if (k > n) return 0.0;
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= static_cast<double>(n - i);
  return r;
}

inline double factorial(int k) {
  double r = 1.0;
  for (int i = 2; i <= k; ++i) r *= i;
  return r;
}

}  // namespace detail

/// Binomial-product drift for a queueing network with c_i servers per queue
/// (general-c form). Blocking enters through P(X_j < N_j) = 1 - theta_j^N_j.
inline std::vector<double> binomial_drift(const QueueModel& model, Action u,
                                          const BinomialBelief& belief) {
  const int n = model.queues();
  std::vector<double> busy(static_cast<std::size_t>(n) + 1, 1.0);
  std::vector<double> room(static_cast<std::size_t>(n) + 1, 1.0);
  for (int i = 0; i < n; ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    busy[k] = detail::expected_busy_servers(belief.trials[k], belief.theta[k], model.servers()[k]);
    room[k] = 1.0 - std::pow(belief.theta[k], belief.trials[k]);
  }
  const Matrix& base = model.base_rates();
  const Matrix& route = model.routing(u);
  std::vector<double> d(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    const std::size_t a = static_cast<std::size_t>(i);
    double inflow = 0.0, outflow = 0.0;
    for (int j = 0; j <= n; ++j) {
      if (j == i) continue;
      const std::size_t b = static_cast<std::size_t>(j);
      inflow += base[b][a] * route[b][a] * busy[b];
      outflow += base[a][b] * route[a][b] * room[b];
    }
    d[a] = (room[a] * inflow - busy[a] * outflow) / belief.trials[a];
  }
  return d;
}

/// Single-server specialization of binomial_drift (every c_i = 1), where
/// E[min(X, 1)] = 1 - (1 - theta)^N.
inline std::vector<double> binomial_drift_single_server(const QueueModel& model, Action u,
                                                        const BinomialBelief& belief) {
  const int n = model.queues();
  for (int c : model.servers())
    require(c == 1, ErrorKind::invalid_argument, "binomial_drift_single_server: needs c_i = 1");
  std::vector<double> busy(static_cast<std::size_t>(n) + 1, 1.0);
  std::vector<double> room(static_cast<std::size_t>(n) + 1, 1.0);
  for (std::size_t k = 0; k < static_cast<std::size_t>(n); ++k) {
    busy[k] = 1.0 - std::pow(1.0 - belief.theta[k], belief.trials[k]);
    room[k] = 1.0 - std::pow(belief.theta[k], belief.trials[k]);
  }
  const Matrix& base = model.base_rates();
  const Matrix& route = model.routing(u);
  std::vector<double> d(static_cast<std::size_t>(n), 0.0);
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
    double in = 0.0, out = 0.0;
    for (std::size_t j = 0; j <= static_cast<std::size_t>(n); ++j) {
      if (j == i) continue;
      in += base[j][i] * route[j][i] * busy[j];
      out += base[i][j] * route[i][j] * room[j];
    }
    d[i] = room[i] / belief.trials[i] * in - busy[i] / belief.trials[i] * out;
  }
  return d;
}

/// Product-Poisson drift: dtheta_l = sum_j c_j(u) prod_i theta_i^S_ij / S_ij! v_lj.
inline std::vector<double> poisson_drift(const CrnModel& model, Action u, const PoissonBelief& belief) {
  std::vector<double> d(static_cast<std::size_t>(model.species()), 0.0);
  for (std::size_t j = 0; j < model.reactions().size(); ++j) {
    const Reaction& r = model.reactions()[j];
    double a = r.rate[static_cast<std::size_t>(u)];
    if (a == 0.0) continue;
    for (std::size_t i = 0; i < d.size(); ++i)
      if (r.substrates[i] > 0)
        a *= std::pow(belief.theta[i], r.substrates[i]) / detail::factorial(r.substrates[i]);
    const std::vector<int>& v = model.change(j);
    for (std::size_t l = 0; l < d.size(); ++l) d[l] += a * v[l];
  }
  return d;
}

/// Multinomial drift under exact observation of the `observed` components.
/// Returns the velocity of the full latent simplex vector (sums to zero).
/// Reactions that leave the observed block unchanged move mass between
/// latent species; reactions that would change it contribute through the
/// conditioning on "no observed jump".
inline std::vector<double> multinomial_drift(const CrnModel& model, Action u,
                                             const MultinomialBelief& belief) {
  const std::size_t nl = belief.latent.size();
  std::vector<double> d(nl, 0.0);
  const int trials = belief.trials();
  if (trials <= 0) return d;
  std::vector<int> a(nl);
  for (std::size_t j = 0; j < model.reactions().size(); ++j) {
    const Reaction& r = model.reactions()[j];
    double coef = r.rate[static_cast<std::size_t>(u)];
    if (coef == 0.0) continue;
    bool observed_static = true;
    for (std::size_t k = 0; k < belief.observed.size(); ++k) {
      const std::size_t i = static_cast<std::size_t>(belief.observed[k]);
      coef *= choose(belief.y[k], r.substrates[i]);
      observed_static = observed_static && model.change(j)[i] == 0;
    }
    if (coef == 0.0) continue;
    int order = 0;
    for (std::size_t l = 0; l < nl; ++l) {
      const std::size_t i = static_cast<std::size_t>(belief.latent[l]);
      const int s = r.substrates[i];
      order += s;
      if (s > 0) coef *= std::pow(belief.theta[l], s) / detail::factorial(s);
      a[l] = observed_static ? model.change(j)[i] : -s;
    }
    coef *= detail::falling_over_n(trials, order);
    if (coef == 0.0) continue;
    double sum_a = 0.0;
    for (int v : a) sum_a += v;
    for (std::size_t l = 0; l < nl; ++l) d[l] += coef * (a[l] - belief.theta[l] * sum_a);
  }
  return d;
}

/// First-moment matching at a jump of the observed block by `observed_change`
/// (listed in `belief.observed` order). The new mean of each latent count is
/// sum_j E[(X_l + v_lj) h_j] / sum_j E[h_j] over reactions j compatible with
/// the observed change.
inline MultinomialBelief multinomial_jump_update(const CrnModel& model, Action u,
                                                 const MultinomialBelief& belief,
                                                 std::span<const int> observed_change) {
  require(observed_change.size() == belief.observed.size(), ErrorKind::invalid_argument,
          "multinomial_jump_update: change length does not match observed block");
  const std::size_t nl = belief.latent.size();
  const int trials = belief.trials();
  std::vector<double> num(nl, 0.0);
  double den = 0.0;
  for (std::size_t j = 0; j < model.reactions().size(); ++j) {
    const Reaction& r = model.reactions()[j];
    const std::vector<int>& v = model.change(j);
    bool compatible = true;
    for (std::size_t k = 0; k < belief.observed.size() && compatible; ++k)
      compatible = v[static_cast<std::size_t>(belief.observed[k])] == observed_change[k];
    if (!compatible) continue;
    double eh = r.rate[static_cast<std::size_t>(u)];
    for (std::size_t k = 0; k < belief.observed.size(); ++k)
      eh *= choose(belief.y[k], r.substrates[static_cast<std::size_t>(belief.observed[k])]);
    int order = 0;
    for (std::size_t l = 0; l < nl; ++l) {
      const int s = r.substrates[static_cast<std::size_t>(belief.latent[l])];
      order += s;
      if (s > 0) eh *= std::pow(belief.theta[l], s) / detail::factorial(s);
    }
    eh *= detail::falling(trials, order);
    if (eh == 0.0) continue;
    den += eh;
    for (std::size_t l = 0; l < nl; ++l) {
      const std::size_t i = static_cast<std::size_t>(belief.latent[l]);
      num[l] += eh * (r.substrates[i] + v[i] + belief.theta[l] * (trials - order));
    }
  }
  if (!(den > 0.0))
    throw Error(ErrorKind::impossible_jump,
                "multinomial_jump_update: no reaction explains the observed change");

  MultinomialBelief post = belief;
  for (std::size_t k = 0; k < post.y.size(); ++k) post.y[k] += observed_change[k];
  require(post.trials() >= 0, ErrorKind::impossible_jump,
          "multinomial_jump_update: observed counts exceed the conserved total");
  if (post.trials() > 0) {
    for (std::size_t l = 0; l < nl; ++l) post.theta[l] = num[l] / den / post.trials();
  }
  post.clamp();
  return post;
}

/// Gaussian moment-matching update: Binomial(N, theta) -> N(N theta, N theta (1-theta)),
/// conjugate update with N(y | x, var), mean matched back to theta. Only
/// masked components are touched; `y` lists their observations in order.
inline BinomialBelief gaussian_mm_update_binomial(BinomialBelief belief, std::span<const double> y,
                                                  double var, const std::vector<bool>& mask) {
  require(var > 0.0, ErrorKind::invalid_argument, "binomial update: variance must be positive");
  std::size_t k = 0;
  for (std::size_t i = 0; i < belief.theta.size(); ++i) {
    if (!mask[i]) continue;
    require(k < y.size(), ErrorKind::invalid_argument, "binomial update: too few observations");
    const double n = belief.trials[i];
    const double m = n * belief.theta[i];
    const double p = m * (1.0 - belief.theta[i]);
    const double post = m + p * (y[k++] - m) / (p + var);
    belief.theta[i] = std::clamp(post / n, kThetaEps, 1.0 - kThetaEps);
  }
  return belief;
}

/// Gaussian moment-matching update for the Poisson family: prior N(theta, theta).
inline PoissonBelief gaussian_mm_update_poisson(PoissonBelief belief, std::span<const double> y,
                                                double var, const std::vector<bool>& mask) {
  require(var > 0.0, ErrorKind::invalid_argument, "poisson update: variance must be positive");
  std::size_t k = 0;
  for (std::size_t i = 0; i < belief.theta.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    require(k < y.size(), ErrorKind::invalid_argument, "poisson update: too few observations");
    const double m = belief.theta[i];
    belief.theta[i] = std::max(m + m * (y[k++] - m) / (m + var), kThetaEps);
  }
  return belief;
}

/// Integrates a parametric belief along `drift` over `horizon`, projecting
/// back into the family's domain after each accepted step.
template <class Belief, class Drift>
Belief integrate_belief(Drift&& drift, Belief belief, double horizon, const OdeOptions& opt = {}) {
  require(horizon >= 0.0, ErrorKind::invalid_argument, "integrate_belief: negative horizon");
  if (horizon == 0.0) return belief;
  Belief work = belief;
  auto rhs = [&](double, const std::vector<double>& theta, std::vector<double>& dtheta) {
    work.theta = theta;
    dtheta = drift(work);
  };
  auto project = [&](std::vector<double>& theta) {
    work.theta = theta;
    work.clamp();
    theta = work.theta;
  };
  std::vector<double> theta = belief.theta;
  integrate_adaptive(rhs, theta, 0.0, horizon, opt, project);
  belief.theta = std::move(theta);
  belief.clamp();
  return belief;
}

inline BinomialBelief integrate_belief(const QueueModel& model, Action u, BinomialBelief belief,
                                       double horizon, const OdeOptions& opt = {}) {
  return integrate_belief([&](const BinomialBelief& b) { return binomial_drift(model, u, b); },
                          std::move(belief), horizon, opt);
}

inline PoissonBelief integrate_belief(const CrnModel& model, Action u, PoissonBelief belief,
                                      double horizon, const OdeOptions& opt = {}) {
  return integrate_belief([&](const PoissonBelief& b) { return poisson_drift(model, u, b); },
                          std::move(belief), horizon, opt);
}

inline MultinomialBelief integrate_belief(const CrnModel& model, Action u, MultinomialBelief belief,
                                          double horizon, const OdeOptions& opt = {}) {
  return integrate_belief([&](const MultinomialBelief& b) { return multinomial_drift(model, u, b); },
                          std::move(belief), horizon, opt);
}

}  // namespace ctpomdp
