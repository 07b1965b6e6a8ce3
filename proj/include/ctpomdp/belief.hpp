#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ctpomdp/error.hpp"
#include "ctpomdp/model.hpp"
#include "ctpomdp/rng.hpp"
#include "ctpomdp/state_box.hpp"

namespace ctpomdp {

/// Domain clamp for all parametric beliefs.
inline constexpr double kThetaEps = 1e-8;

inline double log_binomial_pmf(int x, int n, double p) {
  if (x < 0 || x > n) return -INFINITY;
  return std::lgamma(n + 1.0) - std::lgamma(x + 1.0) - std::lgamma(n - x + 1.0) +
         (x > 0 ? x * std::log(p) : 0.0) + (n - x > 0 ? (n - x) * std::log1p(-p) : 0.0);
}

inline double log_poisson_pmf(int x, double rate) {
  if (x < 0) return -INFINITY;
  return x * std::log(rate) - rate - std::lgamma(x + 1.0);
}

/// Product of independent Binomial(N_i, theta_i) marginals, one per queue.
struct BinomialBelief {
  std::vector<double> theta;
  std::vector<int> trials;

  BinomialBelief() = default;
  BinomialBelief(std::vector<double> t, std::vector<int> n) : theta(std::move(t)), trials(std::move(n)) {
    require(theta.size() == trials.size(), ErrorKind::invalid_argument,
            "binomial belief: theta/trials length mismatch");
    clamp();
  }

  /// theta_i = x_i / N_i, clamped into the open unit interval.
  static BinomialBelief from_state(const State& x, const std::vector<int>& trials) {
    std::vector<double> t(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) t[i] = static_cast<double>(x[i]) / trials[i];
    return BinomialBelief(std::move(t), trials);
  }

  void clamp() {
    for (double& t : theta) t = std::clamp(t, kThetaEps, 1.0 - kThetaEps);
  }

  int dims() const { return static_cast<int>(theta.size()); }

  std::vector<double> mean() const {
    std::vector<double> m(theta.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = trials[i] * theta[i];
    return m;
  }

  std::vector<double> variance() const {
    std::vector<double> v(theta.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = trials[i] * theta[i] * (1.0 - theta[i]);
    return v;
  }

  double log_pmf(const State& x) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) acc += log_binomial_pmf(x[i], trials[i], theta[i]);
    return acc;
  }

  double marginal_pmf(std::size_t i, int x) const {
    return std::exp(log_binomial_pmf(x, trials[i], theta[i]));
  }

  State sample(Rng& rng) const {
    State x(theta.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = std::binomial_distribution<int>(trials[i], theta[i])(rng.engine());
    return x;
  }
};

/// Product of independent Poisson(theta_i) marginals.
struct PoissonBelief {
  std::vector<double> theta;

  PoissonBelief() = default;
  explicit PoissonBelief(std::vector<double> t) : theta(std::move(t)) { clamp(); }

  /// theta = x, with each component raised to at least one.
  static PoissonBelief from_state(const State& x) {
    std::vector<double> t(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) t[i] = std::max(1.0, static_cast<double>(x[i]));
    return PoissonBelief(std::move(t));
  }

  void clamp() {
    for (double& t : theta) t = std::max(t, kThetaEps);
  }

  int dims() const { return static_cast<int>(theta.size()); }
  std::vector<double> mean() const { return theta; }
  std::vector<double> variance() const { return theta; }

  double log_pmf(const State& x) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) acc += log_poisson_pmf(x[i], theta[i]);
    return acc;
  }

  double marginal_pmf(std::size_t i, int x) const { return std::exp(log_poisson_pmf(x, theta[i])); }

  State sample(Rng& rng) const {
    State x(theta.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = std::poisson_distribution<int>(theta[i])(rng.engine());
    return x;
  }
};

/// 1_y(x) Multinomial(x_latent | N - sum(y), theta) for a closed network
/// whose `observed` components are known exactly. `theta` is the full
/// probability vector over the latent components (in `latent` order).
struct MultinomialBelief {
  std::vector<double> theta;
  std::vector<int> latent;
  std::vector<int> observed;
  std::vector<int> y;
  int total = 0;

  MultinomialBelief() = default;
  MultinomialBelief(std::vector<double> t, std::vector<int> latent_idx, std::vector<int> observed_idx,
                    std::vector<int> y_obs, int total_count)
      : theta(std::move(t)),
        latent(std::move(latent_idx)),
        observed(std::move(observed_idx)),
        y(std::move(y_obs)),
        total(total_count) {
    require(!theta.empty() && theta.size() == latent.size(), ErrorKind::invalid_argument,
            "multinomial belief: theta must cover every latent component");
    require(y.size() == observed.size(), ErrorKind::invalid_argument,
            "multinomial belief: observation length mismatch");
    require(trials() >= 0, ErrorKind::invalid_argument,
            "multinomial belief: observed counts exceed the conserved total");
    clamp();
  }

  /// Uniform over the latent species.
  static MultinomialBelief uniform(std::vector<int> latent_idx, std::vector<int> observed_idx,
                                   std::vector<int> y_obs, int total_count) {
    std::vector<double> t(latent_idx.size(), 1.0 / static_cast<double>(latent_idx.size()));
    return MultinomialBelief(std::move(t), std::move(latent_idx), std::move(observed_idx),
                             std::move(y_obs), total_count);
  }

  int trials() const { return total - std::accumulate(y.begin(), y.end(), 0); }
  int dims() const { return static_cast<int>(latent.size() + observed.size()); }

  /// Clamps every entry to at least eps and renormalizes onto the simplex.
  void clamp() {
    double z = 0.0;
    for (double& t : theta) {
      t = std::max(t, kThetaEps);
      z += t;
    }
    for (double& t : theta) t /= z;
  }

  bool on_slice(const State& x) const {
    for (std::size_t k = 0; k < observed.size(); ++k)
      if (x[static_cast<std::size_t>(observed[k])] != y[k]) return false;
    return true;
  }

  std::vector<double> mean() const {
    std::vector<double> m(static_cast<std::size_t>(dims()), 0.0);
    const double n = trials();
    for (std::size_t l = 0; l < latent.size(); ++l) m[static_cast<std::size_t>(latent[l])] = n * theta[l];
    for (std::size_t k = 0; k < observed.size(); ++k) m[static_cast<std::size_t>(observed[k])] = y[k];
    return m;
  }

  std::vector<double> variance() const {
    std::vector<double> v(static_cast<std::size_t>(dims()), 0.0);
    const double n = trials();
    for (std::size_t l = 0; l < latent.size(); ++l)
      v[static_cast<std::size_t>(latent[l])] = n * theta[l] * (1.0 - theta[l]);
    return v;
  }

  double log_pmf(const State& x) const {
    if (!on_slice(x)) return -INFINITY;
    const int n = trials();
    int sum = 0;
    double acc = std::lgamma(n + 1.0);
    for (std::size_t l = 0; l < latent.size(); ++l) {
      const int xl = x[static_cast<std::size_t>(latent[l])];
      if (xl < 0) return -INFINITY;
      sum += xl;
      acc += (xl > 0 ? xl * std::log(theta[l]) : 0.0) - std::lgamma(xl + 1.0);
    }
    return sum == n ? acc : -INFINITY;
  }

  State sample(Rng& rng) const {
    State x(static_cast<std::size_t>(dims()), 0);
    for (std::size_t k = 0; k < observed.size(); ++k) x[static_cast<std::size_t>(observed[k])] = y[k];
    int left = trials();
    double mass = 1.0;
    for (std::size_t l = 0; l < latent.size(); ++l) {
      int draw = left;
      if (l + 1 < latent.size()) {
        const double p = std::clamp(theta[l] / mass, 0.0, 1.0);
        draw = left > 0 ? std::binomial_distribution<int>(left, p)(rng.engine()) : 0;
        mass -= theta[l];
      }
      x[static_cast<std::size_t>(latent[l])] = draw;
      left -= draw;
    }
    return x;
  }
};

/// Probability of each box state under a parametric belief, as a dense
/// vector over box slots. The second member is the captured mass.
template <class Belief>
std::pair<std::vector<double>, double> weights_on_box(const Belief& belief, const StateBox& box) {
  std::vector<double> w(box.size(), 0.0);
  double mass = 0.0;
  if constexpr (requires { belief.marginal_pmf(std::size_t{0}, 0); }) {
    // Product family: tabulate the marginals once.
    const std::size_t n = static_cast<std::size_t>(box.dims());
    std::vector<std::vector<double>> marg(n);
    for (std::size_t i = 0; i < n; ++i)
      for (int v = box.lower()[i]; v <= box.upper()[i]; ++v) marg[i].push_back(belief.marginal_pmf(i, v));
    State x;
    for (std::size_t s = 0; s < box.size(); ++s) {
      if (!box.valid(s)) continue;
      box.decode(s, x);
      double p = 1.0;
      for (std::size_t i = 0; i < n && p > 0.0; ++i)
        p *= marg[i][static_cast<std::size_t>(x[i] - box.lower()[i])];
      w[s] = p;
      mass += p;
    }
  } else {
    State x;
    for (std::size_t s = 0; s < box.size(); ++s) {
      if (!box.valid(s)) continue;
      box.decode(s, x);
      const double lp = belief.log_pmf(x);
      if (lp == -INFINITY) continue;
      w[s] = std::exp(lp);
      mass += w[s];
    }
  }
  return {std::move(w), mass};
}

}  // namespace ctpomdp
