#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "ctpomdp/belief.hpp"
#include "ctpomdp/model.hpp"
#include "ctpomdp/state_box.hpp"

namespace random_models {

using namespace ctpomdp;

inline double uniform(std::mt19937_64& gen, double a, double b) {
  return std::uniform_real_distribution<double>(a, b)(gen);
}

inline int integer(std::mt19937_64& gen, int a, int b) { return std::uniform_int_distribution<int>(a, b)(gen); }

/// Random queueing network with 1-3 queues, two actions and substochastic
/// routing rows.
inline QueueModel queue_network(std::mt19937_64& gen, int max_servers = 3) {
  const int n = integer(gen, 1, 3);
  const std::size_t m = static_cast<std::size_t>(n) + 1;
  std::vector<int> buffers, servers;
  for (int i = 0; i < n; ++i) {
    buffers.push_back(integer(gen, 2, 5));
    servers.push_back(integer(gen, 1, max_servers));
  }
  Matrix base(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (i != j) base[i][j] = uniform(gen, 0.2, 3.0);
  std::vector<Matrix> routing;
  for (int u = 0; u < 2; ++u) {
    Matrix p(m, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < m; ++i) {
      double budget = 1.0;
      for (std::size_t j = 0; j < m; ++j) {
        if (i == j) continue;
        if (i == static_cast<std::size_t>(n)) {
          p[i][j] = uniform(gen, 0.0, 1.0);
        } else {
          p[i][j] = uniform(gen, 0.0, budget);
          budget -= p[i][j];
        }
      }
    }
    routing.push_back(p);
  }
  return QueueModel(buffers, servers, base, routing);
}

inline BinomialBelief binomial_belief(const QueueModel& q, std::mt19937_64& gen) {
  std::vector<double> theta;
  for (int i = 0; i < q.queues(); ++i) theta.push_back(uniform(gen, 0.05, 0.95));
  return BinomialBelief(theta, q.buffers());
}

/// Open network on 1-2 species with reactions of order at most two.
inline CrnModel open_crn(std::mt19937_64& gen) {
  const int n = integer(gen, 1, 2);
  const int count = integer(gen, 2, 5);
  std::vector<Reaction> reactions;
  for (int r = 0; r < count; ++r) {
    std::vector<int> s(static_cast<std::size_t>(n), 0), p(static_cast<std::size_t>(n), 0);
    const int order = integer(gen, 0, 2);
    for (int k = 0; k < order; ++k) ++s[static_cast<std::size_t>(integer(gen, 0, n - 1))];
    const int out = integer(gen, 0, 2);
    for (int k = 0; k < out; ++k) ++p[static_cast<std::size_t>(integer(gen, 0, n - 1))];
    if (s == p) ++p[0];
    reactions.push_back(Reaction{s, p, {uniform(gen, 0.1, 2.0), uniform(gen, 0.1, 2.0)}});
  }
  return CrnModel(n, 2, reactions);
}

inline PoissonBelief poisson_belief(const CrnModel& crn, std::mt19937_64& gen) {
  std::vector<double> theta;
  for (int i = 0; i < crn.species(); ++i) theta.push_back(uniform(gen, 0.5, 5.0));
  return PoissonBelief(theta);
}

/// Box holding all but a negligible tail of a Poisson belief.
inline StateBox poisson_box(const PoissonBelief& b) {
  std::vector<int> lo, hi;
  for (double t : b.theta) {
    lo.push_back(0);
    hi.push_back(static_cast<int>(std::ceil(t + 12.0 * std::sqrt(t) + 20.0)));
  }
  return StateBox(lo, hi);
}

struct ClosedInstance {
  CrnModel crn;
  MultinomialBelief belief;
};

/// Closed four-species network of conversions and bimolecular exchanges,
/// with 2-3 latent species and a multinomial belief on a random slice.
inline ClosedInstance closed_instance(std::mt19937_64& gen) {
  const int n = 4;
  const int latent_count = integer(gen, 2, 3);
  std::vector<int> latent, observed;
  std::vector<int> perm{0, 1, 2, 3};
  std::shuffle(perm.begin(), perm.end(), gen);
  for (int k = 0; k < n; ++k) (k < latent_count ? latent : observed).push_back(perm[static_cast<std::size_t>(k)]);
  std::sort(latent.begin(), latent.end());
  std::sort(observed.begin(), observed.end());

  std::vector<Reaction> reactions;
  const int count = integer(gen, 3, 7);
  for (int r = 0; r < count; ++r) {
    std::vector<int> s(n, 0), p(n, 0);
    if (integer(gen, 0, 2) == 0) {
      ++s[static_cast<std::size_t>(integer(gen, 0, n - 1))];
      ++s[static_cast<std::size_t>(integer(gen, 0, n - 1))];
      ++p[static_cast<std::size_t>(integer(gen, 0, n - 1))];
      ++p[static_cast<std::size_t>(integer(gen, 0, n - 1))];
    } else {
      ++s[static_cast<std::size_t>(integer(gen, 0, n - 1))];
      ++p[static_cast<std::size_t>(integer(gen, 0, n - 1))];
    }
    if (s == p) {
      --r;
      continue;
    }
    reactions.push_back(Reaction{s, p, {uniform(gen, 0.1, 1.5), uniform(gen, 0.1, 1.5)}});
  }
  const int total = integer(gen, 8, 12);
  std::vector<int> y;
  int left = total - integer(gen, 2, 5);
  for (std::size_t k = 0; k < observed.size(); ++k) {
    const int v = integer(gen, 0, std::max(0, left));
    y.push_back(v);
    left -= v;
  }
  std::vector<double> theta;
  double sum = 0.0;
  for (int l = 0; l < latent_count; ++l) {
    theta.push_back(uniform(gen, 0.1, 1.0));
    sum += theta.back();
  }
  for (double& t : theta) t /= sum;
  return {CrnModel(n, 2, reactions), MultinomialBelief(theta, latent, observed, y, total)};
}

}  // namespace random_models
