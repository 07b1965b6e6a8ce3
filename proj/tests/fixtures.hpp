#pragma once

#include <cmath>
#include <vector>

#include "ctpomdp/model.hpp"

namespace fixtures {

using ctpomdp::CrnModel;
using ctpomdp::Matrix;
using ctpomdp::QueueModel;
using ctpomdp::Reaction;

/// Three queues: arrivals into 1 and 2, the action picks which of them
/// feeds queue 3, queue 3 drains to the environment (index 3).
inline QueueModel switch_queue(int buffer, double lambda, double mu) {
  Matrix base(4, std::vector<double>(4, 0.0));
  base[3][0] = lambda;
  base[3][1] = lambda;
  base[0][2] = mu;
  base[1][2] = mu;
  base[2][3] = mu;
  Matrix p0(4, std::vector<double>(4, 0.0));
  p0[3][0] = 1.0;
  p0[3][1] = 1.0;
  p0[2][3] = 1.0;
  Matrix p1 = p0;
  p0[0][2] = 1.0;
  p1[1][2] = 1.0;
  return QueueModel(std::vector<int>(3, buffer), std::vector<int>(3, 1), base, {p0, p1});
}

inline QueueModel paper_queue() { return switch_queue(1000, 10.0, 20.0); }
inline QueueModel small_queue() { return switch_queue(5, 1.0, 2.0); }

/// Single M/M/1/N queue (index 1 is the environment).
inline QueueModel mm1(int buffer, double lambda, double mu, int servers = 1) {
  Matrix base{{0.0, mu}, {lambda, 0.0}};
  Matrix p{{0.0, 1.0}, {1.0, 0.0}};
  return QueueModel({buffer}, {servers}, base, {p});
}

inline CrnModel lotka_volterra() {
  return CrnModel(2, 2,
                  {Reaction{{1, 0}, {2, 0}, {2.5, 2.5}}, Reaction{{1, 1}, {0, 2}, {0.025, 0.025}},
                   Reaction{{0, 1}, {0, 0}, {1.25, 2.5}}});
}

/// Closed four-species network: X1<->X2 (direction set by the action),
/// X1<->X3, X2<->X4, X3<->X4. X1, X2 latent; X3, X4 observed.
inline CrnModel closed_loop(double c = 0.05) {
  auto conv = [](int from, int to, std::vector<double> rate) {
    std::vector<int> s(4, 0), p(4, 0);
    s[static_cast<std::size_t>(from)] = 1;
    p[static_cast<std::size_t>(to)] = 1;
    return Reaction{s, p, std::move(rate)};
  };
  return CrnModel(4, 2,
                  {conv(0, 1, {c, 0.0}), conv(1, 0, {0.0, c}), conv(0, 2, {c, c}), conv(2, 0, {c, c}),
                   conv(1, 3, {c, c}), conv(3, 1, {c, c}), conv(2, 3, {c, c}), conv(3, 2, {c, c})});
}

}  // namespace fixtures
