#include <gtest/gtest.h>

#include <cmath>

#include "ctpomdp/policy.hpp"
#include "fixtures.hpp"

using namespace ctpomdp;

namespace {

/// Q(x, 0) = -|x|, Q(x, 1) = -|x - 10| on {0..10}.
QTable separable() {
  QTable t(StateBox({0}, {10}), 2);
  for (int x = 0; x <= 10; ++x) {
    t.at(static_cast<std::size_t>(x), 0) = -std::abs(x);
    t.at(static_cast<std::size_t>(x), 1) = -std::abs(x - 10);
  }
  return t;
}

const QTable& small_queue_table() {
  static const QTable t = [] {
    const QueueModel q = fixtures::small_queue();
    return solve_q(q, RewardSpec{{0, 0, 0}, 1.0, 5.0}, StateBox::full(q));
  }();
  return t;
}

}  // namespace

TEST(Qmdp, SingleActionAlwaysChosen) {
  QTable t(StateBox({0}, {10}), 1);
  for (int x = 0; x <= 10; ++x) t.at(static_cast<std::size_t>(x), 0) = -x;
  Rng rng(1);
  const BinomialBelief b({0.4}, {10});
  EXPECT_EQ(qmdp_action_mc(t, b, 20, rng), 0);
  EXPECT_EQ(qmdp_exact(t, b), 0);
  EXPECT_EQ(expected_advantage(t, b, 0), 0.0);
}

TEST(Qmdp, PointMassMatchesMdpAction) {
  const QTable& t = small_queue_table();
  const QueueModel q = fixtures::small_queue();
  Rng rng(3);
  for (const State& x : {State{0, 0, 0}, State{5, 5, 5}, State{5, 0, 5}, State{0, 5, 0}}) {
    // theta at the clamp edges gives (almost) a point mass at 0 or N.
    std::vector<double> theta;
    for (int v : x) theta.push_back(v == 0 ? 0.0 : 1.0);
    const BinomialBelief b(theta, q.buffers());
    const std::size_t slot = t.box().index(x);
    if (std::fabs(t.at(slot, 0) - t.at(slot, 1)) < 1e-6) continue;  // exact ties break either way
    const Action best = t.greedy_at(slot);
    EXPECT_EQ(qmdp_action_mc(t, b, 20, rng), best);
    EXPECT_EQ(qmdp_exact(t, b), best);
  }
  const DenseBelief point = DenseBelief::point_mass(t.box(), {2, 4, 1});
  EXPECT_EQ(qmdp_exact(t, point), t.greedy_at(t.box().index({2, 4, 1})));
  EXPECT_EQ(qmdp_action_mc(t, point, 5, rng), t.greedy_at(t.box().index({2, 4, 1})));
}

TEST(Qmdp, EqualColumnsTieToZero) {
  QTable t(StateBox({0}, {3}), 2);
  for (std::size_t s = 0; s < 4; ++s) t.at(s, 0) = t.at(s, 1) = -static_cast<double>(s);
  Rng rng(1);
  EXPECT_EQ(qmdp_action_mc(t, BinomialBelief({0.5}, {3}), 20, rng), 0);
  EXPECT_EQ(qmdp_exact(t, BinomialBelief({0.5}, {3})), 0);
}

TEST(Qmdp, SeparableFixtureAnalyticArgmax) {
  const QTable t = separable();
  // E[Q0] = -10 theta, E[Q1] = -10 (1 - theta).
  EXPECT_EQ(qmdp_exact(t, BinomialBelief({0.3}, {10})), 0);
  EXPECT_EQ(qmdp_exact(t, BinomialBelief({0.7}, {10})), 1);
  EXPECT_EQ(qmdp_exact(t, BinomialBelief({0.5}, {10})), 0);
  const auto e = expected_q(t, BinomialBelief({0.3}, {10}));
  EXPECT_NEAR(e[0], -3.0, 1e-12);
  EXPECT_NEAR(e[1], -7.0, 1e-12);
}

TEST(Qmdp, ShiftInvariance) {
  const QTable& base = small_queue_table();
  QTable shifted = base;
  for (double& q : shifted.data()) q += 123.0;
  const QueueModel q = fixtures::small_queue();
  for (double th : {0.1, 0.35, 0.6, 0.9}) {
    const BinomialBelief b({th, 1.0 - th, 0.5}, q.buffers());
    EXPECT_EQ(qmdp_exact(base, b), qmdp_exact(shifted, b));
    Rng r1(7), r2(7);
    EXPECT_EQ(qmdp_action_mc(base, b, 20, r1), qmdp_action_mc(shifted, b, 20, r2));
  }
}

TEST(Qmdp, MonteCarloDeterministicGivenSeed) {
  const QTable& t = small_queue_table();
  const BinomialBelief b({0.5, 0.5, 0.5}, {5, 5, 5});
  for (int k = 0; k < 20; ++k) {
    Rng a(100 + static_cast<std::uint64_t>(k)), c(100 + static_cast<std::uint64_t>(k));
    EXPECT_EQ(qmdp_action_mc(t, b, 20, a), qmdp_action_mc(t, b, 20, c));
  }
}

TEST(Qmdp, MonteCarloAgreesWithExactWhenGapIsResolved) {
  const QTable& t = small_queue_table();
  const QueueModel q = fixtures::small_queue();
  Rng pick(55);
  std::size_t eligible = 0, agree = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const BinomialBelief b({pick.uniform(), pick.uniform(), pick.uniform()}, q.buffers());
    // Exact gap and the standard error of the k = 20 paired estimator.
    const auto [w, mass] = weights_on_box(b, t.box());
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t s = 0; s < w.size(); ++s) {
      const double d = t.at(s, 0) - t.at(s, 1);
      m1 += w[s] * d;
      m2 += w[s] * d * d;
    }
    const double se = std::sqrt(std::max(m2 - m1 * m1, 0.0) / 20.0);
    if (std::fabs(m1) <= se) continue;
    ++eligible;
    Rng rng(static_cast<std::uint64_t>(trial));
    if (qmdp_action_mc(t, b, 20, rng) == qmdp_exact(t, b)) ++agree;
  }
  ASSERT_GT(eligible, 100u);
  const double rate = static_cast<double>(agree) / static_cast<double>(eligible);
  EXPECT_GE(rate, 0.95) << agree << " of " << eligible;
}

TEST(Qmdp, ExpectedMaxDominatesMaxExpected) {
  const QTable& t = small_queue_table();
  for (double th : {0.2, 0.5, 0.8}) {
    const BinomialBelief b({th, th, 1.0 - th}, {5, 5, 5});
    const auto e = expected_q(t, b);
    const auto [w, mass] = weights_on_box(b, t.box());
    double ev = 0.0;
    for (std::size_t s = 0; s < w.size(); ++s) ev += w[s] * t.value_at(s);
    EXPECT_LE(std::max(e[0], e[1]), ev + 1e-12);
  }
}

TEST(Qmdp, TruncationErrorWhenBeliefLeavesBox) {
  const QTable t = separable();
  try {
    qmdp_exact(t, PoissonBelief({30.0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::truncation);
  }
  // Monte Carlo clamps instead.
  Rng rng(1);
  int clamped = 0;
  EXPECT_EQ(qmdp_action_mc(t, PoissonBelief({30.0}), 20, rng, &clamped), 1);
  EXPECT_GT(clamped, 0);
}

TEST(Qmdp, ParticleExpectation) {
  const QTable t = separable();
  ParticleSet s(std::vector<State>{{1}, {2}, {9}});
  s.weights = {0.25, 0.25, 0.5};
  const auto e = expected_q(t, s);
  EXPECT_NEAR(e[0], -(0.25 + 0.5 + 4.5), 1e-12);
  EXPECT_NEAR(e[1], -(2.25 + 2.0 + 0.5), 1e-12);
  EXPECT_EQ(qmdp_exact(t, s), 1);
}

TEST(Advantage, SurfaceProperties) {
  const QTable t = separable();
  std::vector<std::vector<double>> grid;
  for (int k = 1; k < 20; ++k) grid.push_back({k / 20.0});
  auto make = [](const std::vector<double>& th) { return BinomialBelief(th, {10}); };
  const auto a0 = advantage_surface(t, grid, 0, make);
  const auto a1 = advantage_surface(t, grid, 1, make);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    EXPECT_LE(a0[g], 1e-12);
    EXPECT_LE(a1[g], 1e-12);
    // The larger expected advantage picks the QMDP action.
    const Action region = a1[g] > a0[g] ? 1 : 0;
    EXPECT_EQ(region, qmdp_exact(t, make(grid[g])));
  }
  // Near point mass: A(x0, u).
  EXPECT_NEAR(expected_advantage(t, BinomialBelief({0.0}, {10}), 1), advantage(t, {0}, 1), 1e-6);
}
