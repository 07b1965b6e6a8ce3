#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <random>

#include "ctpomdp/exact_filter.hpp"
#include "ctpomdp/rng.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace ctpomdp;
using namespace oracles;

namespace {

double l1(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
  return s;
}

/// Two-state chain 0 -> 1 at rate 1, 1 -> 0 at rate 2.
Model two_state() { return fixtures::mm1(1, 1.0, 2.0); }

}  // namespace

TEST(MasterRhs, TwoStateHandValue) {
  const Model m = two_state();
  const StateBox box = StateBox::full(m);
  const auto dp = master_rhs(m, 0, DenseBelief(box, {0.5, 0.5}));
  EXPECT_DOUBLE_EQ(dp[0], 0.5);
  EXPECT_DOUBLE_EQ(dp[1], -0.5);
}

TEST(MasterRhs, AbsorbingPointMassIsZero) {
  const Model lv = fixtures::lotka_volterra();
  const StateBox box({0, 0}, {5, 5});
  const auto dp = master_rhs(lv, 0, DenseBelief::point_mass(box, {0, 0}));
  for (double v : dp) EXPECT_EQ(v, 0.0);
}

TEST(MasterRhs, ConservesProbability) {
  const Model q = fixtures::small_queue();
  const StateBox box = StateBox::full(q);
  for (Action u = 0; u < 2; ++u) {
    const auto p = random_on_slice(box, {}, {}, 7 + static_cast<std::uint64_t>(u));
    const auto dp = master_rhs(q, u, DenseBelief(box, p));
    EXPECT_NEAR(std::accumulate(dp.begin(), dp.end(), 0.0), 0.0, 1e-12);
  }
}

TEST(PredictD, ZeroHorizonUnchanged) {
  const Model m = two_state();
  const DenseBelief b(StateBox::full(m), {0.3, 0.7});
  EXPECT_EQ(predict_D(m, 0, b, 0.0).probs(), b.probs());
}

TEST(PredictD, TwoStateConvergesToStationary) {
  const Model m = two_state();
  const auto p = predict_D(m, 0, DenseBelief::point_mass(StateBox::full(m), {0}), 30.0);
  EXPECT_NEAR(p[0], 2.0 / 3.0, 1e-7);
  EXPECT_NEAR(p[1], 1.0 / 3.0, 1e-7);
  // Closed form at finite time: p1(t) = (1 - e^{-3t}) / 3.
  const auto q = predict_D(m, 0, DenseBelief::point_mass(StateBox::full(m), {0}), 0.4);
  EXPECT_NEAR(q[1], (1.0 - std::exp(-1.2)) / 3.0, 1e-7);
}

TEST(PredictD, MatchesMatrixExponentialOnSingleQueue) {
  const Model m = fixtures::mm1(5, 1.0, 2.0);
  const StateBox box = StateBox::full(m);
  const DenseBelief b0 = DenseBelief::point_mass(box, {0});
  for (double h : {0.1, 1.0, 5.0}) {
    const auto p = predict_D(m, 0, b0, h);
    EXPECT_LT(l1(p.probs(), expm_oracle(m, box, 0, b0.probs(), h)), 1e-6) << "h = " << h;
  }
}

TEST(PredictD, MatchesMatrixExponentialOnLotkaVolterraBox) {
  const Model lv = fixtures::lotka_volterra();
  const StateBox box({0, 0}, {13, 13});  // 196 states
  const DenseBelief b0 = DenseBelief::point_mass(box, {6, 5});
  for (Action u = 0; u < 2; ++u) {
    const auto p = predict_D(lv, u, b0, 0.3);
    EXPECT_LT(l1(p.probs(), expm_oracle(lv, box, u, b0.probs(), 0.3)), 1e-6);
  }
}

TEST(PredictD, SemigroupProperty) {
  const Model q = fixtures::small_queue();
  const StateBox box = StateBox::full(q);
  const DenseBelief b0 = DenseBelief::point_mass(box, {2, 0, 4});
  const auto direct = predict_D(q, 1, b0, 1.5);
  const auto split = predict_D(q, 1, predict_D(q, 1, b0, 0.6), 0.9);
  EXPECT_LT(l1(direct.probs(), split.probs()), 1e-7);
  EXPECT_NEAR(direct.total(), 1.0, 1e-9);
  for (double p : direct.probs()) EXPECT_GE(p, 0.0);
}

TEST(UpdateD, PeakedLikelihoodPicksState) {
  const Model m = fixtures::mm1(5, 1.0, 2.0);
  const StateBox box = StateBox::full(m);
  const DenseBelief flat(box, std::vector<double>(6, 1.0 / 6));
  const std::vector<double> y{3.0};
  const auto post = update_D(flat, y, {true}, 0.01);
  const auto it = std::max_element(post.probs().begin(), post.probs().end());
  EXPECT_EQ(it - post.probs().begin(), 3);
  EXPECT_NEAR(post.total(), 1.0, 1e-12);
}

TEST(UpdateD, HugeNoiseKeepsPrior) {
  const StateBox box({0}, {5});
  const DenseBelief prior(box, {0.1, 0.2, 0.3, 0.2, 0.1, 0.1});
  const std::vector<double> y{4.0};
  EXPECT_LT(l1(update_D(prior, y, {true}, 1e12).probs(), prior.probs()), 1e-9);
}

TEST(UpdateD, TwoPointBayesRatio) {
  const StateBox box({0}, {1});
  const DenseBelief prior(box, {0.25, 0.75});
  const std::vector<double> y{0.2};
  const double var = 0.5;
  const double l0 = 0.25 * std::exp(-0.5 * 0.04 / var), l1v = 0.75 * std::exp(-0.5 * 0.64 / var);
  const auto post = update_D(prior, y, {true}, var);
  EXPECT_NEAR(post[0], l0 / (l0 + l1v), 1e-14);
  EXPECT_NEAR(post[1], l1v / (l0 + l1v), 1e-14);
}

TEST(UpdateD, PartialMaskAndDegenerateObservation) {
  const StateBox box({0, 0}, {2, 2});
  const DenseBelief prior(box, std::vector<double>(9, 1.0 / 9));
  const std::vector<double> y{2.0};
  const auto post = update_D(prior, y, {false, true}, 0.1);
  // Second component observed; the first stays uniform.
  EXPECT_NEAR(post.mean()[0], 1.0, 1e-12);
  EXPECT_GT(post.mean()[1], 1.8);
  const std::vector<double> far{1e4};
  try {
    update_D(prior, far, {false, true}, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_observation);
  }
}

TEST(PredictC, ReducesToPredictDWhenObservedBlockIsInert) {
  // X3 never reacts: the slice is invariant and the leak term vanishes.
  const Model m = CrnModel(3, 1, {Reaction{{1, 0, 0}, {0, 1, 0}, {0.7}}, Reaction{{0, 1, 0}, {1, 0, 0}, {0.3}}});
  const StateBox box({0, 0, 0}, {6, 6, 6}, 6);
  const std::vector<int> obs{2}, y{2};
  const DenseBelief b0(box, random_on_slice(box, obs, y, 3));
  const BoxGenerator gen(m, box);
  const auto c = predict_C(gen, 0, b0, obs, y, 1.3);
  const auto d = predict_D(gen, 0, b0, 1.3);
  EXPECT_LT(l1(c.probs(), d.probs()), 1e-9);
}

TEST(PredictC, SupportAndNormalizationPreserved) {
  const Model m = fixtures::closed_loop(0.3);
  const StateBox box({0, 0, 0, 0}, {8, 8, 8, 8}, 8);
  const std::vector<int> obs{2, 3}, y{2, 3};
  const DenseBelief b0(box, random_on_slice(box, obs, y, 5));
  const auto b = predict_C(BoxGenerator(m, box), 1, b0, obs, y, 2.0);
  EXPECT_NEAR(b.total(), 1.0, 1e-9);
  b.for_each([&](const State& x, double p) {
    if (p > 0.0) {
      EXPECT_EQ(x[2], 2);
      EXPECT_EQ(x[3], 3);
    }
  });
}

TEST(PredictC, MatchesConditionedMonteCarlo) {
  // Paths from the prior that show no observed jump over [0, h].
  const Model m = fixtures::closed_loop(0.5);
  const StateBox box({0, 0, 0, 0}, {6, 6, 6, 6}, 6);
  const std::vector<int> obs{2, 3}, y{1, 1};
  const DenseBelief b0(box, random_on_slice(box, obs, y, 11));
  const double h = 0.5;
  const auto exact = predict_C(BoxGenerator(m, box), 0, b0, obs, y, h);

  std::vector<std::pair<State, double>> support;
  b0.for_each([&](const State& x, double p) { support.emplace_back(x, p); });
  Rng rng(404);
  std::vector<double> hits(box.size(), 0.0);
  std::size_t accepted = 0;
  while (accepted < 100'000) {
    double r = rng.uniform(), acc = 0.0;
    State x = support.back().first;
    for (const auto& [s, p] : support)
      if ((acc += p) >= r) {
        x = s;
        break;
      }
    double t = 0.0;
    bool ok = true;
    for (;;) {
      const auto tr = m.enumerate_transitions(x, 0);
      double total = 0.0;
      for (const auto& e : tr) total += e.rate;
      t += rng.exponential(total);
      if (t >= h) break;
      double pick = rng.uniform() * total;
      std::size_t k = 0;
      while (k + 1 < tr.size() && (pick -= tr[k].rate) > 0.0) ++k;
      if (tr[k].change[2] != 0 || tr[k].change[3] != 0) {
        ok = false;
        break;
      }
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += tr[k].change[i];
    }
    if (!ok) continue;
    ++accepted;
    hits[box.index(x)] += 1.0;
  }
  for (std::size_t s = 0; s < box.size(); ++s) {
    if (!box.valid(s)) continue;
    const double p = exact[s];
    const double sigma = std::sqrt(std::max(p * (1.0 - p), 1e-12) / static_cast<double>(accepted));
    EXPECT_NEAR(hits[s] / static_cast<double>(accepted), p, 3.0 * sigma + 1e-9) << "slot " << s;
  }
}

TEST(UpdateC, MatchesExactJumpFormulaOnClosedNetwork) {
  const CrnModel crn = fixtures::closed_loop();
  const StateBox box({0, 0, 0, 0}, {8, 8, 8, 8}, 8);
  const std::vector<int> obs{2, 3}, y{2, 2};
  const DenseBelief prior(box, random_on_slice(box, obs, y, 21));
  const BoxGenerator gen(crn, box);
  for (const auto& y_new : std::vector<std::vector<int>>{{3, 2}, {1, 2}, {2, 3}, {2, 1}, {3, 1}, {1, 3}})
    for (Action u = 0; u < 2; ++u) {
      const auto post = update_C(gen, u, prior, obs, y_new);
      const auto want = exact_jump_formula(crn, u, prior, obs, y, y_new);
      double worst = 0.0;
      for (std::size_t s = 0; s < want.size(); ++s) worst = std::max(worst, std::fabs(post[s] - want[s]));
      EXPECT_LT(worst, 1e-9);
      EXPECT_NEAR(post.total(), 1.0, 1e-12);
    }
}

TEST(UpdateC, PointMassWithUniqueReactionShifts) {
  const CrnModel crn = fixtures::closed_loop();
  const StateBox box({0, 0, 0, 0}, {8, 8, 8, 8}, 8);
  const DenseBelief prior = DenseBelief::point_mass(box, {2, 1, 2, 3});
  // X3 + 1 with X4 unchanged: only X1 -> X3.
  const auto post = update_C(BoxGenerator(crn, box), 0, prior, std::vector<int>{2, 3}, std::vector<int>{3, 3});
  EXPECT_NEAR(post[box.index({1, 1, 3, 3})], 1.0, 1e-15);
}

TEST(UpdateC, EqualRatesGiveEqualMixture) {
  // X1 -> X3 and X2 -> X3 at the same rate from a state with X1 = X2.
  const CrnModel crn(3, 1, {Reaction{{1, 0, 0}, {0, 0, 1}, {0.4}}, Reaction{{0, 1, 0}, {0, 0, 1}, {0.4}}});
  const StateBox box({0, 0, 0}, {6, 6, 6}, 6);
  const DenseBelief prior = DenseBelief::point_mass(box, {2, 2, 2});
  const auto post = update_C(BoxGenerator(crn, box), 0, prior, std::vector<int>{2}, std::vector<int>{3});
  EXPECT_NEAR(post[box.index({1, 2, 3})], 0.5, 1e-15);
  EXPECT_NEAR(post[box.index({2, 1, 3})], 0.5, 1e-15);
}

TEST(UpdateC, ImpossibleJumpReported) {
  const CrnModel crn = fixtures::closed_loop();
  const StateBox box({0, 0, 0, 0}, {8, 8, 8, 8}, 8);
  const DenseBelief prior = DenseBelief::point_mass(box, {2, 1, 2, 3});
  try {
    update_C(BoxGenerator(crn, box), 0, prior, std::vector<int>{2, 3}, std::vector<int>{4, 3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::impossible_jump);
  }
}

TEST(Truncation, MassOnArtificialFaceIsReported) {
  const Model lv = fixtures::lotka_volterra();
  const StateBox box({0, 0}, {10, 10});
  const DenseBelief edge = DenseBelief::point_mass(box, {10, 3});
  EXPECT_NEAR(truncation_mass(edge, lv), 1.0, 0.0);
  EXPECT_THROW(check_truncation(edge, lv), Error);
  // Model caps are not artificial: a full queue buffer is not a truncation.
  const Model q = fixtures::mm1(5, 1.0, 2.0);
  EXPECT_EQ(truncation_mass(DenseBelief::point_mass(StateBox::full(q), {5}), q), 0.0);
  // Zero is the natural lower bound of a CRN.
  EXPECT_EQ(truncation_mass(DenseBelief::point_mass(box, {0, 4}), lv), 0.0);
}
