#include <gtest/gtest.h>

#include <numeric>

#include "ctpomdp/model.hpp"
#include "ctpomdp/state_box.hpp"
#include "fixtures.hpp"

using namespace ctpomdp;

TEST(Propensity, LotkaVolterraPredation) {
  const CrnModel lv = fixtures::lotka_volterra();
  EXPECT_DOUBLE_EQ(lv.propensity({100, 100}, 0, 1), 250.0);
}

TEST(Propensity, DeficitGivesZero) {
  const CrnModel lv = fixtures::lotka_volterra();
  EXPECT_EQ(lv.propensity({0, 5}, 0, 1), 0.0);
  CrnModel dimer(1, 1, {Reaction{{2}, {0}, {1.0}}});
  EXPECT_EQ(dimer.propensity({1}, 0, 0), 0.0);
  EXPECT_DOUBLE_EQ(dimer.propensity({4}, 0, 0), 6.0);
}

TEST(Propensity, PureBirthIsConstant) {
  CrnModel birth(1, 1, {Reaction{{0}, {1}, {2.5}}});
  for (int x : {0, 1, 17, 1000}) EXPECT_DOUBLE_EQ(birth.propensity({x}, 0, 0), 2.5);
}

TEST(QueueRate, ArrivalServiceAndBlocking) {
  const QueueModel q = fixtures::paper_queue();
  EXPECT_DOUBLE_EQ(q.rate({0, 0, 0}, 0, 3, 0), 10.0);
  EXPECT_DOUBLE_EQ(q.rate({500, 3, 0}, 0, 3, 0), 10.0);
  EXPECT_EQ(q.rate({0, 4, 0}, 0, 0, 2), 0.0);         // empty source
  EXPECT_EQ(q.rate({3, 0, 1000}, 0, 0, 2), 0.0);      // full destination
  EXPECT_DOUBLE_EQ(q.rate({3, 0, 999}, 0, 0, 2), 20.0);
  EXPECT_EQ(q.rate({3, 3, 0}, 1, 0, 2), 0.0);         // routed off by action 1
  EXPECT_EQ(q.rate({1000, 0, 0}, 0, 3, 0), 0.0);      // arrival into full buffer
}

TEST(QueueRate, MultiServerUsesMin) {
  const QueueModel q = fixtures::mm1(10, 1.0, 2.0, 3);
  EXPECT_DOUBLE_EQ(q.rate({2}, 0, 0, 1), 4.0);
  EXPECT_DOUBLE_EQ(q.rate({7}, 0, 0, 1), 6.0);
}

TEST(QueueModel, RejectsOversubscribedRouting) {
  Matrix base{{0.0, 1.0}, {1.0, 0.0}};
  Matrix p{{0.0, 1.5}, {1.0, 0.0}};
  EXPECT_THROW(QueueModel({3}, {1}, base, {p}), Error);
}

TEST(Enumerate, LotkaVolterraOrigin) {
  const Model lv = fixtures::lotka_volterra();
  EXPECT_TRUE(lv.enumerate_transitions({0, 0}, 0).empty());
  EXPECT_TRUE(lv.enumerate_transitions({0, 0}, 1).empty());
}

TEST(Enumerate, QueueAtOrigin) {
  const Model q = fixtures::paper_queue();
  const auto tr = q.enumerate_transitions({0, 0, 0}, 0);
  ASSERT_EQ(tr.size(), 2u);
  for (const auto& t : tr) EXPECT_DOUBLE_EQ(t.rate, 10.0);
  EXPECT_EQ(tr[0].change, (std::vector<int>{1, 0, 0}));
  EXPECT_EQ(tr[1].change, (std::vector<int>{0, 1, 0}));
}

TEST(Enumerate, ClosedLoopConservesTotal) {
  const Model m = fixtures::closed_loop();
  for (Action u = 0; u < 2; ++u)
    for (const auto& t : m.enumerate_transitions({3, 4, 5, 6}, u))
      EXPECT_EQ(std::accumulate(t.change.begin(), t.change.end(), 0), 0);
  EXPECT_TRUE(fixtures::closed_loop().closed());
  EXPECT_FALSE(fixtures::lotka_volterra().closed());
}

TEST(Enumerate, RatesSumToExitRateAndStayInside) {
  const Model q = fixtures::small_queue();
  const StateBox box = StateBox::full(q);
  State x, y;
  for (std::size_t s = 0; s < box.size(); ++s) {
    box.decode(s, x);
    for (Action u = 0; u < 2; ++u) {
      double sum = 0.0;
      for (const auto& t : q.enumerate_transitions(x, u)) {
        EXPECT_GT(t.rate, 0.0);
        sum += t.rate;
        y = x;
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += t.change[i];
        EXPECT_TRUE(q.contains(y));
      }
      EXPECT_DOUBLE_EQ(sum, q.exit_rate(x, u));
      EXPECT_LE(sum, q.queue().max_exit_rate());
    }
  }
}

TEST(Reward, Examples) {
  RewardSpec lv{{100, 100}, 20.0, 5.0};
  EXPECT_DOUBLE_EQ(lv({100, 100}, 0), 0.0);
  EXPECT_DOUBLE_EQ(lv({120, 100}, 1), -0.5);
  RewardSpec q{{0, 0, 0}, 100.0, 5.0};
  EXPECT_DOUBLE_EQ(q({100, 0, 0}, 0), -1.0 / 3.0);
}

TEST(Reward, ValidateRejectsBadSpec) {
  EXPECT_THROW((RewardSpec{{0.0}, 0.0, 1.0}.validate(1)), Error);
  EXPECT_THROW((RewardSpec{{0.0}, 1.0, -1.0}.validate(1)), Error);
  EXPECT_THROW((RewardSpec{{0.0, 0.0}, 1.0, 1.0}.validate(1)), Error);
}

TEST(StateBox, IndexRoundTrip) {
  StateBox box({1, 0, 2}, {3, 4, 2});
  EXPECT_EQ(box.size(), 15u);
  for (std::size_t s = 0; s < box.size(); ++s) EXPECT_EQ(box.index(box.state(s)), s);
  EXPECT_FALSE(box.contains({0, 0, 2}));
  EXPECT_EQ(box.clamp({9, -1, 0}), (State{3, 0, 2}));
}

TEST(StateBox, TotalConstraint) {
  StateBox box({0, 0, 0}, {4, 4, 4}, 4);
  EXPECT_EQ(box.count(), 15u);  // compositions of 4 into 3 parts
  std::size_t valid = 0;
  for (std::size_t s = 0; s < box.size(); ++s) {
    if (!box.valid(s)) continue;
    ++valid;
    const State x = box.state(s);
    EXPECT_EQ(x[0] + x[1] + x[2], 4);
    EXPECT_EQ(box.index(x), s);
  }
  EXPECT_EQ(valid, box.count());
  const State c = box.clamp({6, 3, 0});
  EXPECT_TRUE(box.contains(c));
}

TEST(BoxGenerator, DropsOutOfBoxTargets) {
  const Model lv = fixtures::lotka_volterra();
  StateBox box({0, 0}, {10, 10});
  BoxGenerator gen(lv, box);
  const std::size_t s = box.index({10, 5});
  // Prey birth leaves the box; only predation and predator death remain.
  EXPECT_EQ(gen.end(s, 0) - gen.begin(s, 0), 2);
  EXPECT_DOUBLE_EQ(gen.exit_rate(s, 0), 0.025 * 50 + 1.25 * 5);
}
