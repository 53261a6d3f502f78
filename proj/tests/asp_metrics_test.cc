#include "hns/asp_metrics.h"

#include <gtest/gtest.h>

#include <random>

#include "hns/error.h"
#include "support/random_scenario.h"

namespace hns {
namespace {

Frame At(int id, EcuId src, Micros t) {
  Frame f;
  f.id = MessageId(id);
  f.payload.assign(8, 0x5A);
  f.source = src;
  f.release_time = t;
  return f;
}

SlotStats Row(int k, int instance, int ct, int n, int tbi) {
  SlotStats s;
  s.hyper_period = k;
  s.instance = instance;
  s.ct = ct;
  s.n = n;
  s.tbi = tbi;
  return s;
}

TEST(SlotStatsTest, HandCountedSyntheticTrace) {
  // V L H H V back to back: the second victim has n = 2, tbi = 3.
  std::vector<std::vector<Frame>> q(2);
  q[0] = {At(0x100, 0, 0), At(0x100, 0, 1000)};
  q[1] = {At(0x300, 1, 540), At(0x10, 1, 1000), At(0x20, 1, 1000)};
  const BusTrace t = RunBus(q, 20000, 250000);
  const TraceIndex index(t.events, {});
  const auto rows = ComputeSlotStats(index, MessageId(0x100), 1, 20000);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].ct, 1);
  EXPECT_EQ(rows[1].n, 2);
  EXPECT_EQ(rows[1].tbi, 3);
  EXPECT_EQ(rows[0].n, 0);  // nothing before it
}

TEST(SlotStatsTest, IdleBreaksWindow) {
  std::vector<std::vector<Frame>> q(2);
  q[1] = {At(0x10, 1, 0)};
  q[0] = {At(0x100, 0, 2000)};
  const BusTrace t = RunBus(q, 20000, 250000);
  const TraceIndex index(t.events, {});
  const auto rows = ComputeSlotStats(index, MessageId(0x100), 1, 20000);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].n, 0);
  EXPECT_EQ(rows[0].tbi, 1);
}

TEST(SlotStatsTest, MissingInstanceHasZeroCt) {
  std::vector<std::vector<Frame>> q(1);
  q[0] = {At(0x100, 0, 0), At(0x100, 0, 5000), At(0x100, 0, 20000)};
  const BusTrace t = RunBus(q, 40000, 250000);
  const TraceIndex index(t.events, {});
  const auto rows = ComputeSlotStats(index, MessageId(0x100), 2, 20000);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[3].hyper_period, 1);
  EXPECT_EQ(rows[3].instance, 2);
  EXPECT_EQ(rows[3].ct, 0);
  EXPECT_TRUE(ComputeSlotStats(index, MessageId(0x200), 2, 20000).empty());
}

TEST(SlotAspTest, FormulaExamples) {
  EXPECT_DOUBLE_EQ(SlotAsp({Row(0, 1, 1, 2, 3)}, 1), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(SlotAsp({Row(0, 1, 0, 2, 3), Row(1, 1, 0, 0, 0)}, 2), 0.0);
  EXPECT_DOUBLE_EQ(SlotAsp({Row(0, 1, 1, 1, 2), Row(1, 1, 1, 1, 2)}, 2), 0.5);
  EXPECT_DOUBLE_EQ(SlotTerm(Row(0, 1, 1, 0, 0), 1), 0.0);  // tbi = 0
}

TEST(SumAspTest, AddsAndFlagsSaturation) {
  EXPECT_DOUBLE_EQ(SumAsp({0.0, 0.0}).value, 0.0);
  const TotalAsp t = SumAsp({0.1, 0.2});
  EXPECT_NEAR(t.value, 0.3, 1e-15);
  EXPECT_FALSE(t.saturated);
  const TotalAsp s = SumAsp({0.7, 0.6});
  EXPECT_NEAR(s.value, 1.3, 1e-15);
  EXPECT_TRUE(s.saturated);
}

TEST(RandomizationBoundTest, Examples) {
  EXPECT_DOUBLE_EQ(RandomizationBound(5, 2, 8), 3.0 / 8.0);
  EXPECT_DOUBLE_EQ(RandomizationBound(4, 4, 9), 0.0);
  EXPECT_DOUBLE_EQ(RandomizationBound(3, 0, 7), 3.0 / 7.0);
  EXPECT_DOUBLE_EQ(RandomizationBound(3, 1, 0), 0.0);
}

TEST(ConditionalAspTest, RuleExamples) {
  const std::vector<SlotStats> rows{Row(0, 1, 1, 3, 4), Row(0, 2, 1, 2, 3),
                                    Row(0, 3, 1, 3, 4)};
  const std::vector<std::optional<SlotDecision>> ds{
      SlotDecision{ObfAction::kSkip, 3, 0},
      SlotDecision{ObfAction::kReorder, 1, 1},
      SlotDecision{ObfAction::kSkipPredecessor, 2, 0}};
  const AspBreakdown b = ConditionalAsp(rows, ds, 1);
  EXPECT_DOUBLE_EQ(b.rows[0].asp_conditional, 0.0);
  EXPECT_DOUBLE_EQ(b.rows[1].asp_conditional, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(b.rows[2].asp_conditional, 1.0 / 4.0);
  EXPECT_DOUBLE_EQ(b.rows[2].asp, 3.0 / 4.0);
  EXPECT_DOUBLE_EQ(b.rule_frequency[static_cast<int>(ObfAction::kSkip)],
                   1.0 / 3.0);
  EXPECT_DOUBLE_EQ(b.total, 3.0 / 4.0 + 2.0 / 3.0 + 3.0 / 4.0);
}

TEST(ConditionalAspTest, RejectsUncoveredOrWeakPlans) {
  const std::vector<SlotStats> rows{Row(0, 1, 1, 3, 4)};
  EXPECT_THROW(ConditionalAsp(rows, {std::nullopt}, 1), PlanError);
  EXPECT_THROW(ConditionalAsp(rows, {}, 1), PlanError);
  EXPECT_THROW(
      ConditionalAsp(rows, {SlotDecision{ObfAction::kSkipPredecessor, 0, 0}}, 1),
      PlanError);
  EXPECT_THROW(
      ConditionalAsp(rows, {SlotDecision{ObfAction::kReorder, 1, 2}}, 1),
      PlanError);
  // A row with an empty window needs no decision.
  EXPECT_NO_THROW(ConditionalAsp({Row(0, 1, 1, 0, 4)}, {std::nullopt}, 1));
}

// Random rows and legal decisions: conditional never exceeds the baseline,
// strictly below it where a rule applied, and every value is a probability.
TEST(ConditionalAspTest, NeverWorseThanBaseline) {
  std::mt19937 rng(13);
  for (int trial = 0; trial < 500; ++trial) {
    const int recon = 1 + trial % 3;
    std::vector<SlotStats> rows;
    std::vector<std::optional<SlotDecision>> ds;
    for (int k = 0; k < recon; ++k) {
      for (int j = 1; j <= 4; ++j) {
        const int tbi = rng() % 10;
        const int n = tbi == 0 ? 0 : rng() % (tbi + 1);
        const int ct = rng() % 5 ? 1 : 0;
        rows.push_back(Row(k, j, ct, ct ? n : 0, ct ? tbi : 0));
        if (!ct || n == 0) {
          ds.push_back(std::nullopt);
          continue;
        }
        SlotDecision d;
        switch (rng() % 4) {
          case 0:
            break;
          case 1:
            d.rule = ObfAction::kSkip;
            d.window_reduction = n;
            break;
          case 2:
            d.rule = ObfAction::kSkipPredecessor;
            d.window_reduction = 1 + rng() % n;
            break;
          case 3:
            d.rule = ObfAction::kReorder;
            d.eq_pri_size = 1 + rng() % n;
            d.window_reduction = d.eq_pri_size;
            break;
        }
        ds.push_back(d);
      }
    }
    const AspBreakdown b = ConditionalAsp(rows, ds, recon);
    for (const AspRow& r : b.rows) {
      EXPECT_GE(r.asp, 0.0);
      EXPECT_LE(r.asp, 1.0);
      EXPECT_LE(r.asp_conditional, r.asp);
      if (r.rule != ObfAction::kNone) EXPECT_LT(r.asp_conditional, r.asp);
      if (r.rule == ObfAction::kSkip) EXPECT_EQ(r.asp_conditional, 0.0);
    }
    for (const auto& [j, v] : b.per_slot) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0 + 1e-12);
      EXPECT_LE(b.per_slot_conditional.at(j), v);
    }
  }
}

// ComputeSlotStats and SlotAsp against the independent trace walk.
TEST(SlotStatsTest, MatchesEnumerationOracle) {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const Micros H = 20000;
    const int recon = 1 + trial % 3;
    std::vector<std::vector<Frame>> q(3);
    for (int k = 0; k < recon; ++k) {
      const int victims = 1 + rng() % 3;
      for (int i = 0; i < victims; ++i) {
        q[0].push_back(At(0x100, 0, k * H + rng() % H));
      }
      for (int i = 0; i < 7; ++i) {
        const int id = 0x10 * (1 + rng() % 40);
        q[1 + rng() % 2].push_back(At(id, 1, k * H + rng() % H));
      }
    }
    for (int n = 0; n < 3; ++n) {
      for (Frame& f : q[n]) f.source = n;
      std::stable_sort(q[n].begin(), q[n].end(),
                       [](const Frame& a, const Frame& b) {
                         return a.release_time < b.release_time;
                       });
    }
    const BusTrace t = RunBus(q, recon * H + 5000, 250000);
    const TraceIndex index(t.events, {});
    const auto rows = ComputeSlotStats(index, MessageId(0x100), recon, H);
    const auto oracle =
        testing::EnumerateSlots(t.events, MessageId(0x100), recon, H, 0,
                                [](const BusEvent&) { return false; });
    ASSERT_EQ(rows.size(), oracle.size()) << "trial " << trial;
    std::map<int, double> expect;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      EXPECT_EQ(rows[i].ct, oracle[i].ct);
      EXPECT_EQ(rows[i].n, oracle[i].n) << "trial " << trial << " row " << i;
      if (oracle[i].ct) EXPECT_EQ(rows[i].tbi, oracle[i].tbi);
      if (oracle[i].ct && oracle[i].tbi > 0) {
        expect[oracle[i].instance] +=
            (1.0 / recon) * oracle[i].n / static_cast<double>(oracle[i].tbi);
      } else {
        expect[oracle[i].instance] += 0.0;
      }
    }
    const auto per_slot = PerSlotAsp(rows, recon);
    for (const auto& [j, v] : expect) {
      EXPECT_NEAR(per_slot.at(j), v, 1e-12);
    }
  }
}

}  // namespace
}  // namespace hns
