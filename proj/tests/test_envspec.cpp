#include <gtest/gtest.h>

#include <cmath>

#include "envspec.hpp"
#include "errors.hpp"
#include "random.hpp"

namespace ampsize {
namespace {

MetricSet metrics(double gain, double bandwidth, double power) {
  MetricSet m;
  m.valid = true;
  m.gain = gain;
  m.gain_db_ohm = 20.0 * std::log10(gain);
  m.bandwidth = bandwidth;
  m.power = power;
  m.gate_area = 1e-12;
  m.input_noise_density = 1e-12;
  return m;
}

DesignSpec two_hard_one_target() {
  DesignSpec s;
  s.items = {{"gain", 100.0, Direction::AtLeast, SpecClass::HardConstraint},
             {"power", 1e-3, Direction::AtMost, SpecClass::HardConstraint},
             {"bandwidth", 1e9, Direction::AtLeast, SpecClass::OptimizationTarget}};
  s.reward = RewardConfig::defaults_for(2, 1);
  return s;
}

TEST(QRatio, Directions) {
  const SpecItem bw{"bandwidth", 90e6, Direction::AtLeast, SpecClass::HardConstraint};
  const SpecItem pw{"power", 3e-3, Direction::AtMost, SpecClass::HardConstraint};
  EXPECT_NEAR(q_ratio(bw, 92.5e6), 92.5 / 90.0, 1e-15);
  EXPECT_NEAR(q_ratio(bw, 92.5e6), 1.0278, 1e-4);
  EXPECT_NEAR(q_ratio(pw, 2.5e-3), 1.2, 1e-15);
  EXPECT_EQ(q_ratio(bw, 90e6), 1.0);
  EXPECT_EQ(q_ratio(pw, 3e-3), 1.0);
}

TEST(RewardDefaults, Construction) {
  const RewardConfig r = RewardConfig::defaults_for(2, 1);
  EXPECT_DOUBLE_EQ(r.alpha, 0.1);
  EXPECT_DOUBLE_EQ(r.e0, -2.1);
  EXPECT_DOUBLE_EQ(r.e1, 0.0);
  EXPECT_DOUBLE_EQ(r.failure_floor, -3.1);
}

TEST(Score, UnsatisfiedBranchHandArithmetic) {
  const DesignSpec s = two_hard_one_target();
  const Score sc = score(s, metrics(200.0, 0.8e9, 2e-3));
  EXPECT_FALSE(sc.satisfied);
  EXPECT_NEAR(sc.d, 1.0 + 0.5 + 0.1 * 0.8 - 2.1, 1e-12);
  EXPECT_NEAR(sc.d, -0.52, 1e-12);
}

TEST(Score, SatisfiedBranch) {
  const DesignSpec s = two_hard_one_target();
  const Score sc = score(s, metrics(200.0, 0.8e9, 0.5e-3));
  EXPECT_TRUE(sc.satisfied);
  EXPECT_NEAR(sc.d, 0.8, 1e-12);
}

TEST(Score, BoundaryCountsAsSatisfied) {
  const DesignSpec s = two_hard_one_target();
  const Score sc = score(s, metrics(100.0, 1e9, 1e-3));
  EXPECT_TRUE(sc.satisfied);
  EXPECT_DOUBLE_EQ(sc.d, 1.0);
}

TEST(Score, InvalidMetricsGetFloor) {
  const DesignSpec s = two_hard_one_target();
  MetricSet m = metrics(200.0, 1e9, 1e-3);
  m.valid = false;
  const Score sc = score(s, m);
  EXPECT_TRUE(sc.failed);
  EXPECT_FALSE(sc.satisfied);
  EXPECT_EQ(sc.d, s.reward.failure_floor);
  m = metrics(200.0, 1e9, 1e-3);
  m.bandwidth = 0.0;
  EXPECT_TRUE(score(s, m).failed);
}

TEST(Score, ZeroAtMostHardMetricIsMet) {
  DesignSpec s;
  s.items = {{"peaking", 1.0, Direction::AtMost, SpecClass::HardConstraint},
             {"bandwidth", 1e9, Direction::AtLeast, SpecClass::OptimizationTarget}};
  s.reward = RewardConfig::defaults_for(1, 1);
  MetricSet m = metrics(10.0, 2e9, 1e-3);
  m.peaking = 0.0;
  const Score sc = score(s, m);
  EXPECT_TRUE(sc.satisfied);
  EXPECT_DOUBLE_EQ(sc.d, 2.0);
}

TEST(Score, ClippingAndMonotonicity) {
  const DesignSpec s = two_hard_one_target();
  // Over-satisfying a hard constraint does not change d.
  EXPECT_EQ(score(s, metrics(200.0, 2e9, 0.5e-3)).d, score(s, metrics(5000.0, 2e9, 0.5e-3)).d);
  EXPECT_EQ(score(s, metrics(200.0, 0.5e9, 2e-3)).d, score(s, metrics(5000.0, 0.5e9, 2e-3)).d);
  // Satisfied branch strictly increases with the at_least target.
  EXPECT_LT(score(s, metrics(200.0, 2e9, 0.5e-3)).d, score(s, metrics(200.0, 2.1e9, 0.5e-3)).d);
}

TEST(Score, BranchOrderingFuzz) {
  const DesignSpec s = two_hard_one_target();
  Rng rng = make_rng(11, "test");
  double max_unsat = -INFINITY, min_sat = INFINITY;
  for (int i = 0; i < 5000; ++i) {
    const MetricSet m = metrics(std::exp(uniform(rng, 0.0, 10.0)), std::exp(uniform(rng, 10.0, 30.0)),
                                std::exp(uniform(rng, -12.0, -3.0)));
    const Score sc = score(s, m);
    if (sc.satisfied) {
      min_sat = std::min(min_sat, sc.d);
    } else {
      max_unsat = std::max(max_unsat, sc.d);
    }
  }
  EXPECT_LT(max_unsat, 0.0);
  EXPECT_GT(min_sat, 0.0);
}

TEST(Spec, Validation) {
  DesignSpec s = two_hard_one_target();
  EXPECT_NO_THROW(s.validate());
  EXPECT_EQ(s.hard_count(), 2u);
  EXPECT_EQ(s.target_count(), 1u);
  DesignSpec bad = s;
  bad.items[0].metric_key = "speed";
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = s;
  bad.items[1].metric_key = "gain";
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = s;
  bad.items[0].threshold = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = s;
  bad.items.pop_back();
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(RelativeScore, ZeroAgainstItself) {
  const DesignSpec s = two_hard_one_target();
  const MetricSet m = metrics(200.0, 0.8e9, 2e-3);
  EXPECT_EQ(relative_score(s, m, m), 0.0);
  EXPECT_NEAR(relative_score(s, metrics(200.0, 1.8e9, 2e-3), m), 1.0, 1e-12);
}

}  // namespace
}  // namespace ampsize
