#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "benchmarks.hpp"
#include "errors.hpp"
#include "random.hpp"
#include "rlenv.hpp"

namespace ampsize {
namespace {

ParamDef lin(double lo, double hi) { return {"p", lo, hi, ParamScale::Linear}; }
ParamDef logp(double lo, double hi) { return {"p", lo, hi, ParamScale::Logarithmic}; }

TEST(ScaleAction, LinearAndLog) {
  EXPECT_NEAR(scale_param(lin(1e-6, 100e-6), 0.0), 50.5e-6, 1e-18);
  EXPECT_NEAR(scale_param(logp(1e3, 100e3), 0.0), 10e3, 1e-9);
  const std::vector<ParamDef> params = {lin(1e-6, 100e-6), logp(1e3, 100e3)};
  const std::vector<double> lo = {-1.0, -1.0}, hi = {1.0, 1.0};
  EXPECT_EQ(scale_action(lo, params).values, (std::vector<double>{1e-6, 1e3}));
  EXPECT_EQ(scale_action(hi, params).values, (std::vector<double>{100e-6, 100e3}));
  EXPECT_NEAR(normalize_param(params[1], scale_param(params[1], 0.3)), 0.3, 1e-12);
}

TEST(ScaleAction, ClampsAndCounts) {
  const std::vector<ParamDef> params = {lin(1.0, 2.0), logp(1.0, 10.0)};
  std::size_t clamped = 0;
  const std::vector<double> a = {1.5, -3.0};
  const ParamVector x = scale_action(a, params, &clamped);
  EXPECT_EQ(clamped, 2u);
  EXPECT_EQ(x.values, (std::vector<double>{2.0, 1.0}));
  const std::vector<double> wrong = {0.0};
  EXPECT_THROW(scale_action(wrong, params), CircuitError);
}

class Tia2Env : public ::testing::Test {
 protected:
  const BenchmarkDef& def = find_benchmark("tia2");
  CircuitObjective objective{parse_netlist(def.netlist_text), def.spec, def.sim};
};

TEST_F(Tia2Env, Layout) {
  CircuitEnv env(objective, EnvConfig{});
  const auto& l = env.layout();
  // nodes vdd, in, n1, out; supply current; 16 magnitudes; 16 phases; 5-step one-hot.
  EXPECT_EQ(l.global_dim, 4u + 1u + 32u + 5u);
  EXPECT_EQ(l.positions, 5u);
  EXPECT_EQ(l.local_dim, kLocalFeatures);
  EXPECT_EQ(l.action_dim, 7u);
  const std::vector<std::vector<std::size_t>> groups = {{0, 1}, {4}, {5}, {2, 3}, {6}};
  EXPECT_EQ(l.group_params, groups);
  EXPECT_EQ(l.total(), l.global_dim + 5u * 8u);
}

TEST_F(Tia2Env, ResetIsZeroAndIdempotent) {
  CircuitEnv env(objective, EnvConfig{});
  const Observation a = env.reset();
  EXPECT_TRUE(std::all_of(a.begin(), a.end(), [](double v) { return v == 0.0; }));
  env.step(std::vector<double>(7, 0.1));
  EXPECT_EQ(env.reset(), a);
  EXPECT_EQ(env.reset(), a);
  EXPECT_EQ(objective.spec().items.size(), def.spec.items.size());
}

TEST_F(Tia2Env, ContractViolations) {
  CircuitEnv env(objective, EnvConfig{2, 16, {}, 0});
  const std::vector<double> a(7, 0.0);
  EXPECT_THROW(env.step(a), ContractError);
  env.reset();
  env.step(a);
  EXPECT_TRUE(env.step(a).done);
  EXPECT_THROW(env.step(a), ContractError);
}

TEST_F(Tia2Env, ConstantAgentRewards) {
  CircuitEnv env(objective, EnvConfig{});
  env.reset();
  const std::vector<double> a(7, 0.2);
  std::vector<StepResult> steps;
  for (int i = 0; i < 5; ++i) steps.push_back(env.step(a));
  EXPECT_EQ(steps[0].reward, steps[0].d);
  for (int i = 1; i < 5; ++i) EXPECT_EQ(steps[i].reward, 0.0);
  for (int i = 0; i < 4; ++i) EXPECT_FALSE(steps[i].done);
  EXPECT_TRUE(steps[4].done);
}

TEST_F(Tia2Env, TelescopingBoundednessAndOneHot) {
  CircuitEnv env(objective, EnvConfig{});
  Rng rng = make_rng(3, "test");
  for (int ep = 0; ep < 10; ++ep) {
    env.reset();
    double sum = 0.0, last = 0.0;
    for (int t = 0; t < 5; ++t) {
      std::vector<double> a(7);
      for (auto& v : a) v = uniform(rng, -1.0, 1.0);
      const StepResult r = env.step(a);
      sum += r.reward;
      last = r.d;
      const auto& l = env.layout();
      const std::size_t onehot = l.global_dim - 5;
      for (int k = 0; k < 5; ++k) EXPECT_EQ(r.observation[onehot + k], k == t ? 1.0 : 0.0);
      for (double v : r.observation) {
        ASSERT_TRUE(std::isfinite(v));
        ASSERT_LE(std::abs(v), 100.0);
      }
    }
    EXPECT_NEAR(sum, last, 1e-12 * std::max(1.0, std::abs(last)));
  }
}

TEST_F(Tia2Env, DeterministicStream) {
  auto run = [&] {
    CircuitEnv env(objective, EnvConfig{});
    Rng rng = make_rng(9, "test");
    std::vector<double> out;
    for (int ep = 0; ep < 3; ++ep) {
      env.reset();
      for (int t = 0; t < 5; ++t) {
        std::vector<double> a(7);
        for (auto& v : a) v = uniform(rng, -1.0, 1.0);
        const StepResult r = env.step(a);
        out.insert(out.end(), r.observation.begin(), r.observation.end());
        out.push_back(r.reward);
      }
    }
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST_F(Tia2Env, ObserveNormalization) {
  CircuitEnv env(objective, EnvConfig{});
  SimResult sim;
  sim.ok = true;
  sim.dc.node_voltages = {1.8, 0.9, 0.45, 0.0};
  sim.dc.supply_voltage = 1.8;
  sim.dc.supply_current = 2e-3;
  sim.ac.freqs = {1.0, 10.0};
  sim.ac.values = {std::complex<double>(1e6, 0.0), std::complex<double>(0.0, 1e6)};
  TransistorOpPoint op;
  op.vth = 0.4;
  op.gm = 5e-3;
  op.id = 1e-4;
  op.gamma_eff = 2.0 / 3.0;
  sim.dc.transistor_ops = {op, op};
  const Observation o = env.observe(sim, 2);
  EXPECT_DOUBLE_EQ(o[1], 0.5);
  EXPECT_DOUBLE_EQ(o[4], 2.0);
  EXPECT_NEAR(o[5], 1.0, 1e-12);         // log10(1e6) / 6 at the first sampled frequency
  EXPECT_NEAR(o[5 + 16 + 15], 0.5, 1e-12);  // phase pi/2 at the last one
  const std::size_t onehot = env.layout().global_dim - 5;
  EXPECT_EQ(o[onehot + 2], 1.0);
  EXPECT_EQ(std::accumulate(o.begin() + static_cast<long>(onehot), o.begin() + static_cast<long>(onehot + 5), 0.0), 1.0);
  const double* m1 = &o[env.layout().global_dim];
  EXPECT_DOUBLE_EQ(m1[0], 0.4);
  EXPECT_DOUBLE_EQ(m1[1], 0.5);
  EXPECT_DOUBLE_EQ(m1[3], 0.1);
  // RD1 is a passive position: all zeros.
  const double* rd1 = m1 + kLocalFeatures;
  for (std::size_t k = 0; k < kLocalFeatures; ++k) EXPECT_EQ(rd1[k], 0.0);
}

TEST(FailingCircuit, FloorRewardAndZeroLocals) {
  const Netlist n = parse_netlist(
      ".param w 1u 10u log\nIIN 0 in 0\nR1 in 0 1k\nM1 in in 0 W={w} L=1u\nC1 in x 1p\nC2 x y 1p\n");
  DesignSpec spec;
  spec.items = {{"gain", 1.0, Direction::AtLeast, SpecClass::HardConstraint},
                {"bandwidth", 1.0, Direction::AtLeast, SpecClass::OptimizationTarget}};
  spec.reward = RewardConfig::defaults_for(1, 1);
  SimConfig cfg;
  cfg.ac_input = "IIN";
  cfg.ac_output = "in";
  CircuitObjective obj(n, spec, cfg);
  CircuitEnv env(obj, EnvConfig{3, 4, {}, 0});
  env.reset();
  const std::vector<double> a = {0.0};
  const StepResult r1 = env.step(a);
  EXPECT_EQ(r1.d, spec.reward.failure_floor);
  EXPECT_EQ(r1.reward, spec.reward.failure_floor);
  const StepResult r2 = env.step(a);
  EXPECT_EQ(r2.reward, 0.0);
  for (std::size_t i = 0; i < r2.observation.size(); ++i) {
    const bool onehot = i == env.layout().global_dim - 3 + 1;
    EXPECT_EQ(r2.observation[i], onehot ? 1.0 : 0.0) << i;
  }
}

TEST(Quadratic, ValueAndRewards) {
  QuadraticEnv env({0.5, -0.5}, 2);
  env.reset();
  const std::vector<double> a = {0.5, 0.5};
  const StepResult r1 = env.step(a);
  EXPECT_DOUBLE_EQ(r1.d, -1.0);
  EXPECT_DOUBLE_EQ(r1.reward, -1.0);
  const std::vector<double> b = {0.5, -0.5};
  const StepResult r2 = env.step(b);
  EXPECT_DOUBLE_EQ(r2.reward, 1.0);
  EXPECT_TRUE(r2.done);
  EXPECT_THROW(env.step(b), ContractError);
}

}  // namespace
}  // namespace ampsize
