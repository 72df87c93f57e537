#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "baselines.hpp"

namespace ampsize {
namespace {

Objective sphere(std::vector<double> center, long* calls = nullptr) {
  return [center, calls](std::span<const double> x) {
    if (calls) ++*calls;
    double d = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) d -= (x[j] - center[j]) * (x[j] - center[j]);
    return EvalOutcome{d, d > -0.01};
  };
}

TEST(Random, BudgetOneAndMonotoneBest) {
  long calls = 0;
  const SearchResult one = random_search(sphere({0.0, 0.0}, &calls), 2, 1, 0);
  EXPECT_EQ(calls, 1);
  EXPECT_EQ(one.trace.size(), 1u);
  EXPECT_EQ(one.best_d, one.trace[0]);

  const SearchResult r = random_search(sphere({0.2, -0.3, 0.1}), 3, 300, 5);
  double running = -INFINITY;
  for (double d : r.trace) running = std::max(running, d);
  EXPECT_EQ(r.best_d, running);
  for (double v : r.best) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Random, DeterministicPerSeed) {
  const auto a = random_search(sphere({0.0, 0.0}), 2, 50, 7);
  const auto b = random_search(sphere({0.0, 0.0}), 2, 50, 7);
  const auto c = random_search(sphere({0.0, 0.0}), 2, 50, 8);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_NE(a.trace, c.trace);
}

TEST(Grid, EnumeratesProductInOrder) {
  std::vector<std::vector<double>> seen;
  const Objective record = [&](std::span<const double> x) {
    seen.emplace_back(x.begin(), x.end());
    return EvalOutcome{0.0, false};
  };
  const SearchResult r = grid_search(record, {3, 2, 1});
  ASSERT_EQ(seen.size(), 6u);
  EXPECT_EQ(r.evaluations, 6);
  const std::vector<std::vector<double>> expected = {{-1, -1, 0}, {-1, 1, 0}, {0, -1, 0},
                                                     {0, 1, 0},   {1, -1, 0}, {1, 1, 0}};
  EXPECT_EQ(seen, expected);
}

TEST(Grid, CountsForBudget) {
  for (std::size_t dim : {1u, 3u, 7u, 10u}) {
    for (long budget : {1L, 7L, 100L, 600L, 20000L}) {
      const auto counts = grid_counts_for_budget(dim, budget);
      ASSERT_EQ(counts.size(), dim);
      long product = 1;
      for (int c : counts) product *= c;
      EXPECT_LE(product, budget);
      // Maximal: growing any dimension would overshoot.
      for (int c : counts) EXPECT_GT(product / c * (c + 1), budget);
    }
  }
  EXPECT_EQ(grid_counts_for_budget(2, 100), (std::vector<int>{10, 10}));
}

TEST(Gp, InterpolatesTrainingData) {
  Rng rng = make_rng(1, "test");
  Matrix x(8, 2);
  Vector y(8);
  for (int i = 0; i < 8; ++i) {
    x(i, 0) = uniform(rng, 0.0, 1.0);
    x(i, 1) = uniform(rng, 0.0, 1.0);
    y(i) = std::sin(3 * x(i, 0)) + x(i, 1);
  }
  const GPModel m = GPModel::fit_with(x, y, {{0.3, 0.3}, 1.0, 1e-10});
  Vector mean, var;
  m.predict(x, mean, var);
  for (int i = 0; i < 8; ++i) {
    EXPECT_NEAR(m.unstandardize(mean(i)), y(i), 1e-6);
    EXPECT_GE(var(i), 0.0);
    EXPECT_LT(var(i), 1e-6);
  }
}

TEST(Gp, RevertsToPriorFarFromData) {
  Matrix x(2, 1);
  x << 0.0, 0.05;
  Vector y(2);
  y << 1.0, 3.0;
  const GPModel m = GPModel::fit_with(x, y, {{0.01}, 1.0, 1e-8});
  Vector mean, var;
  m.predict((Matrix(1, 1) << 1.0).finished(), mean, var);
  EXPECT_NEAR(var(0), 1.0, 0.01);
  EXPECT_NEAR(mean(0), 0.0, 1e-6);
}

TEST(Gp, OneDimensionalMidpoint) {
  Matrix x(2, 1);
  x << 0.0, 1.0;
  Vector y(2);
  y << 0.0, 1.0;
  Rng rng = make_rng(2, "test");
  const GPModel m = gp_fit(x, y, rng, 50);
  Vector mean, var;
  m.predict((Matrix(1, 1) << 0.5).finished(), mean, var);
  const double mid = m.unstandardize(mean(0));
  EXPECT_GT(mid, 0.0);
  EXPECT_LT(mid, 1.0);
  EXPECT_TRUE(std::isfinite(m.log_marginal_likelihood()));
}

TEST(Gp, IdenticalTargetsAreDegenerateNotFatal) {
  Matrix x(3, 1);
  x << 0.1, 0.5, 0.9;
  const Vector y = Vector::Constant(3, -2.0);
  Rng rng = make_rng(3, "test");
  const GPModel m = gp_fit(x, y, rng, 10);
  EXPECT_TRUE(m.degenerate());
  Vector mean, var;
  m.predict(x, mean, var);
  EXPECT_TRUE(mean.allFinite());
  EXPECT_EQ(m.unstandardize(mean(0)), -2.0);
}

TEST(Ei, ClosedFormValues) {
  EXPECT_NEAR(expected_improvement(0.0, 1.0, 0.0), 0.3989422804, 1e-9);
  EXPECT_EQ(expected_improvement(0.5, 0.0, 1.0), 0.0);
  EXPECT_EQ(expected_improvement(1.5, 0.0, 1.0), 0.5);
  Rng rng = make_rng(4, "test");
  for (int i = 0; i < 1000; ++i) {
    const double mu = uniform(rng, -5.0, 5.0), s = uniform(rng, 0.0, 3.0), best = uniform(rng, -5.0, 5.0);
    EXPECT_GE(expected_improvement(mu, s, best), 0.0);
    EXPECT_GE(expected_improvement(mu, s, best), mu - best - 1e-12);
  }
}

TEST(Ei, IncumbentHasZeroImprovement) {
  Matrix x(3, 1);
  x << 0.0, 0.5, 1.0;
  Vector y(3);
  y << 0.0, 2.0, 1.0;
  const GPModel m = GPModel::fit_with(x, y, {{0.2}, 1.0, 1e-10});
  Vector mean, var;
  m.predict(x.row(1), mean, var);
  EXPECT_NEAR(expected_improvement(mean(0), std::sqrt(var(0)), m.standardize(2.0)), 0.0, 1e-4);
  const Matrix cands = (Matrix(3, 1) << 0.5, 0.75, 0.25).finished();
  EXPECT_NE(ei_acquire(m, m.standardize(2.0), cands), 0u);
}

TEST(Halton, ShiftedPointsInUnitCube) {
  Rng rng = make_rng(5, "test");
  const Matrix h = shifted_halton(256, 10, rng);
  EXPECT_EQ(h.rows(), 256);
  EXPECT_GE(h.minCoeff(), 0.0);
  EXPECT_LT(h.maxCoeff(), 1.0);
  std::set<double> firsts;
  for (int i = 0; i < 256; ++i) firsts.insert(h(i, 0));
  EXPECT_EQ(firsts.size(), 256u);
}

TEST(Bo, BudgetAccounting) {
  long calls = 0;
  BoConfig cfg;
  cfg.init_count = 5;
  cfg.candidates = 64;
  cfg.hyper_candidates = 20;
  const SearchResult r = bo_loop(sphere({0.1, 0.1}, &calls), 2, 6, 0, cfg);
  EXPECT_EQ(calls, 6);
  EXPECT_EQ(r.trace.size(), 6u);
  EXPECT_ANY_THROW(bo_loop(sphere({0.1, 0.1}), 2, 5, 0, cfg));  // needs budget > init_count
}

TEST(Bo, DeterministicPerSeed) {
  BoConfig cfg;
  cfg.init_count = 5;
  cfg.candidates = 128;
  cfg.hyper_candidates = 20;
  EXPECT_EQ(bo_loop(sphere({0.3, -0.2}), 2, 15, 4, cfg).trace, bo_loop(sphere({0.3, -0.2}), 2, 15, 4, cfg).trace);
}

TEST(Bo, BeatsRandomOnSphere) {
  BoConfig cfg;
  cfg.init_count = 10;
  cfg.candidates = 1024;
  cfg.hyper_candidates = 50;
  std::vector<double> bo, rnd;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    bo.push_back(bo_loop(sphere({0.37, -0.61}), 2, 60, seed, cfg).best_d);
    rnd.push_back(random_search(sphere({0.37, -0.61}), 2, 60, seed).best_d);
  }
  std::sort(bo.begin(), bo.end());
  std::sort(rnd.begin(), rnd.end());
  EXPECT_GT(bo[2], rnd[2]);
}

}  // namespace
}  // namespace ampsize
