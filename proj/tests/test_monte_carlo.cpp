#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "detdiff/monte_carlo.hpp"

using namespace detdiff;

TEST(Random, SubstreamsAreKeyed) {
  auto a = substream(1, 0, 5);
  auto b = substream(1, 0, 5);
  auto c = substream(1, 0, 6);
  auto d = substream(1, 1, 5);
  const auto va = a();
  EXPECT_EQ(va, b());
  EXPECT_NE(va, c());
  EXPECT_NE(va, d());
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform_centred_open(a);
    EXPECT_GT(u, -0.5);
    EXPECT_LT(u, 0.5);
  }
}

TEST(Simulate, IdentityMapKeepsPositions) {
  const auto id = PiecewiseLinearLiftMap::linear(1.0);
  const auto s = simulate_ensemble(id, 100, 20, 3);
  std::vector<double> start(100);
  for (std::size_t i = 0; i < 100; ++i) {
    auto g = substream(3, 0, i);
    start[i] = uniform_centred_open(g);
  }
  EXPECT_EQ(s.final_positions, start);
  EXPECT_EQ(s.aborted, 0u);
}

TEST(Simulate, DeterministicAcrossThreadCounts) {
  const auto f = PiecewiseLinearLiftMap::linear(2.0 + std::sqrt(3.0));
  MonteCarloOptions one;
  one.threads = 1;
  MonteCarloOptions four;
  four.threads = 4;
  const auto a = simulate_ensemble(f, 5000, 30, 11, one);
  const auto b = simulate_ensemble(f, 5000, 30, 11, four);
  EXPECT_EQ(a.final_positions, b.final_positions);
  EXPECT_EQ(a.midpoint_positions, b.midpoint_positions);
}

TEST(Simulate, RejectsEmpty) {
  const auto f = PiecewiseLinearLiftMap::linear(3.0);
  EXPECT_THROW(simulate_ensemble(f, 0, 5, 1), validation_error);
  EXPECT_THROW(simulate_ensemble(f, 5, 0, 1), validation_error);
}

TEST(Simulate, AbortsRunawaySamples) {
  const PiecewiseLinearLiftMap drift({-0.5, 0.5}, {{99.5, 102.5}});  // +101 per step
  MonteCarloOptions o;
  o.abort_threshold = 1000.0;
  const auto s = simulate_ensemble(drift, 50, 20, 1, o);
  EXPECT_EQ(s.aborted, 50u);
  EXPECT_TRUE(s.final_positions.empty());
}

TEST(Stats, SlopeThree) {
  const auto stats = estimate_stats(simulate_ensemble(PiecewiseLinearLiftMap::linear(3.0), 100000, 50, 2024));
  EXPECT_NEAR(stats.d_estimate, 1.0 / 3.0, 3 * stats.d_stderr);
  EXPECT_NEAR(stats.d_increment, 1.0 / 3.0, 3 * stats.d_increment_stderr);
  EXPECT_LE(std::abs(stats.drift_estimate), 3 * std::sqrt(stats.variance / stats.N) / stats.n);
  ASSERT_TRUE(stats.ks.has_value());
  EXPECT_LT(*stats.ks, 0.02);
}

TEST(Stats, SlopeFour) {
  const auto stats = estimate_stats(simulate_ensemble(PiecewiseLinearLiftMap::linear(4.0), 100000, 50, 77));
  EXPECT_NEAR(stats.d_increment, 0.25, 3 * stats.d_increment_stderr);
}

TEST(Stats, StandardErrorFormula) {
  EnsembleSamples s;
  s.steps = 10;
  s.midpoint_step = 5;
  s.final_positions = {-1.0, 0.0, 1.0, 2.0};
  s.midpoint_positions = {0.0, 0.0, 0.0, 0.0};
  const auto st = estimate_stats(s);
  EXPECT_DOUBLE_EQ(st.mean, 0.5);
  EXPECT_DOUBLE_EQ(st.variance, 5.0 / 3.0);
  EXPECT_DOUBLE_EQ(st.d_estimate, 5.0 / 60.0);
  EXPECT_NEAR(st.d_stderr, std::sqrt(2.0 * (25.0 / 9.0) / (3.0 * 400.0)), 1e-15);
}

TEST(Stats, DegenerateAndSingle) {
  EnsembleSamples s;
  s.steps = 3;
  s.midpoint_step = 1;
  s.final_positions = {0.25, 0.25, 0.25};
  s.midpoint_positions = {0.0, 0.0, 0.0};
  const auto st = estimate_stats(s);
  EXPECT_EQ(st.variance, 0.0);
  EXPECT_FALSE(st.ks.has_value());
  EXPECT_FALSE(st.diagnostic.empty());
  s.final_positions = {1.0};
  s.midpoint_positions = {0.0};
  EXPECT_THROW(estimate_stats(s), validation_error);
}

TEST(KS, CalibrationOnNormalSamples) {
  // 1% critical value 1.63/sqrt(N); expect at least 95 of 100 trials below it.
  int below = 0;
  const std::size_t N = 2000;
  for (int trial = 0; trial < 100; ++trial) {
    std::mt19937_64 g(1000 + trial);
    std::normal_distribution<double> nd(2.0, 3.0);
    std::vector<double> x(N);
    for (auto& v : x) v = nd(g);
    EnsembleSamples s;
    s.steps = 1;
    s.final_positions = x;
    s.midpoint_positions.assign(N, 0.0);
    const auto st = estimate_stats(s);
    if (*st.ks < 1.63 / std::sqrt(static_cast<double>(N))) ++below;
  }
  EXPECT_GE(below, 95);
}

TEST(Scan, GridAndErrors) {
  const std::vector<double> grid{3.0, 3.5, 4.0, 1.5};
  const auto rows = scan_lambda(grid, 20000, 50, 5);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_NEAR(rows[0].d_mc, 1.0 / 3.0, 3 * rows[0].stderr_mc);
  EXPECT_DOUBLE_EQ(rows[1].d_omega, 0.3125);
  EXPECT_NEAR(rows[2].d_mc, 0.25, 3 * rows[2].stderr_mc);
  EXPECT_FALSE(rows[3].error.empty());
  EXPECT_TRUE(rows[0].error.empty());
  EXPECT_TRUE(scan_lambda(std::vector<double>{}, 10, 10, 1).empty());
}

TEST(Parallel, PairwiseSum) {
  std::vector<double> v(1000, 0.1);
  EXPECT_NEAR(pairwise_sum(v), 100.0, 1e-12);
  EXPECT_EQ(pairwise_sum(std::vector<double>{}), 0.0);
}
