#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "detdiff/lift_map.hpp"

using namespace detdiff;

TEST(NearestInteger, HalfIntegersRoundUp) {
  EXPECT_EQ(nearest_integer(0.5), 1);
  EXPECT_EQ(nearest_integer(-0.5), 0);
  EXPECT_EQ(nearest_integer(1.5), 2);
  EXPECT_EQ(nearest_integer(-1.5), -1);
  EXPECT_EQ(nearest_integer(0.49999999999999994), 0);  // floor(x + 0.5) would give 1
  EXPECT_EQ(nearest_integer(-2.3), -2);
  EXPECT_THROW(nearest_integer(std::nan("")), validation_error);
  EXPECT_THROW(nearest_integer(1e300), numerical_error);
}

TEST(LiftMap, LinearEvaluation) {
  const auto f = PiecewiseLinearLiftMap::linear(3.0);
  EXPECT_DOUBLE_EQ(f(1.2), 1.6);  // 1 + 3 * 0.2
  EXPECT_DOUBLE_EQ(f(0.1), 0.30000000000000004);
  EXPECT_DOUBLE_EQ(f(-0.5), -1.5);
  EXPECT_DOUBLE_EQ(shift_function(f, 0.25), 0.5);
}

TEST(LiftMap, LiftProperty) {
  const auto f = PiecewiseLinearLiftMap::zigzag(1, 0.3);
  std::mt19937_64 g(1);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int i = 0; i < 200; ++i) {
    const double x = u(g);
    for (int k : {-7, -1, 1, 12}) {
      EXPECT_NEAR(f(x + k), f(x) + k, 1e-12);
      EXPECT_NEAR(f.shift(x + k), f.shift(x), 1e-12);
    }
  }
}

TEST(LiftMap, ZigzagShape) {
  const auto f = PiecewiseLinearLiftMap::zigzag(1, 0.25);
  EXPECT_EQ(f.piece_count(), 3u);
  EXPECT_NEAR(f.on_main_interval(0.0), 0.0, 1e-15);
  EXPECT_NEAR(f.on_main_interval(0.25), 1.5, 1e-15);
  EXPECT_NEAR(f.on_main_interval(-0.25), -1.5, 1e-15);
  EXPECT_NEAR(f.pieces()[2].value_right, 0.5, 1e-15);
  EXPECT_DOUBLE_EQ(f.min_abs_slope(), 4.0);
}

TEST(LiftMap, RejectsMalformed) {
  EXPECT_THROW(PiecewiseLinearLiftMap({-0.5, 0.5}, {{0.2, 0.2}}), validation_error);  // zero slope
  EXPECT_THROW(PiecewiseLinearLiftMap({-0.4, 0.5}, {{0.0, 1.0}}), validation_error);
  EXPECT_THROW(PiecewiseLinearLiftMap({-0.5, 0.1, 0.0, 0.5}, {{0, 1}, {1, 2}, {2, 3}}), validation_error);
  EXPECT_THROW(PiecewiseLinearLiftMap({-0.5, 0.5}, {}), validation_error);
  EXPECT_THROW(PiecewiseLinearLiftMap::linear(0.0), validation_error);
  EXPECT_THROW(PiecewiseLinearLiftMap::zigzag(1, 0.5), validation_error);
}

TEST(LiftMap, IdentityIsNotStretching) {
  const auto id = PiecewiseLinearLiftMap::linear(1.0);
  EXPECT_DOUBLE_EQ(validate_stretching(id), 1.0);
  EXPECT_THROW(reconstruct_initial(id, Route{0, 0}), validation_error);
}

TEST(Route, LinearThree) {
  const auto f = PiecewiseLinearLiftMap::linear(3.0);
  // 0.1 -> 0.3 -> 0.9 -> 1 + 3 * (-0.1) = 0.7 -> 1 + 3 * (-0.3) = 0.1
  const auto r = compute_route(f, 0.1, 5);
  EXPECT_EQ(r, (Route{0, 0, 1, 1, 0}));
  EXPECT_THROW(compute_route(f, 0.1, 0), validation_error);
}

TEST(Route, RoundTripContainsStart) {
  std::mt19937_64 g(7);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::uniform_real_distribution<double> slope(2.0, 7.0);
  for (int trial = 0; trial < 300; ++trial) {
    const double lambda = slope(g);
    const auto f = PiecewiseLinearLiftMap::linear(lambda);
    const double x0 = u(g) + static_cast<double>(trial % 5 - 2);
    const auto route = compute_route(f, x0, 10);
    const auto iv = reconstruct_initial(f, route);
    EXPECT_TRUE(iv.contains(x0)) << "x0=" << x0 << " lambda=" << lambda;
    // the bound is attained for linear maps; allow rounding of the endpoints
    EXPECT_LE(iv.width(), std::pow(lambda, -9.0) + 8 * std::numeric_limits<double>::epsilon() * (1 + std::abs(x0)));
  }
}

TEST(Route, InadmissibleRoute) {
  // Slope 2 moves at most one cell per step.
  const auto f = PiecewiseLinearLiftMap::linear(2.0);
  EXPECT_THROW(reconstruct_initial(f, Route{0, 5}), validation_error);
}

TEST(Route, AmbiguousForFoldingMap) {
  // The zigzag folds: x_1 near 1 has a preimage on the middle and on the
  // right piece, [11/72, 13/72] and [17/48, 19/48].
  const auto f = PiecewiseLinearLiftMap::zigzag(1, 0.25);
  EXPECT_EQ(route_preimages(f, Route{0, 1}).size(), 1u);
  const auto parts = route_preimages(f, Route{0, 1, 1});
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_NEAR(parts[0].lo, 11.0 / 72.0, 1e-12);
  EXPECT_NEAR(parts[1].hi, 19.0 / 48.0, 1e-12);
  EXPECT_THROW(reconstruct_initial(f, Route{0, 1, 1}), validation_error);
}

TEST(LiftPoint, AdvanceKeepsOffsetPrecision) {
  const auto f = PiecewiseLinearLiftMap::linear(3.0);
  LiftPoint p{1000000000000LL, 0.1};
  p = f.advance(p);
  EXPECT_EQ(p.cell, 1000000000000LL);
  EXPECT_DOUBLE_EQ(p.offset, 0.30000000000000004);
}
