#include <gtest/gtest.h>

#include <cmath>

#include "chaincraft/diagonal.hpp"
#include "chaincraft/rng.hpp"

using namespace chaincraft;

TEST(Diagonal, BuildLevelSmall) {
  auto a0 = diagonal_build_level(0, 1);
  ASSERT_EQ(a0.size(), 1u);
  EXPECT_EQ(a0[0], Point::unit(15, 1));
  auto a3 = diagonal_build_level(3, 1);
  EXPECT_EQ(a3.size(), 3u);  // lifted from T_{1,1}
  for (const auto& p : a3) EXPECT_NEAR(p.norm(), 1.0, 1e-12);
  auto a4 = diagonal_build_level(4, 1);
  EXPECT_EQ(BigInt(a4.size()), count_T(2, 1));
  EXPECT_LE(BigInt(a4.size()), ladder(4));
  for (const auto& p : a4) EXPECT_NEAR(p.norm(), 1.0, 1e-12);
}

TEST(Diagonal, WitnessExamples) {
  auto w = diagonal_witness(Point::unit(15, 2), 1, 1);
  EXPECT_EQ(w.point, Point::unit(15, 2));
  EXPECT_EQ(dist_d2(Point::unit(15, 2), w.point, 1), 0.0);
  EXPECT_TRUE(diagonal_membership_ok(w));
  // uniform over 2..5, quantization error per coordinate below 2^{-(h-i)}
  Point t = Point::from_entries(15, {{2, 0.5}, {3, 0.5}, {4, 0.5}, {5, 0.5}});
  for (int h = 2; h < 12; ++h) {
    auto q = diagonal_witness(t, h, 1);
    EXPECT_TRUE(diagonal_membership_ok(q));
    for (std::size_t j = 2; j <= 5; ++j) {
      const int i = block_of(j);
      const double err = t.at(j) * t.at(j) - q.point.at(j) * q.point.at(j);
      EXPECT_GE(err, 0.0);
      EXPECT_LT(err, std::ldexp(1.0, -(h - i)) + 1e-16);
    }
    for (std::size_t j = 6; j <= 15; ++j) EXPECT_EQ(q.point.at(j), 0.0);
  }
}

TEST(Diagonal, SeriesHandValue) {
  auto r = diagonal_series(Point::unit(15, 2), 1);
  EXPECT_EQ(r.series, 7.0);
  EXPECT_TRUE(r.pass);
  auto r2 = diagonal_series(Point::unit(255, 2), 2);
  EXPECT_EQ(r2.series, 7.0);
}

TEST(Diagonal, SeriesLastCoordinateRegression) {
  // levels 0..2 pay 1/2 each against e_1; level 3 still misses S_2 (1/2 * 8); exact from level 4 on
  auto r = diagonal_series(Point::unit(15, 15), 1);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.series, 7.5);
}

TEST(Diagonal, SetDistanceBelowWitness) {
  CounterRng rng(77);
  for (int k = 0; k < 50; ++k) {
    Point t = random_unit_tail(15, rng);
    for (int h = 0; h <= 4; ++h) {
      auto set = diagonal_build_level(h, 1);
      auto d2 = [](const Point& a, const Point& b) { return dist_d2(a, b, 1); };
      const double best = dist_to_set(d2, t, set).value;
      EXPECT_LE(best, dist_d2(t, diagonal_level_witness(t, h, 1).point, 1) + 1e-15);
    }
  }
}

TEST(Diagonal, RandomSeriesBelowBound) {
  CounterRng rng(1234);
  for (int d0 : {1, 2}) {
    double worst = 0.0;
    for (int k = 0; k < 200; ++k) {
      auto r = diagonal_series(random_unit_tail(dim_for(d0), rng), d0);
      EXPECT_TRUE(r.pass);
      worst = std::max(worst, r.series);
    }
    EXPECT_LE(worst, kDiagonalSeriesBound);
  }
}

TEST(Diagonal, ScalarInequalities) {
  EXPECT_EQ(floor_series(0.0, 60), 0.0);
  EXPECT_EQ(floor_series(0.5, 60), 0.25);
  CounterRng rng(6);
  for (int k = 0; k < 1000; ++k) {
    const double x = rng.uniform();
    EXPECT_LE(floor_series(x, 60), 4 * x);
    EXPECT_LE(sqrt_floor_series(x, 60), 4.0);
    EXPECT_LE(floor_series_over_x(x, 60), 4.0);
    EXPECT_LT(exp_series(x, 60), 2.0 + 20.0 / 7.0);
  }
}

TEST(Diagonal, TamperHookChangesSeries) {
  auto r = diagonal_series(Point::unit(15, 2), 1, 48, [](int h, Point& p) {
    if (h == 5) p = Point::unit(15, 1);
  });
  EXPECT_EQ(r.series, 7.0 + 32.0);
}
