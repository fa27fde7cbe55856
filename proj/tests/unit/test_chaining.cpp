#include <gtest/gtest.h>

#include <cmath>

#include "chaincraft/chaining.hpp"
#include "chaincraft/rearrange.hpp"
#include "chaincraft/zoo.hpp"

using namespace chaincraft;

namespace {

Pattern constant4(double v) { return Pattern::dense(4, std::vector<double>(16, v)); }

Pattern diag4(double v) {
  std::vector<double> d(16, 0.0);
  for (int i = 0; i < 4; ++i) d[i * 5] = v;
  return Pattern::dense(4, d);
}

Point uniform_on(std::size_t n) {
  std::vector<double> c(n, 1.0 / std::sqrt(static_cast<double>(n)));
  return Point::from_dense(c);
}

// Symmetric band |a-b| <= bw with entries in (0, K/2^w], column sums <= K.
Pattern banded_block(std::size_t n, std::size_t bw, int w, double K, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<double> v(n * n, 0.0);
  const double cap = std::min(std::ldexp(K, -w), K / static_cast<double>(2 * bw + 1));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a; b <= std::min(n - 1, a + bw); ++b) v[a * n + b] = v[b * n + a] = cap * (0.2 + 0.8 * rng.uniform());
  return Pattern::dense(n, v);
}

}  // namespace

// ---- off-diagonal ----

TEST(Offdiag, ZeroFarPartGivesZero) {
  auto pp = prepare_pattern(Pattern::diagonal_rule("inverse-sqrt-log2", 15));
  auto dec = decompose(pp.pattern);
  CounterRng rng(3);
  Point t = random_unit_tail(15, rng);
  for (int h = 0; h <= 10; ++h) EXPECT_EQ(dist_tilde2_sq(dec.far, t, witness_offdiag(dec.far, pp.constant.C, t, h).point), 0.0);
  auto rep = series_offdiag(dec.far, pp.constant.C, t);
  EXPECT_EQ(rep.series, 0.0);
  EXPECT_TRUE(rep.pass);
}

TEST(Offdiag, UnitVectorThreshold) {
  std::vector<double> v(15 * 15, 0.0);
  v[1 * 15 + 1] = 0.25;  // b^2_22
  Pattern p = Pattern::dense(15, v);
  Point t = Point::unit(15, 2);
  for (int h = 1; h <= 8; ++h) {
    auto w = witness_offdiag(p, 1.0, t, h);
    // row 2 mass is b^2_22 * 1, against C^2 / 2^h
    const bool in = h >= 2;
    EXPECT_EQ(std::binary_search(w.cert.I.begin(), w.cert.I.end(), 2u), in) << h;
    EXPECT_EQ(w.point.at(2), in ? 1.0 : 0.0) << h;
    EXPECT_TRUE(verify_membership(w.point, w.cert).ok);
  }
  Point neg = Point::from_entries(15, {{2, -1.0}});
  EXPECT_EQ(witness_offdiag(p, 1.0, neg, 3).point.at(2), -1.0);
}

TEST(Offdiag, IndexSetSizeAtFullLadder) {
  auto pp = prepare_pattern(block_constant_pattern(21));
  ASSERT_TRUE(pp.assumption.pass) << pp.assumption.violation;
  auto dec = decompose(pp.pattern);
  const double C = pp.constant.C;
  auto pts = point_battery(pp.pattern.dim(), 2, CounterRng(8), 32);
  bool any_far = false;
  for (const auto& t : pts) {
    for (int h = 1; h <= 8; ++h) {
      auto I = offdiag_index_set(dec.far, C, t, h);
      EXPECT_LE(I.size(), std::size_t{1} << h);
    }
    auto rep = series_offdiag(dec.far, C, t);
    any_far = any_far || rep.series > 0.0;
    EXPECT_TRUE(rep.pass) << rep.series << " vs " << rep.bound;
    EXPECT_TRUE(rep.membership_ok) << rep.failure;
  }
  EXPECT_TRUE(any_far);
}

TEST(Offdiag, TamperedEntryFails) {
  std::vector<double> v(15 * 15, 0.0);
  v[1 * 15 + 1] = 0.25;
  Pattern p = Pattern::dense(15, v);
  auto w = witness_offdiag(p, 1.0, Point::unit(15, 2), 4);
  w.point.nz[0].second = 0.7;
  auto chk = verify_membership(w.point, w.cert);
  EXPECT_FALSE(chk.ok);
  EXPECT_NE(chk.failure.find("entry form"), std::string::npos);
}

// ---- block sampler ----

TEST(Sampler, UnitVectorConcentrates) {
  Pattern m = diag4(0.5);
  BlockSampler s(BlockMatrix{&m, 1, 4}, 1, 1.0, Point::from_entries(4, {{3, -1.0}}));
  EXPECT_EQ(s.band(0, 0), 0);
  EXPECT_DOUBLE_EQ(s.sigma(0), 1.0);
  EXPECT_DOUBLE_EQ(s.sigma_total(), 1.0);
  for (int r = 1; r < s.num_bands(); ++r) EXPECT_TRUE(s.band_empty(r));
  auto d = s.distribution(0);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_DOUBLE_EQ(d[0], 1.0);
  CounterRng rng(1);
  auto bw = sample_block_witness(s, 2, rng);
  ASSERT_EQ(bw.cert.V[0].size(), 1u);
  EXPECT_EQ(bw.cert.V[0][0], 3u);
  EXPECT_EQ(bw.point.at(3), -1.0);
  EXPECT_EQ(bw.distance_sq, 0.0);
  EXPECT_TRUE(verify_membership(bw.point, bw.cert).ok);
}

TEST(Sampler, ZeroMatrixHasNoBands) {
  Pattern m = Pattern::dense(4, std::vector<double>(16, 0.0));
  CounterRng rng(2);
  BlockSampler s(BlockMatrix{&m, 1, 4}, 1, 1.0, uniform_on(4));
  EXPECT_EQ(s.sigma_total(), 0.0);
  for (int r = 0; r < std::max(1, s.num_bands()); ++r) EXPECT_TRUE(s.band_empty(r));
  auto bw = sample_block_witness(s, 3, rng);
  EXPECT_TRUE(bw.point.nz.empty());
  EXPECT_EQ(bw.distance_sq, 0.0);
  EXPECT_EQ(expected_block_bound(s, 3), 0.0);
}

TEST(Sampler, UniformPointConstantMatrix) {
  Pattern m = constant4(0.25);
  BlockSampler s(BlockMatrix{&m, 1, 4}, 1, 1.0, uniform_on(4));
  EXPECT_EQ(s.band(0, 1), 1);
  auto d = s.distribution(1);
  ASSERT_EQ(d.size(), 4u);
  for (double p : d) EXPECT_NEAR(p, 0.25, 1e-15);
  // sum over i <= j of t_i^2 t_j^2: 4 loops + 6 edges of weight 1/16
  EXPECT_NEAR(s.sigma_total(), 10.0 / 16.0, 1e-15);
  EXPECT_LE(s.sigma_total(), 1.0);
  EXPECT_LT(s.prob_sum_deviation(), 1e-12);
}

TEST(Sampler, RejectsCapViolations) {
  Pattern m = constant4(0.5);
  EXPECT_THROW(BlockSampler(BlockMatrix{&m, 1, 4}, 1, 1.0, uniform_on(4)), BandError);
  Pattern big = Pattern::dense(5, std::vector<double>(25, 0.01));
  EXPECT_THROW(BlockSampler(BlockMatrix{&big, 1, 5}, 1, 1.0, uniform_on(5)), BandError);
}

TEST(Sampler, BudgetsHoldOverManyDraws) {
  const double K = 1.0;
  Pattern m = banded_block(16, 2, 2, K, 5);
  CounterRng rng(77);
  for (int k = 0; k < 1000; ++k) {
    CounterRng r = rng.split(k);
    Point t = random_unit_tail(17, r);
    std::vector<Point::Entry> e;
    for (const auto& [j, v] : t.nz) e.emplace_back(j - 1, v);
    Point local = Point::from_entries(16, e);
    BlockSampler s(BlockMatrix{&m, 1, 16}, 2, K, local);
    auto bw = sample_block_witness(s, 3 + k % 4, r);
    auto chk = verify_membership(bw.point, bw.cert);
    ASSERT_TRUE(chk.ok) << k << ": " << chk.failure;
    EXPECT_TRUE(dominated_loose(bw.point, local, 1));
  }
}

TEST(Sampler, TamperedBudgetFails) {
  Pattern m = diag4(0.5);
  BlockSampler s(BlockMatrix{&m, 1, 4}, 1, 1.0, Point::unit(4, 3));
  CounterRng rng(4);
  auto bw = sample_block_witness(s, 2, rng);
  bw.cert.V[0] = {1, 2, 3, 4};  // budget 2^1 * (1 + 1/2) = 3
  auto chk = verify_membership(bw.point, bw.cert);
  EXPECT_FALSE(chk.ok);
  EXPECT_NE(chk.failure.find("budget"), std::string::npos) << chk.failure;
}

TEST(Sampler, TamperedEntryFails) {
  Pattern m = diag4(0.5);
  BlockSampler s(BlockMatrix{&m, 1, 4}, 1, 1.0, Point::unit(4, 3));
  CounterRng rng(4);
  auto bw = sample_block_witness(s, 2, rng);
  bw.point.nz[0].second = 0.7;
  auto chk = verify_membership(bw.point, bw.cert);
  EXPECT_FALSE(chk.ok);
  EXPECT_NE(chk.failure.find("entry form"), std::string::npos) << chk.failure;
}

// ---- expectation bound ----

TEST(BlockBound, UnitVectorZeroMatrix) {
  Pattern m = Pattern::dense(4, std::vector<double>(16, 0.0));
  BlockSampler s(BlockMatrix{&m, 1, 4}, 1, 1.0, Point::unit(4, 2));
  EXPECT_EQ(expected_block_bound(s, 2), 0.0);
}

// Constant M = K/2 on n = 4 has column sums 2K; the sampler runs against the doubled cap 2K.
TEST(BlockBound, MonteCarloBelowClosedForm) {
  const double K = 1.0;
  Pattern m = constant4(K / 2.0);
  BlockSampler s(BlockMatrix{&m, 1, 4}, 1, 2.0 * K, uniform_on(4));
  const double rhs = expected_block_bound(s, 2);
  CounterRng rng(2024);
  const int N = 10000;
  double sum = 0.0, sum2 = 0.0;
  for (int k = 0; k < N; ++k) {
    CounterRng r = rng.split(k);
    const double x = sample_block_witness(s, 2, r).distance_sq;
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / N;
  const double se = std::sqrt(std::max(0.0, sum2 / N - mean * mean) / N);
  EXPECT_LE(mean, rhs + 3.0 * se) << "mean " << mean << " rhs " << rhs;
}

TEST(BlockBound, NonincreasingInLevel) {
  const double K = 1.0;
  Pattern m = banded_block(16, 3, 2, K, 9);
  CounterRng rng(10);
  for (int k = 0; k < 20; ++k) {
    Point t = random_unit_tail(17, rng);
    std::vector<Point::Entry> e;
    for (const auto& [j, v] : t.nz) e.emplace_back(j - 1, v);
    BlockSampler s(BlockMatrix{&m, 1, 16}, 2, K, Point::from_entries(16, e));
    for (int h = 3; h < 30; ++h) EXPECT_LE(expected_block_bound(s, h + 1), expected_block_bound(s, h) * (1 + 1e-12)) << h;
  }
}

// ---- block series ----

TEST(BlockSeries, ZeroMatrix) {
  Pattern m = Pattern::dense(4, std::vector<double>(16, 0.0));
  auto rep = series_block(BlockMatrix{&m, 1, 4}, 1, 1.0, uniform_on(4), 16, 1);
  EXPECT_EQ(rep.series, 0.0);
  EXPECT_TRUE(rep.pass);
}

TEST(BlockSeries, SmallConstantBlock) {
  const double K = 1.0;
  Pattern m = constant4(K / 2.0);
  auto s2 = block_caps(BlockMatrix{&m, 1, 4});
  EXPECT_DOUBLE_EQ(s2.max_column_sum, 2.0);
  // the caller passes the cap the block satisfies; bands use twice that
  CounterRng rng(31);
  for (int k = 0; k < 100; ++k) {
    CounterRng r = rng.split(k);
    Point t = random_unit_tail(5, r);
    std::vector<Point::Entry> e;
    for (const auto& [j, v] : t.nz) e.emplace_back(j - 1, v);
    auto rep = series_block(BlockMatrix{&m, 1, 4}, 1, 2.0 * K, Point::from_entries(4, e), 16, 100 + k);
    EXPECT_TRUE(rep.pass) << k << ": " << rep.series << " vs " << rep.bound;
    EXPECT_TRUE(rep.levels.front().distance_sq >= 0.0);
  }
}

TEST(BlockSeries, BandedBlockUnitVector) {
  const double K = 1.0;
  Pattern m = banded_block(256, 4, 3, K, 41);
  for (std::size_t j : {1u, 100u, 256u}) {
    auto rep = series_block(BlockMatrix{&m, 1, 256}, 3, K, Point::unit(256, j), 16, j);
    EXPECT_TRUE(rep.pass) << j << ": " << rep.series << " vs " << rep.bound;
    EXPECT_TRUE(rep.membership_ok) << rep.failure;
  }
}

TEST(BlockSeries, ReplayIsBitExact) {
  Pattern m = banded_block(16, 2, 2, 1.0, 6);
  CounterRng rng(12);
  Point t = random_unit_tail(17, rng);
  std::vector<Point::Entry> e;
  for (const auto& [j, v] : t.nz) e.emplace_back(j - 1, v);
  Point local = Point::from_entries(16, e);
  auto a = series_block(BlockMatrix{&m, 1, 16}, 2, 1.0, local, 16, 99);
  auto b = series_block(BlockMatrix{&m, 1, 16}, 2, 1.0, local, 16, 99);
  EXPECT_EQ(a.series, b.series);
  EXPECT_EQ(a.draws, b.draws);
}

// ---- patching ----

TEST(Patch, SlotsTileEveryPart) {
  for (int L = 2; L <= 4; ++L) {
    const std::size_t d = (L == 4) ? 65535 : dim_for(L - 1);
    for (const auto& part_spec : symmetric_part_specs(L)) {
      auto slots = patch_slots(part_spec, L, d);
      std::size_t next = 2;
      for (const auto& s : slots) {
        if (s.blocks.empty()) continue;
        EXPECT_EQ(s.lo, next) << part_spec.name;
        next = s.lo + s.n;
      }
      EXPECT_EQ(next, d + 1) << part_spec.name;
    }
  }
}

TEST(Patch, EqualMassesHalveAtLevelFour) {
  auto pp = prepare_pattern(Pattern::diagonal_rule("inverse-sqrt-log2", 15));
  auto dec = decompose(pp.pattern);
  const std::size_t r = 0;
  ASSERT_EQ(dec.specs[r].name, "near0");
  const double a = std::sqrt(0.5);
  Point t = Point::from_entries(15, {{2, a}, {4, a}});
  PatchedChain pc(dec.sym[r], dec.specs[r], pp.constant.C, t, 16, CounterRng(1));
  EXPECT_DOUBLE_EQ(pc.mass(1), 0.5);
  EXPECT_DOUBLE_EQ(pc.mass(2), 0.5);
  auto pw = pc.at(4);
  ASSERT_EQ(pw.cert.slots.size(), 2u);
  for (const auto& s : pw.cert.slots) {
    EXPECT_EQ(s.y, 0.5);
    EXPECT_EQ(s.level, 3);
  }
  EXPECT_TRUE(verify_membership(pw.point, pw.cert).ok);
  EXPECT_TRUE(dominated_loose(pw.point, t));
}

TEST(Patch, SingleSlotUsesFullLevel) {
  auto pp = prepare_pattern(Pattern::diagonal_rule("inverse-sqrt-log2", 15));
  auto dec = decompose(pp.pattern);
  ASSERT_EQ(dec.specs[1].name, "near1");
  CounterRng rng(5);
  Point t = random_unit_tail(15, rng);
  PatchedChain pc(dec.sym[1], dec.specs[1], pp.constant.C, t, 16, CounterRng(2));
  for (int h = 1; h <= 8; ++h) {
    auto pw = pc.at(h);
    ASSERT_FALSE(pw.cert.slots.empty());
    EXPECT_EQ(pw.cert.slots[0].y, 1.0);
    EXPECT_EQ(pw.cert.slots[0].level, h);
    for (std::size_t k = 1; k < pw.cert.slots.size(); ++k) EXPECT_FALSE(pw.cert.slots[k].present);
  }
}

TEST(Patch, OtherSlotsStayZero) {
  auto pp = prepare_pattern(Pattern::diagonal_rule("inverse-sqrt-log2", 15));
  auto dec = decompose(pp.pattern);
  Point t = Point::from_entries(15, {{5, 0.6}, {9, -0.8}});
  PatchedChain pc(dec.sym[0], dec.specs[0], pp.constant.C, t, 16, CounterRng(3));
  EXPECT_EQ(pc.mass(1), 0.0);
  for (int h = 1; h <= 10; ++h) {
    auto pw = pc.at(h);
    for (const auto& [j, v] : pw.point.nz) EXPECT_GE(j, 4u);
    EXPECT_TRUE(verify_membership(pw.point, pw.cert).ok);
  }
}

// ---- glue ----

TEST(Glue, SingleComponentIsCompleted) {
  Point x = Point::from_entries(15, {{3, 0.6}});
  auto g = glue(std::vector<Point>{x}, 15);
  EXPECT_EQ(g.point.at(3), 0.6);
  EXPECT_DOUBLE_EQ(g.point.at(1), 0.8);
  EXPECT_NEAR(g.point.norm(), 1.0, 1e-12);
}

TEST(Glue, MixedSignsGiveZero) {
  Point a = Point::from_entries(15, {{3, 0.5}, {4, 0.1}});
  Point b = Point::from_entries(15, {{3, -0.2}, {4, 0.3}});
  auto g = glue(std::vector<Point>{a, b}, 15);
  EXPECT_TRUE(g.mixed_sign);
  EXPECT_EQ(g.point.at(3), 0.0);
  EXPECT_EQ(g.point.at(4), 0.3);
}

TEST(Glue, AllZeroGivesFirstUnitVector) {
  auto g = glue(std::vector<Point>{Point(15), Point(15)}, 15);
  EXPECT_EQ(g.point, Point::unit(15, 1));
  EXPECT_FALSE(g.overflow);
}

TEST(Glue, OverflowFallsBackToFirstUnitVector) {
  Point a = Point::from_entries(15, {{3, 0.8}});
  Point b = Point::from_entries(15, {{4, 0.8}});
  auto g = glue(std::vector<Point>{a, b}, 15);
  EXPECT_TRUE(g.overflow);
  EXPECT_EQ(g.point, Point::unit(15, 1));
}

// ---- full construction ----

TEST(Full, LowLevelsAreFirstUnitVector) {
  auto pp = prepare_pattern(Pattern::diagonal_rule("inverse-sqrt-log2", 15));
  CounterRng rng(6);
  Point t = random_unit_tail(15, rng);
  for (int h = 0; h <= 3; ++h) {
    auto fw = witness_full(pp.pattern, pp.constant.C, t, h);
    EXPECT_EQ(fw.point, Point::unit(15, 1));
    EXPECT_TRUE(verify_membership(fw.point, MembershipCertificate{fw.cert}).ok);
  }
}

TEST(Full, ZeroPatternSeriesIsZero) {
  auto pp = prepare_pattern(Pattern::zero(15));
  CounterRng rng(7);
  auto rep = series_full(pp.pattern, pp.constant.C, random_unit_tail(15, rng));
  EXPECT_EQ(rep.total.series, 0.0);
  EXPECT_TRUE(rep.pass);
}

TEST(Full, DiagonalPatternWitnessesRoundTrip) {
  auto pp = prepare_pattern(Pattern::diagonal_rule("inverse-sqrt-log2", 15));
  auto dec = decompose(pp.pattern);
  EXPECT_TRUE(dec.far.to_dense() == std::vector<double>(15 * 15, 0.0));
  CounterRng rng(8);
  for (int k = 0; k < 5; ++k) {
    Point t = random_unit_tail(15, rng);
    FullChain fc(pp.pattern, pp.constant.C, t);
    for (int h = 0; h <= 20; ++h) {
      auto fw = fc.at(h);
      EXPECT_TRUE(dominated_loose(fw.point, t)) << h;
      auto chk = verify_membership(fw.point, fw.cert);
      EXPECT_TRUE(chk.ok) << h << ": " << chk.failure;
      EXPECT_NEAR(fw.point.norm(), 1.0, 1e-12);
    }
  }
}

TEST(Full, SeriesChecksOnSmallPatterns) {
  for (const auto& z : pattern_zoo(false)) {
    if (z.pattern.dim() > 60) continue;
    auto pp = prepare_pattern(z.pattern);
    ASSERT_TRUE(pp.assumption.pass) << z.name;
    auto plan = make_full_plan(pp.pattern, pp.constant.C);
    for (const auto& t : point_battery(pp.pattern.dim(), 3, CounterRng(9))) {
      auto rep = series_full(plan, t);
      EXPECT_TRUE(rep.metric_chain_ok) << z.name;
      EXPECT_TRUE(rep.additivity_ok) << z.name << " " << rep.max_additivity_error;
      EXPECT_TRUE(rep.total.membership_ok) << z.name << ": " << rep.total.failure;
      EXPECT_TRUE(rep.total.dominance_ok) << z.name;
      EXPECT_LE(rep.total.series, rep.total.bound * (1 + 1e-12)) << z.name;
    }
  }
}

TEST(Full, RejectsPatternOutsideAssumption) {
  Pattern p = Pattern::diagonal_rule("identity", 15);  // row 1 nonzero
  CounterRng rng(10);
  EXPECT_THROW(witness_full(p, 1.0, random_unit_tail(15, rng), 5), AssumptionError);
}

TEST(Full, TamperedWitnessFailsMembership) {
  auto pp = prepare_pattern(Pattern::diagonal_rule("inverse-sqrt-log2", 15));
  CounterRng rng(11);
  FullOptions opt;
  opt.tamper = [](int h, Point& x) {
    if (h >= 6 && x.nz.size() > 1) x.nz.back().second *= 0.5;
  };
  auto rep = series_full(pp.pattern, pp.constant.C, random_unit_tail(15, rng), opt);
  EXPECT_FALSE(rep.total.membership_ok);
  EXPECT_FALSE(rep.pass);
}
