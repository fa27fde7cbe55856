#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "chaincraft/io.hpp"
#include "chaincraft/suites.hpp"
#include "chaincraft/zoo.hpp"

using namespace chaincraft;

namespace {

void expect_same_entries(const Pattern& a, const Pattern& b) {
  ASSERT_EQ(a.dim(), b.dim());
  for (std::size_t i = 1; i <= a.dim(); ++i)
    for (std::size_t j = 1; j <= a.dim(); ++j) ASSERT_EQ(a(i, j), b(i, j)) << i << "," << j;
}

Pattern from_triplets(const Json& part, std::size_t dim) {
  std::vector<double> v(dim * dim, 0.0);
  for (const auto& t : part.at("triplets")) {
    const auto i = t[0].get<std::size_t>(), j = t[1].get<std::size_t>();
    v[(i - 1) * dim + (j - 1)] = v[(j - 1) * dim + (i - 1)] = t[2].get<double>();
  }
  return Pattern::dense(dim, v);
}

}  // namespace

TEST(PatternJson, DenseRowsAndFlat) {
  Json rows = {{"kind", "dense"}, {"dim", 2}, {"data", {{0.0, 0.5}, {0.5, 1.0}}}};
  Json flat = {{"kind", "dense"}, {"dim", 2}, {"data", {0.0, 0.5, 0.5, 1.0}}};
  expect_same_entries(pattern_from_json(rows), pattern_from_json(flat));
  EXPECT_EQ(pattern_from_json(rows)(1, 2), 0.5);
}

TEST(PatternJson, DiagonalRuleAndTable) {
  Json rule = {{"kind", "diagonal-rule"}, {"dim", 15}, {"data", "inverse-sqrt-log2"}};
  expect_same_entries(pattern_from_json(rule), Pattern::diagonal_rule("inverse-sqrt-log2", 15));
  Json table = {{"kind", "diagonal-rule"}, {"dim", 3}, {"data", {0.0, 1.0, 0.25}}};
  EXPECT_EQ(pattern_from_json(table)(3, 3), 0.25);
}

TEST(PatternJson, Rejections) {
  EXPECT_THROW(pattern_from_json(Json::array()), PatternError);
  EXPECT_THROW(pattern_from_json({{"kind", "dense"}, {"dim", 2}}), PatternError);
  EXPECT_THROW(pattern_from_json({{"kind", "sparse"}, {"dim", 2}, {"data", Json::array()}}), PatternError);
  EXPECT_THROW(pattern_from_json({{"kind", "dense"}, {"dim", 2}, {"data", {{0.0, 1.0}}}}), PatternError);
  EXPECT_THROW(pattern_from_json({{"kind", "diagonal-rule"}, {"dim", 3}, {"data", "cubic"}}), PatternError);
  Json bad_dim = {{"kind", "block-constant"}, {"dim", 14}, {"data", {{"beta", {{0.1, 0.0}, {0.0, 0.1}}}}}};
  EXPECT_THROW(pattern_from_json(bad_dim), PatternError);
}

TEST(PatternJson, BlockConstantRoundTrip) {
  const Pattern p = block_constant_pattern(3);
  const Json part = pattern_part_json(p);
  Json doc = {{"kind", "block-constant"}, {"dim", p.dim()}, {"data", {{"beta", part.at("beta")}, {"overrides", part.at("overrides")}}}};
  const Pattern q = pattern_from_json(doc);
  ASSERT_EQ(q.dim(), p.dim());
  CounterRng rng(5);
  for (int k = 0; k < 20000; ++k) {
    const std::size_t i = 1 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(p.dim()));
    const std::size_t j = 1 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(p.dim()));
    ASSERT_EQ(p(i, j), q(i, j));
  }
  for (const auto& t : part.at("overrides")) {
    const auto i = t[0].get<std::size_t>(), j = t[1].get<std::size_t>();
    EXPECT_EQ(q(i, j), p(i, j));
    EXPECT_EQ(q(j, i), p(i, j));
  }
}

TEST(PatternJson, TripletExportRoundTrip) {
  const Pattern p = random_dense_pattern(15, 3);
  expect_same_entries(from_triplets(pattern_part_json(p), 15), p);
}

TEST(PatternJson, LoadFromFile) {
  const std::string path = ::testing::TempDir() + "chaincraft_pattern.json";
  {
    std::ofstream out(path);
    out << R"({"kind": "diagonal-rule", "dim": 15, "data": "identity"})";
  }
  const Pattern p = load_pattern(path);
  EXPECT_EQ(p.id(), path);
  EXPECT_EQ(p(7, 7), 1.0);
  std::remove(path.c_str());
  EXPECT_THROW(load_pattern(path), PatternError);
}

TEST(DecompositionJson, PartsSumToPattern) {
  const PreparedPattern pp = prepare_pattern(random_dense_pattern(15, 7));
  const Json d = decomposition_json(decompose(pp.pattern));
  ASSERT_EQ(d.at("parts").size(), 7u);
  EXPECT_EQ(d.at("parts")[0].at("name"), "far");
  std::vector<double> sum(15 * 15, 0.0);
  for (const auto& part : d.at("parts"))
    for (const auto& t : part.at("triplets")) {
      const auto i = t[0].get<std::size_t>(), j = t[1].get<std::size_t>();
      sum[(i - 1) * 15 + (j - 1)] += t[2].get<double>();
      if (i != j) sum[(j - 1) * 15 + (i - 1)] += t[2].get<double>();
    }
  expect_same_entries(Pattern::dense(15, sum), pp.pattern);
}

TEST(Report, SchemaAndExitCodes) {
  Report r;
  r.command = "x";
  r.checks.push_back(make_check("a", "a <= 1", 0.5, 1.0));
  Json j = report_json(r);
  EXPECT_EQ(j.at("schema"), "chaincraft/1");
  EXPECT_EQ(j.at("exit_code"), 0);
  EXPECT_DOUBLE_EQ(j.at("checks")[0].at("margin").get<double>(), 0.5);
  r.checks.push_back(make_check("b", "b <= 1", 2.0, 1.0));
  EXPECT_EQ(r.exit_code(), 2);
  EXPECT_EQ(r.first_failure()->name, "b");
  r.precondition = "no";
  EXPECT_EQ(r.exit_code(), 3);
  EXPECT_FALSE(report_json(r).at("pass").get<bool>());
}

TEST(Report, NonFiniteNumbersAreStrings) {
  EXPECT_EQ(number_json(INFINITY), "inf");
  EXPECT_EQ(number_json(NAN), "nan");
  EXPECT_EQ(number_json(1.5), 1.5);
}

TEST(Report, CsvEscapes) {
  EXPECT_EQ(csv_escape("plain"), "plain");
  EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_escape("say \"x\""), "\"say \"\"x\"\"\"");
  Report r;
  r.command = "c";
  r.checks.push_back(make_check("n", "x <= 2, always", 1.0, 2.0));
  std::ostringstream os;
  write_report_csv(os, r);
  EXPECT_NE(os.str().find("\"x <= 2, always\""), std::string::npos);
}

TEST(Suites, DiagonalDefaultPasses) {
  RunConfig c;
  c.trials = 50;
  const Report r = run_verify_diagonal(c);
  EXPECT_EQ(r.exit_code(), 0) << (r.first_failure() ? r.first_failure()->name : "");
  EXPECT_EQ(r.config.at("trials"), 50);
  EXPECT_EQ(r.config.at("seed"), 1);
}

TEST(Suites, DiagonalInjectedFaultExitsTwo) {
  RunConfig c;
  c.trials = 5;
  c.inject_fault = true;
  const Report r = run_verify_diagonal(c);
  EXPECT_EQ(r.exit_code(), 2);
  EXPECT_EQ(r.first_failure()->name, "max-series");
}

TEST(Suites, DiagonalRejectsOtherStorage) {
  const std::string path = ::testing::TempDir() + "chaincraft_dense.json";
  {
    std::ofstream out(path);
    out << R"({"kind": "dense", "dim": 2, "data": [0, 0, 0, 1]})";
  }
  RunConfig c;
  c.pattern = path;
  EXPECT_EQ(run_verify_diagonal(c).exit_code(), 3);
  std::remove(path.c_str());
}

TEST(Suites, FullZeroPatternHasZeroSeries) {
  const std::string path = ::testing::TempDir() + "chaincraft_zero.json";
  {
    std::ofstream out(path);
    out << R"({"kind": "diagonal-rule", "dim": 15, "data": "zero"})";
  }
  RunConfig c;
  c.pattern = path;
  c.trials = 3;
  const Report r = run_verify_full(c);
  EXPECT_EQ(r.exit_code(), 0);
  for (const auto& chk : r.checks) EXPECT_EQ(chk.observed, 0.0) << chk.name;
  std::remove(path.c_str());
}

TEST(Suites, ReplayIsBitIdentical) {
  RunConfig c;
  c.trials = 4;
  c.seed = 99;
  const std::string a = report_json(run_verify_full(c)).dump();
  const std::string b = report_json(run_verify_full(c)).dump();
  EXPECT_EQ(a, b);
  c.threads = 3;
  EXPECT_EQ(report_json(run_verify_full(c)).dump(), a);
}

TEST(Suites, CountsOracleMc) {
  RunConfig c;
  EXPECT_EQ(run_counts(c).exit_code(), 0);
  c.n = 2;
  c.delta = 1.0;
  const Report o = run_oracle(c);
  EXPECT_EQ(o.exit_code(), 0);
  EXPECT_EQ(o.data.at("gamma2"), 1.0);
  c.trials = 20000;
  EXPECT_EQ(run_mc(c).exit_code(), 0);
}

TEST(Suites, EquidistantClosedFormMatchesOracle) {
  for (std::size_t n = 1; n <= kMaxOracleSize; ++n)
    EXPECT_DOUBLE_EQ(gamma2_exact(equidistant_space(n, 2.5)).value, equidistant_gamma2(n, 2.5)) << n;
}
