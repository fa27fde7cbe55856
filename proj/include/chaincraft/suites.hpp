// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "chaincraft/diagonal.hpp"
#include "chaincraft/decompose.hpp"
#include "chaincraft/dyadics.hpp"
#include "chaincraft/estimators.hpp"
#include "chaincraft/full.hpp"
#include "chaincraft/io.hpp"
#include "chaincraft/parallel.hpp"
#include "chaincraft/rearrange.hpp"
#include "chaincraft/zoo.hpp"

namespace chaincraft {

// Everything a run depends on. Unset optionals fall back to per-command defaults, which are written into the
// report config so the resolved values can be passed back verbatim.
struct RunConfig {
  std::string command;
  std::string pattern;  // path; empty selects the command's default pattern
  std::uint64_t seed = 1;
  std::optional<std::size_t> trials;
  int samples_per_level = kDefaultSamples;
  int h_max = kDefaultHMax;
  std::string out;
  std::string format = "json";

  std::optional<std::size_t> dim;  // size of the default pattern
  bool zoo = false;                // verify-full over the built-in zoo
  bool inject_fault = false;       // verify-diagonal: replace witnesses from h = 3 on by e_1
  std::size_t n = 2;               // oracle: equidistant space size
  double delta = 1.0;              // oracle: equidistant spacing
  std::string metric;              // oracle: optional metric-space JSON
  unsigned threads = 0;            // does not affect any reported number
};

inline Json config_json(const RunConfig& c, std::size_t trials) {
  Json j;
  j["command"] = c.command;
  j["pattern"] = c.pattern.empty() ? Json(nullptr) : Json(c.pattern);
  j["seed"] = c.seed;
  j["trials"] = trials;
  j["samples_per_level"] = c.samples_per_level;
  j["h_max"] = c.h_max;
  j["format"] = c.format;
  if (c.dim) j["dim"] = *c.dim;
  return j;
}

inline std::string battery_name(std::size_t k, std::size_t dim) {
  switch (k) {
    case 0: return "e_2";
    case 1: return "e_" + std::to_string(dim);
    case 2: return "uniform";
    case 3: return "geometric";
    default: return "random-" + std::to_string(k - 4);
  }
}

inline Pattern default_or_loaded(const RunConfig& c, const Pattern& fallback) { return c.pattern.empty() ? fallback : load_pattern(c.pattern); }

// ---------------------------------------------------------------------------
// verify-diagonal

inline Report run_verify_diagonal(const RunConfig& c) {
  Report r;
  r.command = "verify-diagonal";
  const std::size_t trials = c.trials.value_or(1000);
  r.config = config_json(c, trials);
  const std::size_t dim0 = c.dim.value_or(15);
  Pattern p;
  try {
    p = default_or_loaded(c, Pattern::diagonal_rule("inverse-sqrt-log2", dim0));
  } catch (const std::exception& e) {
    r.precondition = e.what();
    return r;
  }
  if (p.storage() != Storage::diagonal_rule) {
    r.precondition = std::string("pattern must be diagonal-rule, got ") + storage_name(p.storage());
    return r;
  }
  const auto d0 = d0_for(p.dim());
  if (!d0) {
    r.precondition = "pattern dimension " + std::to_string(p.dim()) + " is not of the form l_d0 - 1";
    return r;
  }
  r.config["dim"] = p.dim();
  r.config["inject_fault"] = c.inject_fault;

  WitnessTamper tamper;
  if (c.inject_fault)
    tamper = [dim = p.dim()](int h, Point& w) {
      if (h >= 3) w = Point::unit(dim, 1);
    };
  const auto pts = point_battery(p.dim(), trials, CounterRng(c.seed));
  std::vector<DiagonalReport> reps(pts.size());
  parallel_for(pts.size(), c.threads, [&](std::size_t k) { reps[k] = diagonal_series(pts[k], *d0, c.h_max, tamper); });

  std::size_t worst = 0;
  bool membership = true, dominance = true;
  Json series = Json::array();
  for (std::size_t k = 0; k < reps.size(); ++k) {
    if (reps[k].series > reps[worst].series) worst = k;
    membership = membership && reps[k].membership_ok;
    dominance = dominance && reps[k].dominance_ok;
    series.push_back({{"point", battery_name(k, p.dim())}, {"series", number_json(reps[k].series)}});
    if (!within(reps[k].series, reps[k].bound))
      r.checks.push_back(make_check("point " + battery_name(k, p.dim()), "diagonal series <= 27", reps[k].series, reps[k].bound));
  }
  r.checks.insert(r.checks.begin(),
                  {make_check("max-series", "diagonal series <= 27", reps[worst].series, kDiagonalSeriesBound, true,
                              "attained at " + battery_name(worst, p.dim())),
                   make_flag("membership", "witness at level h lies in A_h", membership),
                   make_flag("dominance", "|witness_j| <= |t_j| for j >= 2", dominance)});
  if (p.rule() == "inverse-sqrt-log2") {
    const double e2 = reps[0].series;
    r.checks.push_back({"e_2-value", "hand-computed series at e_2 equals 7", e2, 7.0, e2 == 7.0, {}});
  }
  r.data["d0"] = *d0;
  r.data["max_series"] = number_json(reps[worst].series);
  r.data["argmax"] = battery_name(worst, p.dim());
  r.data["points"] = series;
  return r;
}

// ---------------------------------------------------------------------------
// verify-full

struct FullBatterySummary {
  std::string name;
  std::size_t points = 0;
  double C = 0.0;
  std::vector<Check> checks;
  Json data;
};

// Runs series_full over the point battery of one prepared pattern; the returned checks hold the worst point of
// every budget.
inline FullBatterySummary full_battery(const std::string& name, const PreparedPattern& pp, const RunConfig& c,
                                       std::size_t trials) {
  FullBatterySummary s;
  s.name = name;
  s.C = pp.constant.C;
  const Pattern& p = pp.pattern;
  const auto plan = make_full_plan(p, s.C);
  const auto pts = point_battery(p.dim(), trials, CounterRng(c.seed));
  s.points = pts.size();
  FullOptions opt;
  opt.h_max = c.h_max;
  opt.samples = c.samples_per_level;
  opt.seed = c.seed;
  std::vector<FullReport> reps(pts.size());
  parallel_for(pts.size(), c.threads, [&](std::size_t k) { reps[k] = series_full(plan, pts[k], opt); });

  struct Worst {
    double ratio = -1.0, observed = 0.0, bound = 0.0;
    std::size_t at = 0;
  };
  std::map<std::string, Worst> worst;
  bool membership = true, dominance = true, metric = true, additive = true, overflow = false, parts = true;
  std::string first_failure;
  double max_add = 0.0;
  for (std::size_t k = 0; k < reps.size(); ++k) {
    const FullReport& f = reps[k];
    for (const auto& [b, allowed] : f.total.budgets) {
      const double obs = f.total.observed.at(b);
      const double ratio = allowed > 0.0 ? obs / allowed : (obs > 0.0 ? INFINITY : 0.0);
      Worst& w = worst[b];
      if (ratio > w.ratio) w = {ratio, obs, allowed, k};
    }
    membership = membership && f.total.membership_ok;
    dominance = dominance && f.total.dominance_ok;
    metric = metric && f.metric_chain_ok;
    additive = additive && f.additivity_ok;
    overflow = overflow || f.overflow_hit;
    bool ok = f.offdiag.pass;
    for (const auto& pr : f.patched) ok = ok && pr.pass;
    parts = parts && ok;
    max_add = std::max(max_add, f.max_additivity_error);
    if (!f.pass && first_failure.empty()) first_failure = battery_name(k, p.dim()) + ": " + f.total.failure;
  }
  const std::string pre = name + "/";
  auto label = [](const std::string& b) -> std::string {
    if (b == "c0") return "canonical series <= 121931520 C^2";
    if (b == "offdiag") return "off-diagonal series <= 175 C^2";
    if (b == "glue") return "glued d~2 series <= 60 max component";
    if (b == "metric") return "canonical series <= 8 glued d~2 series";
    if (b.size() > 12 && b.compare(b.size() - 12, 12, "/slot-series") == 0) return "max slot series <= 990 K_block";
    if (b.size() > 11 && b.compare(b.size() - 11, 11, "/worst-case") == 0) return "patched series <= 73K + 16 * 990 K_block";
    return "patched series <= 73K + 16 * max slot series";
  };
  Json budgets = Json::object();
  for (const auto& [b, w] : worst) {
    s.checks.push_back(make_check(pre + b, label(b), w.observed, w.bound, true, "worst at " + battery_name(w.at, p.dim())));
    budgets[b] = {{"observed", number_json(w.observed)}, {"bound", number_json(w.bound)}, {"ratio", number_json(w.ratio)},
                  {"point", battery_name(w.at, p.dim())}};
  }
  s.checks.push_back(make_flag(pre + "membership", "witness at level h lies in the glued A_h", membership));
  s.checks.push_back(make_flag(pre + "dominance", "|witness_j| <= |t_j| for j >= 2", dominance));
  s.checks.push_back(make_flag(pre + "metric-chain", "d <= 2 sqrt 2 d~2 at every level", metric));
  s.checks.push_back(make_flag(pre + "additivity", "d~2 squared splits over the decomposition", additive));
  s.checks.push_back(make_flag(pre + "overflow", "glued witness keeps first coordinate real", !overflow));
  s.checks.push_back(make_flag(pre + "components", "every component chain passes its own checks", parts, first_failure));
  s.data = {{"name", name},
            {"dim", p.dim()},
            {"C", number_json(s.C)},
            {"points", s.points},
            {"max_additivity_error", number_json(max_add)},
            {"budgets", budgets}};
  return s;
}

inline Report run_verify_full(const RunConfig& c) {
  Report r;
  r.command = "verify-full";
  const std::size_t trials = c.trials.value_or(100);
  r.config = config_json(c, trials);
  r.config["zoo"] = c.zoo;
  std::vector<ZooEntry> entries;
  try {
    if (c.zoo)
      entries = pattern_zoo(true);
    else
      entries.push_back({c.pattern.empty() ? "easy" : c.pattern,
                         default_or_loaded(c, Pattern::diagonal_rule("inverse-sqrt-log2", c.dim.value_or(15)))});
  } catch (const std::exception& e) {
    r.precondition = e.what();
    return r;
  }
  Json runs = Json::array();
  for (const auto& z : entries) {
    const PreparedPattern pp = prepare_pattern(z.pattern);
    if (!pp.assumption.pass) {
      r.precondition = z.name + ": standing assumption fails after rearrangement (" + pp.assumption.violation + ")";
      return r;
    }
    FullBatterySummary s = full_battery(z.name, pp, c, trials);
    r.checks.insert(r.checks.end(), s.checks.begin(), s.checks.end());
    runs.push_back(s.data);
  }
  r.data["patterns"] = runs;
  return r;
}

// ---------------------------------------------------------------------------
// counts

inline Report run_counts(const RunConfig& c) {
  Report r;
  r.command = "counts";
  r.config = config_json(c, 0);
  Json grid = Json::array();
  bool match = true, bounded = true;
  std::string where;
  for (int h = 1; h <= 2; ++h)
    for (std::uint64_t p = 0; p <= 3; ++p) {
      const BigInt recur = count_T(h, p);
      const std::size_t listed = enumerate_T(h, p).size();
      const BigInt bound = t_count_bound(h, p);
      if (BigInt(listed) != recur) {
        match = false;
        if (where.empty()) where = "h=" + std::to_string(h) + " p=" + std::to_string(p);
      }
      bounded = bounded && recur <= bound;
      grid.push_back({{"h", h}, {"p", p}, {"count", to_string(recur)}, {"enumerated", listed}, {"bound", to_string(bound)}});
    }
  r.checks.push_back(make_flag("enumeration", "enumerated |T_{h,p}| equals the recurrence for h <= 2, p <= 3", match, where));
  r.checks.push_back(make_flag("size-bound", "|T_{h,p}| <= 10^h l_h^p", bounded));
  const auto c12 = count_T(1, 2), c21 = count_T(2, 1);
  r.checks.push_back({"count(1,2)", "hand count |T_{1,2}| = 6", c12.convert_to<double>(), 6.0, c12 == 6, {}});
  r.checks.push_back({"count(2,1)", "hand count |T_{2,1}| = 18", c21.convert_to<double>(), 18.0, c21 == 18, {}});
  r.data["grid"] = grid;
  return r;
}

// ---------------------------------------------------------------------------
// decompose

inline Report run_decompose(const RunConfig& c) {
  Report r;
  r.command = "decompose";
  r.config = config_json(c, 0);
  Pattern p;
  try {
    p = default_or_loaded(c, Pattern::diagonal_rule("inverse-sqrt-log2", c.dim.value_or(15)));
  } catch (const std::exception& e) {
    r.precondition = e.what();
    return r;
  }
  const PreparedPattern pp = prepare_pattern(p);
  const Decomposition d = decompose(pp.pattern);
  const DecompositionReport v = verify_decomposition(pp.pattern, d, c.seed);
  r.checks.push_back(make_flag("partition", "block pairs covered exactly once", v.partition, v.failure));
  r.checks.push_back(make_flag("exact", "parts sum to the pattern entrywise", v.exact, v.failure));
  r.checks.push_back(make_flag("disjoint", "parts have disjoint supports", v.disjoint, v.failure));
  r.checks.push_back(make_flag("block-diagonal", "symmetric parts are block diagonal on their merged blocks", v.block_diagonal, v.failure));
  r.checks.push_back(make_flag("assumption", "standing assumption after rearrangement", pp.assumption.pass, pp.assumption.violation));
  r.data["C"] = number_json(pp.constant.C);
  r.data["entries_checked"] = v.entries_checked;
  r.data["decomposition"] = decomposition_json(d);
  return r;
}

// ---------------------------------------------------------------------------
// mc

inline Report run_mc(const RunConfig& c, McSummary* keep = nullptr) {
  Report r;
  r.command = "mc";
  const std::size_t trials = c.trials.value_or(10000);
  r.config = config_json(c, trials);
  Pattern p;
  try {
    p = default_or_loaded(c, Pattern::diagonal_rule("identity", c.dim.value_or(2)));
  } catch (const std::exception& e) {
    r.precondition = e.what();
    return r;
  }
  if (p.dim() > 512) {
    r.precondition = "mc samples dense matrices; dimension must be <= 512";
    return r;
  }
  McSummary s = mc_norms(p, trials, c.seed, c.threads);
  const double proxy = norm_proxy(p);
  r.checks.push_back(make_flag("samplewise", "||Z|| >= max column norm on every trial", s.samplewise_ok));
  if (p.storage() == Storage::diagonal_rule && p.rule() == "identity" && p.dim() == 2) {
    const double target = 2.0 / std::sqrt(M_PI);
    r.checks.push_back(make_check("closed-form", "|mean ||Z|| - 2/sqrt(pi)| <= 3 SE", std::fabs(s.mean_op - target), 3.0 * s.se_op));
  }
  if (proxy > 0.0) {
    const double ratio = s.mean_col / proxy;
    r.checks.push_back({"proxy-ratio", "mean max column norm / norm proxy in [0.05, 20]", ratio, 20.0,
                        ratio >= 0.05 && ratio <= 20.0, {}});
  }
  r.data = {{"dim", p.dim()},
            {"mean_op", number_json(s.mean_op)},
            {"se_op", number_json(s.se_op)},
            {"mean_col", number_json(s.mean_col)},
            {"se_col", number_json(s.se_col)},
            {"norm_proxy", number_json(proxy)},
            {"norm_proxy_log2", number_json(norm_proxy_log2(p))}};
  if (keep) *keep = std::move(s);
  return r;
}

// ---------------------------------------------------------------------------
// oracle

// Distances of n uniform points in the unit square.
inline FiniteMetricSpace random_plane_space(std::size_t n, CounterRng& rng) {
  std::vector<double> x(n), y(n), d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.uniform();
    y[i] = rng.uniform();
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d[i * n + j] = i == j ? 0.0 : std::hypot(x[i] - x[j], y[i] - y[j]);
  return FiniteMetricSpace::from_matrix(n, d, true);
}

inline FiniteMetricSpace equidistant_space(std::size_t n, double delta) {
  std::vector<double> d(n * n, delta);
  for (std::size_t i = 0; i < n; ++i) d[i * n + i] = 0.0;
  return FiniteMetricSpace::from_matrix(n, d);
}

// gamma_2 of n equidistant points. A_1 holds four points and need not contain A_0, so five points cost sqrt 2 delta
// and from six on some point misses both A_0 and A_1.
inline double equidistant_gamma2(std::size_t n, double delta) {
  if (n <= 1) return 0.0;
  if (n <= 4) return delta;
  return n == 5 ? std::sqrt(2.0) * delta : (1.0 + std::sqrt(2.0)) * delta;
}

inline Report run_oracle(const RunConfig& c) {
  Report r;
  r.command = "oracle";
  const std::size_t trials = c.trials.value_or(50);
  r.config = config_json(c, trials);
  r.config["n"] = c.n;
  r.config["delta"] = c.delta;
  if (!c.metric.empty()) r.config["metric"] = c.metric;
  FiniteMetricSpace s;
  try {
    if (!c.metric.empty()) {
      std::ifstream in(c.metric);
      if (!in) throw std::invalid_argument("cannot open metric file " + c.metric);
      Json j;
      in >> j;
      std::vector<double> d;
      for (const auto& row : j.at("d"))
        for (const auto& x : row) d.push_back(x.get<double>());
      s = FiniteMetricSpace::from_matrix(j.at("n").get<std::size_t>(), d, true);
    } else {
      if (c.n < 1 || c.n > kMaxOracleSize || !(c.delta > 0.0)) throw std::invalid_argument("oracle needs 1 <= n <= 8 and delta > 0");
      s = equidistant_space(c.n, c.delta);
    }
    if (s.n > kMaxOracleSize) throw std::invalid_argument("oracle spaces have at most 8 points");
  } catch (const std::exception& e) {
    r.precondition = e.what();
    return r;
  }
  const Gamma2Result g = gamma2_exact(s);
  const double weak = weak_series_exact(s);
  if (c.metric.empty()) {
    const double want = equidistant_gamma2(c.n, c.delta);
    r.checks.push_back({"equidistant", "gamma_2 of equidistant points matches the counted value", g.value, want,
                        std::fabs(g.value - want) <= 1e-15 * std::max(1.0, want), {}});
  }
  r.checks.push_back(make_check("weak-series", "weak series <= gamma_2^2", weak, g.value * g.value));

  CounterRng root(c.seed);
  double worst_weak = 0.0, worst_scale = 0.0;
  for (std::size_t k = 0; k < trials; ++k) {
    CounterRng rng = root.split(k);
    const FiniteMetricSpace x = random_plane_space(5, rng);
    const double gx = gamma2_exact(x).value;
    if (gx > 0.0) worst_weak = std::max(worst_weak, weak_series_exact(x) / (gx * gx));
    const double scale = 0.1 + 10.0 * rng.uniform();
    const double gs = gamma2_exact(x.scaled(scale)).value;
    if (gx > 0.0) worst_scale = std::max(worst_scale, std::fabs(gs - scale * gx) / (scale * gx));
  }
  if (trials > 0) {
    r.checks.push_back(make_check("random-weak-series", "weak series / gamma_2^2 <= 1 on random 5-point spaces", worst_weak, 1.0));
    r.checks.push_back(make_check("homogeneity", "relative error of gamma_2(cT) vs c gamma_2(T) <= 1e-12", worst_scale, 1e-12));
  }
  Json seq = Json::array();
  for (const auto& a : g.sequence) seq.push_back(a);
  r.data = {{"n", s.n}, {"gamma2", number_json(g.value)}, {"weak_series", number_json(weak)}, {"sequence", seq}};
  return r;
}

}  // namespace chaincraft
