// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "chaincraft/chaining.hpp"
#include "chaincraft/suites.hpp"

using namespace chaincraft;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string summary;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) summary = what;
      pass = false;
      if (notes.size() < 12) notes.push_back("failed: " + what);
    }
  }
};

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

// Local point on 1..n from a random unit vector on 2..n+1.
Point random_local(std::size_t n, CounterRng& rng) {
  Point t = random_unit_tail(n + 1, rng);
  std::vector<Point::Entry> e;
  for (const auto& [j, v] : t.nz) e.emplace_back(j - 1, v);
  return Point::from_entries(n, e);
}

Point uniform_local(std::size_t n) { return Point::from_dense(std::vector<double>(n, 1.0 / std::sqrt(static_cast<double>(n)))); }

Point geometric_local(std::size_t n) {
  std::vector<double> c(n);
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    c[k] = std::pow(2.0, -0.5 * static_cast<double>(k));
    s += c[k] * c[k];
  }
  for (double& v : c) v /= std::sqrt(s);
  return Point::from_dense(c);
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  Outcome o;
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::size_t dim : {15u, 255u}) {
    RunConfig c;
    c.dim = dim;
    c.trials = 1000;
    c.seed = 2024 + dim;
    const Report r = run_verify_diagonal(c);
    for (const auto& chk : r.checks) o.require(chk.pass, "d=" + std::to_string(dim) + " " + chk.name + " observed " + fmt(chk.observed));
    worst = std::max(worst, r.data.at("max_series").get<double>());
    o.notes.push_back("d=" + std::to_string(dim) + ": max series " + fmt(r.data.at("max_series").get<double>()) + " at " +
                      r.data.at("argmax").get<std::string>() + ", e_2 series " + fmt(r.data.at("points")[0].at("series").get<double>()));
  }
  const double secs = seconds_since(t0);
  o.require(secs < 10.0, "runtime " + fmt(secs) + " s >= 10 s");
  if (o.pass) o.summary = "max diagonal series " + fmt(worst) + " <= 27, e_2 gives 7, " + fmt(secs) + " s";
  return o;
}

Outcome criterion2() {
  Outcome o;
  RunConfig c;
  const Report r = run_counts(c);
  for (const auto& chk : r.checks) o.require(chk.pass, chk.name + " " + chk.detail);
  if (o.pass) o.summary = "enumeration = recurrence on " + std::to_string(r.data.at("grid").size()) + " (h,p) cells, all within 10^h l_h^p";
  return o;
}

Outcome criterion3() {
  Outcome o;
  CounterRng rng(33);
  double r1 = 0.0, r2 = 0.0, r3 = 0.0;
  const double cap3 = 2.0 + 20.0 / 7.0;
  for (int k = 0; k < 1000; ++k) {
    const double x = rng.uniform();
    const double a = floor_series(x, 60), b = sqrt_floor_series(x, 60), e = exp_series(x, 60);
    o.require(a <= 4.0 * x, "floor series at x=" + fmt(x));
    o.require(b <= 4.0, "sqrt floor series at x=" + fmt(x));
    o.require(e < cap3, "exponential series at x=" + fmt(x));
    if (x > 0.0) r1 = std::max(r1, a / x);
    r2 = std::max(r2, b);
    r3 = std::max(r3, e);
  }
  if (o.pass) o.summary = "max floor/x " + fmt(r1) + " <= 4, max sqrt-floor " + fmt(r2) + " <= 4, max exp " + fmt(r3) + " < " + fmt(cap3);
  return o;
}

Outcome criterion4() {
  Outcome o;
  std::vector<ZooEntry> pats;
  for (std::uint64_t s = 0; s < 8; ++s) pats.push_back({"dense-15/" + std::to_string(s), random_dense_pattern(15, 400 + s)});
  for (std::uint64_t s = 0; s < 4; ++s) pats.push_back({"dense-255/" + std::to_string(s), random_dense_pattern(255, 500 + s)});
  for (std::uint64_t s = 0; s < 3; ++s) pats.push_back({"banded-255/" + std::to_string(s), banded_pattern(255, 1 + s, 600 + s)});
  for (std::uint64_t s = 0; s < 5; ++s) pats.push_back({"block-65535/" + std::to_string(s), block_constant_pattern(700 + s)});
  std::size_t entries = 0;
  for (const auto& z : pats) {
    const PreparedPattern pp = prepare_pattern(z.pattern);
    const Decomposition d = decompose(pp.pattern);
    const DecompositionReport v = verify_decomposition(pp.pattern, d, 7);
    o.require(v.partition && v.exact && v.disjoint && v.block_diagonal, z.name + ": " + v.failure);
    entries += v.entries_checked;
  }
  if (o.pass) o.summary = std::to_string(pats.size()) + " patterns exact, disjoint and block diagonal (" + std::to_string(entries) + " entries checked)";
  return o;
}

// Row contents as a sorted (value, multiplicity) list; its sum is the same for any column order.
double canonical_row_sum(const Pattern& p, std::size_t i, std::vector<Span>& runs) {
  runs.clear();
  p.row_runs(i, runs);
  std::map<double, std::size_t> hist;
  for (const Span& r : runs) hist[r.value] += r.length();
  CompensatedSum s;
  for (const auto& [v, c] : hist) s += v * static_cast<double>(c);
  return s.value();
}

std::vector<double> row_sum_multiset(const Pattern& p) {
  std::vector<double> out;
  std::vector<Span> runs;
  for (std::size_t i = 1; i <= p.dim(); ++i) out.push_back(canonical_row_sum(p, i, runs));
  std::sort(out.begin(), out.end());
  return out;
}

// Dense d = 255 with rows of S_1 and S_2 carrying their largest entries in far columns of S_3.
Pattern adversarial_dense(std::uint64_t seed, double K) {
  CounterRng rng(seed);
  const std::size_t d = 255;
  std::vector<double> v(d * d, 0.0);
  auto set = [&](std::size_t i, std::size_t j, double x) { v[(i - 1) * d + (j - 1)] = v[(j - 1) * d + (i - 1)] = x; };
  for (std::size_t i = 2; i <= d; ++i) set(i, i, 0.05 * K / std::ldexp(1.0, block_of(i)));
  for (std::size_t i = 2; i < 16; ++i)
    for (int k = 0; k < 3; ++k) {
      const std::size_t j = 200 + static_cast<std::size_t>(rng.uniform() * 55.0);
      set(i, j, K / 8.0 * (0.2 + 0.1 * rng.uniform()));
    }
  return Pattern::dense(d, v);
}

Pattern adversarial_block(std::uint64_t seed, double K) {
  CounterRng rng(seed);
  std::vector<double> beta(16, 0.0);
  for (int a = 1; a <= 4; ++a)
    for (int b = 1; b <= 4; ++b) beta[(a - 1) * 4 + (b - 1)] = 1e-3 * K / (std::ldexp(1.0, std::max(a, b)) * static_cast<double>(block_size(std::max(a, b))));
  std::vector<std::tuple<std::size_t, std::size_t, double>> ov;
  for (int k = 0; k < 6; ++k) {
    const std::size_t i = 2 + static_cast<std::size_t>(rng.uniform() * 14.0);
    const std::size_t j = 30000 + static_cast<std::size_t>(rng.uniform() * 35000.0);
    ov.emplace_back(i, j, K / 16.0 * (0.1 + 0.05 * rng.uniform()));
  }
  std::sort(ov.begin(), ov.end());
  ov.erase(std::unique(ov.begin(), ov.end(),
                       [](const auto& x, const auto& y) { return std::get<0>(x) == std::get<0>(y) && std::get<1>(x) == std::get<1>(y); }),
           ov.end());
  return Pattern::block_constant(4, beta, ov);
}

Outcome criterion5() {
  Outcome o;
  const double K = 1.0;
  std::size_t moved = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Pattern m = s < 5 ? adversarial_dense(800 + s, K) : adversarial_block(900 + s, K);
    const std::string name = (s < 5 ? "dense-255/" : "block-65535/") + std::to_string(s);
    const RearrangeResult res = rearrange(m, K);
    o.require(res.hypotheses_ok, name + ": " + res.hypothesis_violation);
    o.require(res.moved_rows > 0, name + ": no large entry was relocated");
    o.require(res.certificate.pass, name + ": " + res.certificate.violation);
    o.require(row_sum_multiset(m) == row_sum_multiset(res.pattern), name + ": row-sum multiset changed");
    moved += res.moved_rows;
  }
  if (o.pass) o.summary = "10 adversarial patterns: decay holds after rearrangement (" + std::to_string(moved) + " row moves), row sums preserved";
  return o;
}

Outcome criterion6() {
  Outcome o;
  const auto t0 = Clock::now();
  double worst_ratio = 0.0, worst_series = 0.0, worst_bound = 0.0;
  std::size_t points = 0;
  for (std::uint64_t s = 0; s < 2; ++s) {
    const PreparedPattern pp = prepare_pattern(block_constant_pattern(1000 + s));
    const Decomposition d = decompose(pp.pattern);
    o.require(d.far.block_value(1, 4) > 0.0 || d.far.block_value(4, 1) > 0.0, "far part is zero");
    const auto pts = point_battery(pp.pattern.dim(), 46, CounterRng(1100 + s));
    for (const Point& t : pts) {
      const ChainReport r = series_offdiag(d.far, pp.constant.C, t);
      o.require(r.pass, "off-diagonal series " + fmt(r.series) + " vs " + fmt(r.bound) + " " + r.failure);
      if (r.bound > 0.0 && r.series / r.bound > worst_ratio) {
        worst_ratio = r.series / r.bound;
        worst_series = r.series;
        worst_bound = r.bound;
      }
      ++points;
    }
  }
  const double secs = seconds_since(t0);
  o.require(secs < 300.0, "runtime " + fmt(secs) + " s >= 300 s");
  if (o.pass)
    o.summary = std::to_string(points) + " points: max off-diagonal series " + fmt(worst_series) + " <= 175 C^2 = " + fmt(worst_bound) + ", " +
                fmt(secs) + " s";
  return o;
}

// Block shapes with entries <= K/2^w and column sums <= K.
Pattern block_shape(int shape, std::size_t n, int w, double K, std::uint64_t seed) {
  CounterRng rng(seed);
  const double cap = std::min(std::ldexp(K, -w), K / static_cast<double>(n));
  std::vector<double> v(n * n, 0.0);
  if (shape == 0) std::fill(v.begin(), v.end(), cap);
  if (shape == 1) {
    const std::size_t bw = 2;
    const double e = std::min(std::ldexp(K, -w), K / static_cast<double>(2 * bw + 1));
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a; b <= std::min(n - 1, a + bw); ++b) v[a * n + b] = v[b * n + a] = e * (0.2 + 0.8 * rng.uniform());
  }
  if (shape == 2)
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a; b < n; ++b) v[a * n + b] = v[b * n + a] = cap * rng.uniform();
  return Pattern::dense(n, v);
}

const char* shape_name(int s) { return s == 0 ? "constant" : (s == 1 ? "banded" : "random"); }

Outcome criterion7() {
  Outcome o;
  const double K = 1.0;
  std::size_t cells = 0;
  double worst = -INFINITY;
  std::string worst_at;
  for (int w = 1; w <= 3; ++w) {
    const std::size_t n = static_cast<std::size_t>(ladder_u64(w));
    for (int shape = 0; shape < 3; ++shape) {
      const Pattern m = block_shape(shape, n, w, K, 70 + 10 * w + shape);
      CounterRng prng(170 + 10 * w + shape);
      std::vector<Point> pts{Point::unit(n, 1), Point::unit(n, n), uniform_local(n), geometric_local(n), random_local(n, prng)};
      for (std::size_t k = 0; k < pts.size(); ++k) {
        const BlockSampler s(BlockMatrix{&m, 1, n}, w, K, pts[k]);
        for (int h = w + 1; h <= w + 4; ++h) {
          const double rhs = expected_block_bound(s, h);
          CounterRng rng(1000 * w + 100 * shape + 10 * static_cast<int>(k) + h);
          std::vector<double> x(1000);
          for (std::size_t q = 0; q < x.size(); ++q) {
            CounterRng r = rng.split(q);
            x[q] = sample_block_witness(s, h, r).distance_sq;
          }
          double mean = 0.0, se = 0.0;
          mean_and_se(x, mean, se);
          const std::string at = "w=" + std::to_string(w) + " " + shape_name(shape) + " point " + std::to_string(k) + " h=" + std::to_string(h);
          o.require(mean <= rhs + 3.0 * se, at + ": mean " + fmt(mean) + " > rhs " + fmt(rhs) + " + 3 SE " + fmt(se));
          const double margin = (mean - rhs) / std::max(rhs, 1e-300);
          if (rhs > 0.0 && margin > worst) {
            worst = margin;
            worst_at = at;
          }
          ++cells;
        }
      }
    }
  }
  if (o.pass) o.summary = std::to_string(cells) + " cells within closed form + 3 SE; closest (mean - rhs)/rhs = " + fmt(worst) + " at " + worst_at;
  return o;
}

Outcome criterion8() {
  Outcome o;
  const double K = 1.0;
  double worst = 0.0;
  std::string worst_at;
  for (int k = 0; k < 100; ++k) {
    const int w = 1 + k % 3;
    const int shape = (k / 3) % 3;
    const std::size_t n = static_cast<std::size_t>(ladder_u64(w));
    const Pattern m = block_shape(shape, n, w, K, 5000 + k);
    CounterRng prng(6000 + k);
    const Point t = k % 10 == 0 ? Point::unit(n, 1) : random_local(n, prng);
    const ChainReport r = series_block(BlockMatrix{&m, 1, n}, w, K, t, 16, 7000 + k);
    const std::string at = "pair " + std::to_string(k) + " (w=" + std::to_string(w) + " " + shape_name(shape) + ")";
    o.require(r.pass, at + ": series " + fmt(r.series) + " vs " + fmt(r.bound) + " " + r.failure);
    if (r.series / r.bound > worst) {
      worst = r.series / r.bound;
      worst_at = at;
    }
  }
  if (o.pass) o.summary = "100 (M, t) pairs within 990 K; largest series/bound " + fmt(worst) + " at " + worst_at;
  return o;
}

Outcome criterion9() {
  Outcome o;
  RunConfig c;
  c.seed = 9;
  double worst_c0 = 0.0;
  for (const auto& z : pattern_zoo(true)) {
    const PreparedPattern pp = prepare_pattern(z.pattern);
    o.require(pp.assumption.pass, z.name + ": assumption fails after rearrangement");
    if (!pp.assumption.pass) continue;
    const FullBatterySummary s = full_battery(z.name, pp, c, 96);
    std::string line = z.name + " (" + std::to_string(s.points) + " points, C=" + fmt(s.C) + "):";
    for (const auto& [b, e] : s.data.at("budgets").items())
      if (b == "c0" || b == "offdiag" || b == "glue" || b == "metric" || b.find("slot-series") != std::string::npos)
        if (e.at("ratio").is_number() && e.at("ratio").get<double>() > 0.0) line += " " + b + "=" + fmt(e.at("ratio").get<double>());
    o.notes.push_back(line + " (observed/bound maxima)");
    for (const auto& chk : s.checks) o.require(chk.pass, chk.name + " observed " + fmt(chk.observed) + " bound " + fmt(chk.bound) + " " + chk.detail);
    const auto& c0 = s.data.at("budgets").at("c0");
    if (c0.at("ratio").is_number()) worst_c0 = std::max(worst_c0, c0.at("ratio").get<double>());
  }
  o.notes.push_back("largest canonical series / (121931520 C^2) over the zoo: " + fmt(worst_c0));
  if (o.pass) o.summary = "zoo within c0 C^2 and every internal budget; max series/c0C^2 " + fmt(worst_c0);
  return o;
}

Outcome criterion10() {
  Outcome o;
  o.require(gamma2_exact(FiniteMetricSpace::from_matrix(1, {0.0})).value == 0.0, "singleton");
  for (double delta : {0.5, 1.0, 7.25}) {
    o.require(gamma2_exact(equidistant_space(2, delta)).value == delta, "two points at " + fmt(delta));
    o.require(gamma2_exact(equidistant_space(3, delta)).value == delta, "three equidistant at " + fmt(delta));
  }
  RunConfig c;
  c.seed = 10;
  c.trials = 50;
  c.n = 3;
  const Report r = run_oracle(c);
  for (const auto& chk : r.checks) o.require(chk.pass, chk.name + " observed " + fmt(chk.observed) + " bound " + fmt(chk.bound));
  if (o.pass) {
    double weak = 0.0, hom = 0.0;
    for (const auto& chk : r.checks) {
      if (chk.name == "random-weak-series") weak = chk.observed;
      if (chk.name == "homogeneity") hom = chk.observed;
    }
    o.summary = "closed cases exact; weak/gamma_2^2 max " + fmt(weak) + " on 50 spaces; homogeneity error " + fmt(hom);
  }
  return o;
}

Outcome criterion11() {
  Outcome o;
  const McSummary id = mc_norms(Pattern::diagonal_rule("identity", 2), 100000, 11);
  const double target = 2.0 / std::sqrt(M_PI);
  o.require(std::fabs(id.mean_op - target) <= 3.0 * id.se_op, "identity d=2 mean " + fmt(id.mean_op) + " vs " + fmt(target));
  o.require(id.samplewise_ok, "identity d=2 samplewise column bound");
  o.notes.push_back("identity d=2: mean " + fmt(id.mean_op) + " +- " + fmt(id.se_op) + ", target " + fmt(target));
  double lo = INFINITY, hi = 0.0;
  for (const auto& z : pattern_zoo(false)) {
    if (z.pattern.dim() > 512) continue;
    const double proxy = norm_proxy(z.pattern);
    const McSummary s = mc_norms(z.pattern, 400, 12);
    o.require(s.samplewise_ok, z.name + ": samplewise column bound");
    if (proxy == 0.0) {
      o.require(s.mean_col == 0.0, z.name + ": zero proxy but nonzero columns");
      continue;
    }
    const double ratio = s.mean_col / proxy;
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
    o.notes.push_back(z.name + ": mean max column norm / proxy = " + fmt(ratio));
    o.require(ratio >= 0.05 && ratio <= 20.0, z.name + ": ratio " + fmt(ratio));
  }
  if (o.pass) o.summary = "2/sqrt(pi) within 3 SE; column-norm/proxy ratios in [" + fmt(lo) + ", " + fmt(hi) + "]";
  return o;
}

}  // namespace

int main() {
  std::setvbuf(stdout, nullptr, _IONBF, 0);
  using Fn = Outcome (*)();
  const Fn criteria[] = {criterion1, criterion2, criterion3, criterion4, criterion5, criterion6,
                         criterion7, criterion8, criterion9, criterion10, criterion11};
  int failed = 0;
  for (int k = 0; k < 11; ++k) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[k]();
    } catch (const std::exception& e) {
      o.pass = false;
      o.summary = std::string("exception: ") + e.what();
    }
    for (const auto& n : o.notes) std::printf("    %s\n", n.c_str());
    std::printf("criterion %2d: %s  %s  [%.1f s]\n", k + 1, o.pass ? "PASS" : "FAIL", o.summary.c_str(), seconds_since(t0));
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of 11 criteria passed\n", 11 - failed);
  return failed == 0 ? 0 : 1;
}
