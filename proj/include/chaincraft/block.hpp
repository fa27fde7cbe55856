// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "chaincraft/chain.hpp"
#include "chaincraft/diagonal.hpp"
#include "chaincraft/dyadics.hpp"
#include "chaincraft/metrics.hpp"
#include "chaincraft/offdiag.hpp"
#include "chaincraft/pattern.hpp"
#include "chaincraft/point.hpp"
#include "chaincraft/rng.hpp"

namespace chaincraft {

inline constexpr double kBlockFactor = 990.0;
inline constexpr int kDefaultSamples = 16;
inline constexpr int kMaxSamples = 256;

// Parameters of a member of A_{2,h}(M). Indices are local to the block (1..n).
struct A2Certificate {
  BlockMatrix m;
  int w = 0;
  double K_given = 0.0;  // cap the block satisfies
  double K = 0.0;        // cap the bands are taken against (2 * K_given inside series_block)
  int h = 0;
  std::vector<double> y;
  std::vector<std::vector<std::uint32_t>> V;
  std::vector<std::pair<std::uint32_t, std::uint64_t>> x;
  std::vector<std::int8_t> sign;
};

// Whole-block statistics behind the cap hypotheses; independent of t, so callers may compute them once.
struct BlockCaps {
  double max_entry = 0.0;
  double max_column_sum = 0.0;
};

inline BlockCaps block_caps(const BlockMatrix& m) { return {block_max_entry(m), block_max_column_sum(m)}; }

// n <= l_w, max entry <= K/2^w, column sums <= K.
inline void require_block_caps(const BlockCaps& c, std::size_t n, int w, double K) {
  if (w < 1) throw std::invalid_argument("block: w must be >= 1");
  if (w <= 5 && static_cast<double>(n) > static_cast<double>(ladder_u64(w))) throw BandError("block size exceeds l_w");
  if (!within(c.max_entry, std::ldexp(K, -w))) throw BandError("block entry exceeds K/2^w");
  if (!within(c.max_column_sum, K)) throw BandError("block column sum exceeds K");
}

// Per-band edge masses and draw distributions of a block for a fixed t, restricted to supp(t).
class BlockSampler {
 public:
  BlockSampler(BlockMatrix m, int w, double K, const Point& t, const BlockCaps* caps = nullptr)
      : m_(m), w_(w), K_(K), t_(t) {
    if (!m.pattern) throw std::invalid_argument("block_sampler: no pattern");
    if (t.dim != m.n) throw std::invalid_argument("block_sampler: point dimension differs from block size");
    if (std::fabs(t.norm() - 1.0) > 1e-10) throw std::invalid_argument("block_sampler: t must be a unit vector");
    require_block_caps(caps ? *caps : block_caps(m), m.n, w, K);
    if (t.nz.size() > 4096) throw std::length_error("block_sampler: support larger than 4096");

    const std::size_t s = t.nz.size();
    std::vector<std::uint32_t> global;
    for (const auto& [j, v] : t.nz) {
      supp_.push_back(j);
      t2_.push_back(v * v);
      global.push_back(static_cast<std::uint32_t>(m.lo + j - 1));
    }
    band_.assign(s * s, -1);
    std::vector<CompensatedSum> vacc(s);
    std::vector<Span> runs;
    std::vector<double> row;
    int top = -1;
    for (std::size_t a = 0; a < s; ++a) {
      detail::row_on(*m.pattern, global[a], global, 0, runs, row);
      for (std::size_t b = 0; b < s; ++b) {
        if (row[b] == 0.0) continue;
        const int r = band_of(row[b], w, K);
        band_[a * s + b] = static_cast<std::int16_t>(r);
        top = std::max(top, r);
        vacc[b] += row[b] * t2_[a];
      }
    }
    for (std::size_t a = 0; a < s; ++a)
      for (std::size_t b = a + 1; b < s; ++b)
        if (band_[a * s + b] != band_[b * s + a]) throw BandError("block is not symmetric on supp(t)");
    for (auto& c : vacc) v_.push_back(c.value());

    std::vector<CompensatedSum> sig(top + 1);
    for (std::size_t a = 0; a < s; ++a)
      for (std::size_t b = a; b < s; ++b)
        if (band_[a * s + b] >= 0) sig[band_[a * s + b]] += t2_[a] * t2_[b];
    CompensatedSum total;
    for (auto& c : sig) {
      sigma_.push_back(c.value());
      total += sigma_.back();
    }
    sigma_total_ = total.value();

    cdf_.resize(sigma_.size());
    for (std::size_t r = 0; r < sigma_.size(); ++r) {
      if (sigma_[r] <= 0.0) continue;
      std::vector<double> pr(s, 0.0);
      CompensatedSum norm;
      for (std::size_t a = 0; a < s; ++a) {
        CompensatedSum acc;
        for (std::size_t b = 0; b < s; ++b)
          if (band_[a * s + b] == static_cast<int>(r)) acc += (a == b ? 2.0 : 1.0) * t2_[b];
        pr[a] = t2_[a] * acc.value() / (2.0 * sigma_[r]);
        norm += pr[a];
      }
      prob_sum_dev_ = std::max(prob_sum_dev_, std::fabs(norm.value() - 1.0));
      prob_.push_back(pr);
      std::vector<double> c(s);
      std::partial_sum(pr.begin(), pr.end(), c.begin());
      cdf_[r] = std::move(c);
    }
  }

  const BlockMatrix& block() const { return m_; }
  int w() const { return w_; }
  double K() const { return K_; }
  const Point& point() const { return t_; }
  std::size_t support_size() const { return supp_.size(); }
  std::uint32_t support_index(std::size_t a) const { return supp_[a]; }
  double t2(std::size_t a) const { return t2_[a]; }
  double v(std::size_t a) const { return v_[a]; }
  int band(std::size_t a, std::size_t b) const { return band_[a * supp_.size() + b]; }

  int num_bands() const { return static_cast<int>(sigma_.size()); }
  double sigma(int r) const { return r < num_bands() ? sigma_[r] : 0.0; }
  double sigma_total() const { return sigma_total_; }
  bool band_empty(int r) const { return sigma(r) <= 0.0; }
  double prob_sum_deviation() const { return prob_sum_dev_; }

  // P(X^{(r)} = supp[a]) for each a; empty when sigma_r = 0.
  std::vector<double> distribution(int r) const {
    if (band_empty(r)) return {};
    std::vector<double> out(supp_.size());
    const auto& c = cdf_[r];
    for (std::size_t a = 0; a < c.size(); ++a) out[a] = c[a] - (a ? c[a - 1] : 0.0);
    return out;
  }

  // Support position of one draw from band r.
  std::size_t draw(int r, CounterRng& rng) const {
    const auto& c = cdf_[r];
    const double u = rng.uniform() * c.back();
    const auto a = static_cast<std::size_t>(std::upper_bound(c.begin(), c.end(), u) - c.begin());
    return std::min(a, c.size() - 1);
  }

  double probability(int r, std::size_t a) const {
    const auto& c = cdf_[r];
    return c[a] - (a ? c[a - 1] : 0.0);
  }

 private:
  BlockMatrix m_;
  int w_;
  double K_;
  Point t_;
  std::vector<std::uint32_t> supp_;
  std::vector<double> t2_, v_;
  std::vector<std::int16_t> band_;
  std::vector<double> sigma_;
  double sigma_total_ = 0.0;
  double prob_sum_dev_ = 0.0;
  std::vector<std::vector<double>> prob_;
  std::vector<std::vector<double>> cdf_;
};

inline BlockSampler block_sampler(BlockMatrix m, int w, double K, const Point& t) { return BlockSampler(m, w, K, t); }
inline BlockMatrix whole(const Pattern& p) { return BlockMatrix{&p, 1, p.dim()}; }

struct BlockWitness {
  Point point;  // local coordinates 1..n
  A2Certificate cert;
  double distance_sq = 0.0;
};

// Zero member, valid at every level.
inline BlockWitness zero_block_witness(const BlockSampler& s, int h) {
  BlockWitness bw;
  bw.point = Point(s.block().n);
  bw.cert.m = s.block();
  bw.cert.w = s.w();
  bw.cert.K = s.K();
  bw.cert.K_given = s.K();
  bw.cert.h = h;
  CompensatedSum d;
  for (std::size_t a = 0; a < s.support_size(); ++a) d += s.v(a) * s.t2(a);
  bw.distance_sq = d.value();
  return bw;
}

// Draws ceil(2^{h-w-r} sigma_r) indices per band, covers N_r(M, V_r) and quantizes t there. Exact draws when the
// count is at most max(256, |supp t|); otherwise each support point is included with probability 1-(1-p)^m.
inline BlockWitness sample_block_witness(const BlockSampler& s, int h, CounterRng& rng) {
  if (h < s.w() + 1) throw std::invalid_argument("sample_block_witness: h must be >= w+1");
  if (h > 62) throw std::out_of_range("sample_block_witness: h must be <= 62");
  BlockWitness bw;
  bw.point = Point(s.block().n);
  A2Certificate& c = bw.cert;
  c.m = s.block();
  c.w = s.w();
  c.K = s.K();
  c.K_given = s.K();
  c.h = h;
  const int R = h - s.w();
  const std::size_t n = s.support_size();
  std::vector<char> covered(n, 0);
  c.y.resize(R + 1);
  c.V.resize(R + 1);
  for (int r = 0; r <= R; ++r) {
    const double sig = s.sigma(r);
    c.y[r] = quantize_up(sig, h) + std::ldexp(1.0, -(R - r));
    if (sig <= 0.0) continue;
    const double m = std::ceil(std::ldexp(sig, R - r));
    std::vector<char> in(n, 0);
    if (m <= std::max<double>(256.0, static_cast<double>(n))) {
      for (std::uint64_t k = 0; k < static_cast<std::uint64_t>(m); ++k) in[s.draw(r, rng)] = 1;
    } else {
      for (std::size_t a = 0; a < n; ++a) {
        const double p = s.probability(r, a);
        if (p <= 0.0) continue;
        const double q = p >= 1.0 ? 1.0 : -std::expm1(m * std::log1p(-p));
        if (rng.uniform() < q) in[a] = 1;
      }
    }
    for (std::size_t a = 0; a < n; ++a) {
      if (!in[a]) continue;
      c.V[r].push_back(s.support_index(a));
      for (std::size_t b = 0; b < n; ++b)
        if (s.band(a, b) == r) covered[b] = 1;
    }
  }
  CompensatedSum d;
  for (std::size_t b = 0; b < n; ++b) {
    const double tb = s.point().nz[b].second;
    double e = 0.0;
    if (covered[b]) {
      const std::uint64_t x = quantized_count(tb, h);
      if (x > 0) {
        c.x.emplace_back(s.support_index(b), x);
        c.sign.push_back(sign_of(tb));
        e = dyadic_entry(sign_of(tb), x, h);
        bw.point.nz.emplace_back(s.support_index(b), e);
      }
    }
    const double diff = tb - e;
    if (diff != 0.0) d += s.v(b) * diff * diff;
  }
  bw.distance_sq = d.value();
  return bw;
}

// Closed-form right-hand side bounding E[d~_{2,M}(t, sampled witness)^2] at level h.
inline double expected_block_bound(const BlockSampler& s, int h) {
  if (h < s.w() + 1) throw std::invalid_argument("expected_block_bound: h must be >= w+1");
  const double K = s.K();
  CompensatedSum small, expo, quant;
  for (std::size_t a = 0; a < s.support_size(); ++a) {
    const double v = s.v(a);
    if (v == 0.0) continue;
    const double t2 = s.t2(a);
    if (v <= std::ldexp(K, -h)) small += v * t2;
    expo += v * t2 * std::exp(-std::ldexp(v, h - 2) / K);
    const double tb = std::fabs(s.point().nz[a].second);
    const double q = tb - std::sqrt(std::ldexp(static_cast<double>(quantized_count(tb, h)), -h));
    quant += v * q * q;
  }
  return small.value() + expo.value() + quant.value();
}

namespace detail {

inline bool is_dyadic_at(double y, int h) { return is_multiple_of_pow2(y, granularity_log2(h)); }

}  // namespace detail

inline MembershipCheck verify_membership(const Point& w, const A2Certificate& c) {
  if (!c.m.pattern) return membership_fail("A2: certificate has no block");
  if (w.dim != c.m.n) return membership_fail("A2: witness dimension differs from block size");
  if (c.h <= c.w) return w.nz.empty() ? MembershipCheck{} : membership_fail("A2: levels h <= w hold only the zero vector");
  const int R = c.h - c.w;
  if (static_cast<int>(c.y.size()) != R + 1 || static_cast<int>(c.V.size()) != R + 1)
    return membership_fail("A2: y and V must have h-w+1 entries");
  CompensatedSum ys;
  for (int r = 0; r <= R; ++r) {
    if (!(c.y[r] >= 0.0) || !detail::is_dyadic_at(c.y[r], c.h))
      return membership_fail("A2 mass vector: y_" + std::to_string(r) + " is not a multiple of 1/M(h)");
    ys += c.y[r];
  }
  if (!within(ys.value(), 5.0)) return membership_fail("A2 mass vector: sum of y exceeds 5");
  for (int r = 0; r <= R; ++r) {
    const double budget = std::ldexp(c.y[r], R - r);
    if (static_cast<double>(c.V[r].size()) > budget)
      return membership_fail("A2 budget: |V_" + std::to_string(r) + "| = " + std::to_string(c.V[r].size()) +
                             " exceeds 2^(h-w-r) y_r = " + std::to_string(budget));
    for (std::size_t k = 0; k < c.V[r].size(); ++k) {
      if (c.V[r][k] < 1 || c.V[r][k] > c.m.n) return membership_fail("A2: V_r index out of range");
      if (k && c.V[r][k] <= c.V[r][k - 1]) return membership_fail("A2: V_r not strictly increasing");
    }
  }
  if (!detail::sum_at_most(c.x, std::uint64_t{1} << c.h)) return membership_fail("A2 budget: entry integers sum above 2^h");
  if (!detail::strictly_increasing(c.x)) return membership_fail("A2: entry indices not increasing");
  for (const auto& [j, xj] : c.x) {
    bool hit = false;
    for (int r = 0; r <= R && !hit; ++r)
      for (std::uint32_t v : c.V[r])
        if (band_of(c.m(j, v), c.w, c.K) == r) {
          hit = true;
          break;
        }
    if (!hit) return membership_fail("A2 neighborhood: entry " + std::to_string(j) + " outside the union of N_r(M, V_r)");
  }
  return detail::check_entries(w, c.x, c.sign, c.h);
}

// Best-of-k witnesses of A_{2,k}(M) for one t, memoized by level. K is the cap M satisfies; bands use 2K.
class BlockChain {
 public:
  BlockChain(BlockMatrix m, int w, double K, const Point& t, int samples, CounterRng rng, bool verify = true,
             const BlockCaps* caps = nullptr)
      : caps_(caps ? *caps : block_caps(m)),
        sampler_(check_cap(caps_, m, w, K), w, 2.0 * K, t, &caps_),
        K_given_(K),
        samples_(samples),
        rng_(rng),
        verify_(verify) {
    if (samples < 1) throw std::invalid_argument("BlockChain: samples must be >= 1");
  }

  const BlockSampler& sampler() const { return sampler_; }
  double K_given() const { return K_given_; }

  const BlockWitness& at(int k) {
    auto it = memo_.find(k);
    if (it != memo_.end()) return it->second;
    BlockWitness bw;
    if (k <= sampler_.w()) {
      bw = zero_block_witness(sampler_, k);
    } else {
      const double target = expected_block_bound(sampler_, k) * (1.0 + 1e-6);
      CounterRng lvl = rng_.split(static_cast<std::uint64_t>(k));
      int drawn = 0, limit = samples_;
      bool have = false;
      while (true) {
        for (; drawn < limit; ++drawn) {
          CounterRng r = lvl.split(static_cast<std::uint64_t>(drawn));
          BlockWitness cand = sample_block_witness(sampler_, k, r);
          draws_ += r.draws();
          if (!have || cand.distance_sq < bw.distance_sq) {
            bw = std::move(cand);
            have = true;
          }
        }
        if (bw.distance_sq <= target + 1e-300 || limit >= kMaxSamples) break;
        limit = std::min(2 * limit, kMaxSamples);
      }
      samples_used_ += drawn;
      if (bw.distance_sq > target + 1e-300) ++failures_;
    }
    bw.cert.K_given = K_given_;
    if (verify_) {
      const auto chk = verify_membership(bw.point, bw.cert);
      if (!chk.ok && membership_failure_.empty()) membership_failure_ = chk.failure;
    }
    return memo_.emplace(k, std::move(bw)).first->second;
  }

  int failures() const { return failures_; }
  std::uint64_t draws() const { return draws_; }
  std::uint64_t samples_used() const { return samples_used_; }
  const std::string& membership_failure() const { return membership_failure_; }

 private:
  static BlockMatrix check_cap(const BlockCaps& c, const BlockMatrix& m, int w, double K) {
    require_block_caps(c, m.n, w, K);
    return m;
  }

  BlockCaps caps_;
  BlockSampler sampler_;
  double K_given_;
  int samples_;
  CounterRng rng_;
  bool verify_;
  std::map<int, BlockWitness> memo_;
  int failures_ = 0;
  std::uint64_t draws_ = 0;
  std::uint64_t samples_used_ = 0;
  std::string membership_failure_;
};

inline void fill_block_report(ChainReport& rep, BlockChain& chain, SeriesAccumulator& acc, int h_max, int from_h = 0) {
  const Point& t = chain.sampler().point();
  for (int h = from_h; h <= h_max; ++h) {
    const int k = std::max(h - 4, 0);
    const BlockWitness& bw = chain.at(k);
    if (!dominated_loose(bw.point, t, 1)) rep.dominance_ok = false;
    acc.add(rep, h, k, bw.distance_sq);
    if (acc.done()) break;
  }
  rep.series = acc.value();
  rep.tail_bound = rep.levels.empty() ? 0.0 : 2.0 * rep.levels.back().term;
  rep.sampling_failures = chain.failures();
  rep.draws = chain.draws();
  if (!chain.membership_failure().empty()) {
    rep.membership_ok = false;
    rep.failure = chain.membership_failure();
  }
}

// sum_h 2^h d~_{2,M}(t, A_{2,max(h-4,0)} witness)^2 against 990K.
inline ChainReport series_block(BlockMatrix m, int w, double K, const Point& t, int samples, std::uint64_t seed,
                                int h_max = kDefaultHMax) {
  ChainReport rep;
  rep.name = "block";
  rep.seed = seed;
  rep.bound = kBlockFactor * K;
  BlockChain chain(m, w, K, t, samples, CounterRng(seed));
  SeriesAccumulator acc(w + 5);
  fill_block_report(rep, chain, acc, h_max);
  rep.budgets["block"] = rep.bound;
  rep.observed["block"] = rep.series;
  rep.pass = within(rep.series, rep.bound) && rep.dominance_ok && rep.membership_ok;
  return rep;
}

}  // namespace chaincraft
