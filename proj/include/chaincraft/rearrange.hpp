// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "chaincraft/ladder.hpp"
#include "chaincraft/pattern.hpp"

namespace chaincraft {

struct DecayCertificate {
  bool pass = true;
  double K = 0.0;
  int L = 0;
  std::vector<double> block_max;  // (L+1)^2, row-major
  std::string violation;
  int i1 = 0, i2 = 0;
  double observed = 0.0, allowed = 0.0;
};

struct RearrangeResult {
  Pattern pattern;
  std::vector<std::uint32_t> perm;  // index 0 unused; N_ij = M_{perm(i) perm(j)}
  bool hypotheses_ok = true;
  std::string hypothesis_violation;
  DecayCertificate certificate;
  std::size_t moved_rows = 0;
};

namespace detail {

inline void fail_cert(DecayCertificate& c, std::string what, int a, int b, double obs, double allowed) {
  c.pass = false;
  c.violation = std::move(what);
  c.i1 = a;
  c.i2 = b;
  c.observed = obs;
  c.allowed = allowed;
}

}  // namespace detail

// N_{j1 j2} <= K/|S_i1|^2 when i1 <= i2-3 and <= 2K/2^i1 when i1 <= i2.
inline DecayCertificate decay_certificate(const Pattern& n, double K) {
  DecayCertificate c;
  c.K = K;
  c.L = n.max_block();
  c.block_max = n.block_pair_max();
  const int L = c.L;
  for (int a = 1; a <= L && c.pass; ++a)
    for (int b = a; b <= L; ++b) {
      const double obs = c.block_max[static_cast<std::size_t>(a) * (L + 1) + b];
      if (a <= b - 3) {
        const double s = static_cast<double>(block_size(a));
        if (!within(obs, K / (s * s))) {
          detail::fail_cert(c, "far decay K/|S_i1|^2", a, b, obs, K / (s * s));
          break;
        }
      }
      const double allowed = 2.0 * K / std::ldexp(1.0, a);
      if (!within(obs, allowed)) {
        detail::fail_cert(c, "near decay 2K/2^i1", a, b, obs, allowed);
        break;
      }
    }
  return c;
}

// Entry bound K/2^max(i1,i2) and row sums <= K.
inline std::string rearrange_hypotheses(const Pattern& m, double K) {
  if (!d0_for(m.dim())) return "dimension is not of the form l_{d0+1}-1";
  const int L = m.max_block();
  const auto prof = m.all_row_profiles();
  for (std::size_t i = 1; i <= m.dim(); ++i) {
    CompensatedSum s;
    const int bi = block_of(i);
    for (int b = 0; b <= L; ++b) {
      s += prof[i].sum[b];
      if (bi >= 1 && b >= 1 && !within(prof[i].max[b], K / std::ldexp(1.0, std::max(bi, b))))
        return "entry bound K/2^max(i1,i2) fails at block pair (" + std::to_string(bi) + "," + std::to_string(b) + ")";
    }
    if (!within(s.value(), K)) return "row sum exceeds K at row " + std::to_string(i);
  }
  return {};
}

// Moves, for each row j in S_1..S_{L-2}, the |S_i|^2 largest entries right of t_j into columns t_j+1, ...
inline RearrangeResult rearrange(const Pattern& m, double K) {
  RearrangeResult res;
  res.hypothesis_violation = rearrange_hypotheses(m, K);
  res.hypotheses_ok = res.hypothesis_violation.empty();
  const std::size_t d = m.dim();
  const int L = m.max_block();
  std::vector<std::uint32_t> perm(d + 1), inv(d + 1);
  for (std::size_t i = 0; i <= d; ++i) perm[i] = inv[i] = static_cast<std::uint32_t>(i);

  std::size_t t = 0;
  std::vector<Span> runs;
  const std::size_t last_row = L >= 3 ? block_set(L - 2).hi - 1 : 1;
  for (std::size_t j = 2; j <= last_row && j <= d; ++j) {
    const std::size_t s = block_size(block_of(j));
    const std::size_t take = s * s;
    t += take;  // t_j = t_{j-1} + |S_i|^2, t_1 = 0
    const std::size_t start = t;
    if (start >= d) continue;
    Pattern cur = m.permuted(perm);
    cur.row_runs(j, runs);
    std::vector<std::pair<double, std::uint32_t>> cand;
    for (const Span& r : runs) {
      std::size_t lo = std::max<std::size_t>(r.lo, start + 1);
      for (std::size_t c = lo; c <= r.hi && c < lo + take; ++c) cand.emplace_back(r.value, static_cast<std::uint32_t>(c));
    }
    std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    if (cand.size() > take) cand.resize(take);
    std::vector<std::uint32_t> originals;
    for (const auto& c : cand) originals.push_back(perm[c.second]);
    bool moved = false;
    for (std::size_t k = 0; k < originals.size(); ++k) {
      const std::size_t target = start + 1 + k;
      if (target > d) break;
      const std::size_t src = inv[originals[k]];
      if (src == target) continue;
      std::swap(perm[src], perm[target]);
      inv[perm[src]] = static_cast<std::uint32_t>(src);
      inv[perm[target]] = static_cast<std::uint32_t>(target);
      moved = true;
    }
    if (moved) ++res.moved_rows;
  }
  res.pattern = m.permuted(perm).with_normalized_flag(m.normalized());
  res.perm = std::move(perm);
  res.certificate = decay_certificate(res.pattern, K);
  return res;
}

// Rows 2..d reordered by descending row maximum (ties by index); index 1 stays put.
inline Pattern sort_rows_by_max(const Pattern& p, std::vector<std::uint32_t>* perm_out = nullptr) {
  std::vector<double> rowmax, rownorm2;
  detail::row_stats(p, rowmax, rownorm2);
  std::vector<std::uint32_t> order;
  for (std::size_t i = 2; i <= p.dim(); ++i) order.push_back(static_cast<std::uint32_t>(i));
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return rowmax[a] > rowmax[b]; });
  std::vector<std::uint32_t> perm(p.dim() + 1, 0);
  if (p.dim() >= 1) perm[1] = 1;
  for (std::size_t k = 0; k < order.size(); ++k) perm[k + 2] = order[k];
  if (perm_out) *perm_out = perm;
  return p.permuted(perm).with_normalized_flag(p.normalized());
}

struct PreparedPattern {
  Pattern pattern;
  PatternConstant constant;
  RearrangeResult rearranged;
  AssumptionReport assumption;
};

// normalize, sort rows by maxima, rearrange with K = 2C^2, then check the standing assumption with C.
inline PreparedPattern prepare_pattern(const Pattern& p) {
  PreparedPattern out;
  out.constant = compute_C(p);
  const double C = out.constant.C;
  Pattern n = normalize(p);
  Pattern sorted = sort_rows_by_max(n);
  out.rearranged = rearrange(sorted, 2.0 * C * C);
  out.pattern = out.rearranged.pattern;
  out.assumption = check_assumption(out.pattern, C);
  return out;
}

}  // namespace chaincraft
