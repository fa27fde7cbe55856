// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "chaincraft/ladder.hpp"
#include "chaincraft/pattern.hpp"

namespace chaincraft {

using BigInt = boost::multiprecision::cpp_int;

inline BigInt pow2(std::uint64_t e) {
  BigInt x = 1;
  x <<= static_cast<unsigned>(e);
  return x;
}

// l_h = 2^(2^h), exact for h <= 16.
inline BigInt ladder(int h) {
  if (h < 0 || h > 16) throw std::out_of_range("ladder: h must be in [0,16]");
  return pow2(std::uint64_t{1} << h);
}

// l_h^p = l_{h + log2 p}.
inline BigInt ladder_pow(int h, std::uint64_t p) {
  if (h < 0 || h > 16) throw std::out_of_range("ladder_pow: h must be in [0,16]");
  const std::uint64_t e = (std::uint64_t{1} << h) * p;
  if (e > (std::uint64_t{1} << 22)) throw std::out_of_range("ladder_pow: exponent too large");
  return pow2(e);
}

inline BigInt binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  if (k > n - k) k = n - k;
  BigInt r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    r *= n - k + i;
    r /= i;
  }
  return r;
}

// Nonnegative integer solutions of x_1 + ... + x_n = m.
inline BigInt count_compositions(std::uint64_t n, std::uint64_t m) {
  if (n == 0) return m == 0 ? 1 : 0;
  return binomial(m + n - 1, n - 1);
}

namespace detail {

inline BigInt count_T_rec(int h, std::uint64_t p, std::map<std::pair<int, std::uint64_t>, BigInt>& memo) {
  if (h == 1) return binomial(p + 2, 2);
  auto key = std::make_pair(h, p);
  if (auto it = memo.find(key); it != memo.end()) return it->second;
  const std::uint64_t s = block_size(h);
  BigInt total = 0;
  for (std::uint64_t k = 0; k <= p; ++k) total += count_compositions(s, k) * count_T_rec(h - 1, 2 * (p - k), memo);
  memo.emplace(key, total);
  return total;
}

}  // namespace detail

// |T_{h,p}| where T_{h,p} = {x in Z_{>=0}^{2..l_h-1} : sum_i (sum_{j in S_i} x_j) / 2^{h-i} <= p}.
inline BigInt count_T(int h, std::uint64_t p) {
  if (h < 1 || h > 4 || p > 64)
    throw std::out_of_range("count_T: (h,p) outside h in [1,4], p <= 64 (size grows like 10^h * l_h^p)");
  std::map<std::pair<int, std::uint64_t>, BigInt> memo;
  return detail::count_T_rec(h, p, memo);
}

// Members of T_{h,p} in lexicographic order; coordinate k of a member is x_{k+2}.
inline std::vector<std::vector<std::uint32_t>> enumerate_T(int h, std::uint64_t p) {
  if (h < 1 || h > 4) throw std::out_of_range("enumerate_T: h must be in [1,4]");
  if (h == 4 || count_T(h, p) > 1000000) throw std::length_error("enumerate_T: more than 10^6 members");
  const std::size_t len = static_cast<std::size_t>(ladder_u64(h)) - 2;
  std::vector<std::uint64_t> weight(len);  // x_j * 2^{i-1} <= p * 2^{h-1}
  for (std::size_t k = 0; k < len; ++k) weight[k] = std::uint64_t{1} << (block_of(k + 2) - 1);
  const std::uint64_t cap = p << (h - 1);
  std::vector<std::vector<std::uint32_t>> out;
  std::vector<std::uint32_t> cur(len, 0);
  auto rec = [&](auto&& self, std::size_t k, std::uint64_t used) -> void {
    if (k == len) {
      out.push_back(cur);
      return;
    }
    for (std::uint32_t x = 0; used + x * weight[k] <= cap; ++x) {
      cur[k] = x;
      self(self, k + 1, used + x * weight[k]);
    }
    cur[k] = 0;
  };
  rec(rec, 0, 0);
  return out;
}

inline bool in_T(int h, std::uint64_t p, const std::vector<std::uint64_t>& x) {
  // x[k] is x_{k+2}, length l_h - 2.
  BigInt used = 0;
  for (std::size_t k = 0; k < x.size(); ++k) used += BigInt(x[k]) << (block_of(k + 2) - 1);
  return used <= (BigInt(p) << (h - 1));
}

// 10^h * l_{h + log2 p} with l_{h + log2 p} = l_h^p; p = 0 reads log2 0 = 0.
inline BigInt t_count_bound(int h, std::uint64_t p) {
  BigInt ten = 1;
  for (int i = 0; i < h; ++i) ten *= 10;
  return ten * ladder_pow(h, p == 0 ? 1 : p);
}

// log2 M(h) = floor(2^h / h).
inline std::uint64_t granularity_log2(int h) {
  if (h < 1 || h > 62) throw std::out_of_range("granularity: h must be in [1,62]");
  return (std::uint64_t{1} << h) / static_cast<std::uint64_t>(h);
}

inline BigInt granularity(int h) {
  if (h > 22) throw std::out_of_range("granularity: exact value only for h <= 22");
  return pow2(granularity_log2(h));
}

// floor(M(h) * s) / M(h) and ceil(M(h) * s) / M(h) evaluated exactly in binary64 (M(h) is a power of 2).
// Once M(h) * s reaches 2^53 it is already an integer, so s is returned unchanged.
inline double quantize_down(double s, int h) {
  const int k = static_cast<int>(std::min<std::uint64_t>(granularity_log2(h), 2000));
  const double v = std::ldexp(s, k);
  if (!(std::fabs(v) < 0x1.0p53)) return s;
  return std::ldexp(std::floor(v), -k);
}
inline double quantize_up(double s, int h) {
  const int k = static_cast<int>(std::min<std::uint64_t>(granularity_log2(h), 2000));
  const double v = std::ldexp(s, k);
  if (!(std::fabs(v) < 0x1.0p53)) return s;
  return std::ldexp(std::ceil(v), -k);
}

// y is an integer multiple of 2^-k.
inline bool is_multiple_of_pow2(double y, std::uint64_t k) {
  if (!std::isfinite(y)) return false;
  if (y == 0.0) return true;
  int e = 0;
  const double f = std::frexp(std::fabs(y), &e);
  auto mant = static_cast<std::uint64_t>(std::ldexp(f, 53));
  long long E = static_cast<long long>(e) - 53;
  while ((mant & 1u) == 0u) {
    mant >>= 1;
    ++E;
  }
  return E >= 0 || static_cast<std::uint64_t>(-E) <= k;
}

// ---------------------------------------------------------------------------
// dyadic bands of a block

// Square block of a pattern: local indices 1..n map to view indices lo..lo+n-1.
struct BlockMatrix {
  const Pattern* pattern = nullptr;
  std::size_t lo = 1;
  std::size_t n = 0;
  double operator()(std::size_t a, std::size_t b) const { return (*pattern)(lo + a - 1, lo + b - 1); }
};

class BandError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// r >= 0 with value in (K/2^{w+r+1}, K/2^{w+r}]; -1 for zero.
inline int band_of(double value, int w, double K) {
  if (value <= 0.0) return -1;
  if (value > std::ldexp(K, -w) * (1.0 + kBoundSlack)) throw BandError("entry exceeds K/2^w");
  int e = 0;
  std::frexp(K / value, &e);
  int r = std::max(0, e - 2 - w);
  while (r > 0 && value > std::ldexp(K, -(w + r))) --r;
  while (value <= std::ldexp(K, -(w + r + 1))) ++r;
  return r;
}

struct NeighborhoodIndex {
  int w = 0;
  double K = 0.0;
  std::size_t n = 0;
  // bands[j-1] = list of (r, members) sorted by r; members ascending local indices.
  std::vector<std::vector<std::pair<int, std::vector<std::uint32_t>>>> bands;
  bool symmetric = true;
  bool cardinality_ok = true;  // |N_r(M,j)| <= 2^{w+r}
  std::string failure;

  const std::vector<std::uint32_t>* band(std::size_t j, int r) const {
    for (const auto& [rr, v] : bands[j - 1])
      if (rr == r) return &v;
    return nullptr;
  }
};

// Max column sum of a block, through row profiles when the block is a union of whole ladder blocks.
inline double block_max_column_sum(const BlockMatrix& m) {
  double best = 0.0;
  std::vector<Span> runs;
  for (std::size_t a = 1; a <= m.n; ++a) {
    m.pattern->row_runs(m.lo + a - 1, runs);
    CompensatedSum s;
    for (const Span& r : runs) {
      const std::size_t lo = std::max<std::size_t>(r.lo, m.lo), hi = std::min<std::size_t>(r.hi, m.lo + m.n - 1);
      if (lo <= hi) s += r.value * static_cast<double>(hi - lo + 1);
    }
    best = std::max(best, s.value());
  }
  return best;
}

inline double block_max_entry(const BlockMatrix& m) {
  double best = 0.0;
  std::vector<Span> runs;
  for (std::size_t a = 1; a <= m.n; ++a) {
    m.pattern->row_runs(m.lo + a - 1, runs);
    for (const Span& r : runs)
      if (r.hi >= m.lo && r.lo < m.lo + m.n) best = std::max(best, r.value);
  }
  return best;
}

// Requires max column sum <= K; entries above K/2^w are rejected.
inline NeighborhoodIndex neighborhoods(const BlockMatrix& m, int w, double K) {
  if (m.n > 4096) throw std::length_error("neighborhoods: block larger than 4096");
  if (!within(block_max_column_sum(m), K)) throw BandError("column sum exceeds K");
  NeighborhoodIndex idx;
  idx.w = w;
  idx.K = K;
  idx.n = m.n;
  idx.bands.resize(m.n);
  for (std::size_t j = 1; j <= m.n; ++j) {
    std::map<int, std::vector<std::uint32_t>> by;
    for (std::size_t i = 1; i <= m.n; ++i) {
      const int r = band_of(m(i, j), w, K);
      if (r >= 0) by[r].push_back(static_cast<std::uint32_t>(i));
    }
    for (auto& [r, v] : by) {
      if (static_cast<double>(v.size()) > std::ldexp(1.0, w + r) && idx.cardinality_ok) {
        idx.cardinality_ok = false;
        idx.failure = "|N_" + std::to_string(r) + "(M," + std::to_string(j) + ")| exceeds 2^(w+r)";
      }
      idx.bands[j - 1].emplace_back(r, std::move(v));
    }
  }
  for (std::size_t j = 1; j <= m.n && idx.symmetric; ++j)
    for (const auto& [r, v] : idx.bands[j - 1])
      for (std::uint32_t i : v) {
        const auto* back = idx.band(i, r);
        if (!back || !std::binary_search(back->begin(), back->end(), static_cast<std::uint32_t>(j))) {
          idx.symmetric = false;
          idx.failure = "band membership not symmetric";
        }
      }
  return idx;
}

// ---------------------------------------------------------------------------
// size certificates

enum class SizeKind { count, A0, A1, A2_block, diagonal_B, final_set };

inline const char* size_kind_name(SizeKind k) {
  switch (k) {
    case SizeKind::count: return "count";
    case SizeKind::A0: return "A0";
    case SizeKind::A1: return "A1";
    case SizeKind::A2_block: return "A2-block";
    case SizeKind::diagonal_B: return "diagonal-B";
    case SizeKind::final_set: return "final";
  }
  return "?";
}

inline SizeKind size_kind_from(const std::string& s) {
  if (s == "count") return SizeKind::count;
  if (s == "A0") return SizeKind::A0;
  if (s == "A1") return SizeKind::A1;
  if (s == "A2-block") return SizeKind::A2_block;
  if (s == "diagonal-B") return SizeKind::diagonal_B;
  if (s == "final") return SizeKind::final_set;
  throw std::invalid_argument("unknown size certificate kind '" + s + "'");
}

struct SizeCertificate {
  SizeKind kind = SizeKind::A0;
  int h = 0;
  int shifted_h = 0;  // level whose budget 2^(2^h') the set must fit
  BigInt bound;
  BigInt limit;
  bool pass = false;
};

// Bound on the set size at level h against 2^(2^{h+shift}), the shift being the level offset where the set enters.
inline SizeCertificate size_certificate(SizeKind kind, int h, std::uint64_t p = 1) {
  if (h < 0 || h > 12) throw std::out_of_range("size_certificate: h must be in [0,12]");
  SizeCertificate c;
  c.kind = kind;
  c.h = h;
  switch (kind) {
    case SizeKind::count:
      c.bound = count_T(std::max(h, 1), p);
      c.shifted_h = h;
      c.limit = t_count_bound(std::max(h, 1), p);
      c.pass = c.bound <= c.limit;
      return c;
    case SizeKind::A0:
      c.bound = ladder_pow(h, 5);
      c.shifted_h = h + 3;
      break;
    case SizeKind::A1:
      c.bound = ladder_pow(h, 3);
      c.shifted_h = h + 2;
      break;
    case SizeKind::A2_block:
      if (h == 0) {
        c.bound = 1;
      } else {
        const std::uint64_t e = (std::uint64_t{1} << h) + 3 * h + 5 * (std::uint64_t{1} << (h - 1)) + 5 * (std::uint64_t{1} << h) +
                                (std::uint64_t{1} << (h + 1));
        c.bound = pow2(e);
      }
      c.shifted_h = h + 4;
      break;
    case SizeKind::diagonal_B: {
      BigInt ten = 1;
      for (int i = 0; i < h; ++i) ten *= 10;
      c.bound = ten * ladder(h);
      c.shifted_h = h + 2;
      break;
    }
    case SizeKind::final_set:
      c.bound = ladder_pow(h, 7);
      c.shifted_h = h + 3;
      break;
  }
  c.limit = ladder(c.shifted_h);
  c.pass = c.bound <= c.limit;
  return c;
}

inline std::string to_string(const BigInt& x) { return x.str(); }

}  // namespace chaincraft
