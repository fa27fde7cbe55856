// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "chaincraft/ladder.hpp"
#include "chaincraft/sum.hpp"

namespace chaincraft {

enum class Storage { dense, diagonal_rule, block_constant };

inline const char* storage_name(Storage s) {
  switch (s) {
    case Storage::dense: return "dense";
    case Storage::diagonal_rule: return "diagonal-rule";
    case Storage::block_constant: return "block-constant";
  }
  return "?";
}

class PatternError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Inclusive column range carrying one nonzero value.
struct Span {
  std::uint32_t lo;
  std::uint32_t hi;
  double value;
  std::size_t length() const { return static_cast<std::size_t>(hi) - lo + 1; }
};

// Per ladder block (0..L) aggregates of one row.
struct BlockProfile {
  std::vector<double> sum;
  std::vector<double> max;
};

namespace detail {

// Immutable backing store; coordinates 1-based in 1..n.
struct RawPattern {
  Storage kind = Storage::dense;
  std::size_t n = 0;
  std::vector<double> values;  // dense n*n, diagonal n, block-constant nb*nb
  int nb = 0;
  // block-constant only: per-row sorted (column, value) replacements, symmetric.
  std::vector<std::vector<std::pair<std::uint32_t, double>>> overrides;
  std::string rule;

  bool row_overridden(std::size_t i) const { return !overrides.empty() && !overrides[i].empty(); }

  double beta(int a, int b) const {
    if (a < 1 || b < 1 || a > nb || b > nb) return 0.0;
    return values[static_cast<std::size_t>(a - 1) * nb + (b - 1)];
  }

  double at(std::size_t i, std::size_t j) const {
    switch (kind) {
      case Storage::dense: return values[(i - 1) * n + (j - 1)];
      case Storage::diagonal_rule: return i == j ? values[i - 1] : 0.0;
      case Storage::block_constant: {
        if (row_overridden(i)) {
          const auto& row = overrides[i];
          auto it = std::lower_bound(row.begin(), row.end(), j,
                                     [](const auto& e, std::size_t k) { return e.first < k; });
          if (it != row.end() && it->first == j) return it->second;
        }
        return beta(block_of(i), block_of(j));
      }
    }
    return 0.0;
  }

  // Nonzero runs of row i over columns [lo, hi], ascending.
  void row_runs(std::size_t i, std::size_t lo, std::size_t hi, std::vector<Span>& out) const {
    if (lo < 1) lo = 1;
    if (hi > n) hi = n;
    if (lo > hi) return;
    switch (kind) {
      case Storage::dense: {
        const double* row = values.data() + (i - 1) * n;
        for (std::size_t j = lo; j <= hi; ++j)
          if (row[j - 1] != 0.0) out.push_back({static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(j), row[j - 1]});
        return;
      }
      case Storage::diagonal_rule:
        if (i >= lo && i <= hi && values[i - 1] != 0.0)
          out.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i), values[i - 1]});
        return;
      case Storage::block_constant: {
        const int bi = block_of(i);
        static const std::vector<std::pair<std::uint32_t, double>> none;
        const auto& ov = row_overridden(i) ? overrides[i] : none;
        auto it = std::lower_bound(ov.begin(), ov.end(), lo, [](const auto& e, std::size_t k) { return e.first < k; });
        for (int b = std::max(1, block_of(lo)); b <= nb; ++b) {
          IndexRange r = block_set(b);
          std::size_t a = std::max(lo, r.lo), z = std::min(hi, r.hi - 1);
          if (a > z) {
            if (r.lo > hi) break;
            continue;
          }
          const double val = beta(bi, b);
          std::size_t cur = a;
          while (it != ov.end() && it->first <= z) {
            if (it->first > cur && val != 0.0)
              out.push_back({static_cast<std::uint32_t>(cur), it->first - 1, val});
            if (it->second != 0.0) out.push_back({it->first, it->first, it->second});
            cur = it->first + 1;
            ++it;
          }
          if (cur <= z && val != 0.0)
            out.push_back({static_cast<std::uint32_t>(cur), static_cast<std::uint32_t>(z), val});
        }
        return;
      }
    }
  }
};

inline void check_entry(double v, std::size_t i, std::size_t j) {
  if (!std::isfinite(v)) throw PatternError("non-finite entry at (" + std::to_string(i) + "," + std::to_string(j) + ")");
  if (v < 0.0) throw PatternError("negative entry at (" + std::to_string(i) + "," + std::to_string(j) + ")");
}

}  // namespace detail

// Variance pattern B = (b^2_ij), 1-based. A view over shared immutable storage:
// entry(i,j) = mask(blk i, blk j) ? raw(perm(i) - shift, perm(j) - shift) : 0.
class Pattern {
 public:
  Pattern() = default;

  // ---- construction ----

  static Pattern dense(std::size_t n, std::vector<double> values) {
    if (n == 0) throw PatternError("dense pattern needs dim >= 1");
    if (n > 4096) throw PatternError("dense storage is capped at dim 4096");
    if (values.size() != n * n) throw PatternError("dense pattern: expected dim*dim entries");
    for (std::size_t i = 1; i <= n; ++i)
      for (std::size_t j = 1; j <= n; ++j) {
        detail::check_entry(values[(i - 1) * n + (j - 1)], i, j);
        if (j > i && values[(i - 1) * n + (j - 1)] != values[(j - 1) * n + (i - 1)])
          throw PatternError("asymmetric dense input at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
    auto raw = std::make_shared<detail::RawPattern>();
    raw->kind = Storage::dense;
    raw->n = n;
    raw->values = std::move(values);
    return Pattern(std::move(raw), n);
  }

  static Pattern dense(const std::vector<std::vector<double>>& rows) {
    const std::size_t n = rows.size();
    std::vector<double> v;
    v.reserve(n * n);
    for (const auto& r : rows) {
      if (r.size() != n) throw PatternError("dense pattern: rows must have dim entries");
      v.insert(v.end(), r.begin(), r.end());
    }
    return dense(n, std::move(v));
  }

  // diag holds b^2_ii.
  static Pattern diagonal(std::vector<double> diag, std::string rule = "table") {
    if (diag.empty()) throw PatternError("diagonal pattern needs dim >= 1");
    for (std::size_t i = 0; i < diag.size(); ++i) detail::check_entry(diag[i], i + 1, i + 1);
    auto raw = std::make_shared<detail::RawPattern>();
    raw->kind = Storage::diagonal_rule;
    raw->n = diag.size();
    raw->values = std::move(diag);
    raw->rule = std::move(rule);
    const std::size_t n = raw->n;
    return Pattern(std::move(raw), n);
  }

  // Named formula tables for b_ii.
  //   "inverse-sqrt-log2": b_11 = 0, b_ii = 1/sqrt(log2(i+1)) for i >= 2
  //   "identity": b_ii = 1
  static Pattern diagonal_rule(const std::string& rule, std::size_t dim) {
    std::vector<double> d(dim, 0.0);
    if (rule == "inverse-sqrt-log2") {
      for (std::size_t i = 2; i <= dim; ++i) d[i - 1] = 1.0 / std::log2(static_cast<double>(i + 1));
    } else if (rule == "identity") {
      std::fill(d.begin(), d.end(), 1.0);
    } else if (rule == "zero") {
    } else {
      throw PatternError("unknown diagonal rule '" + rule + "'");
    }
    return diagonal(std::move(d), rule);
  }

  static Pattern zero(std::size_t dim) { return diagonal_rule("zero", dim); }

  // beta is nb x nb over ladder blocks 1..nb; dim = l_nb - 1. Overrides are (i, j, b^2_ij) with i,j >= 2,
  // mirrored automatically.
  static Pattern block_constant(int nb, std::vector<double> beta,
                                const std::vector<std::tuple<std::size_t, std::size_t, double>>& overrides = {}) {
    if (nb < 1 || nb > 4) throw PatternError("block-constant pattern: block count must be in [1,4]");
    if (beta.size() != static_cast<std::size_t>(nb * nb)) throw PatternError("block-constant pattern: beta must be nb*nb");
    for (int a = 0; a < nb; ++a)
      for (int b = 0; b < nb; ++b) {
        detail::check_entry(beta[a * nb + b], a + 1, b + 1);
        if (beta[a * nb + b] != beta[b * nb + a])
          throw PatternError("asymmetric beta table at block pair (" + std::to_string(a + 1) + "," + std::to_string(b + 1) + ")");
      }
    auto raw = std::make_shared<detail::RawPattern>();
    raw->kind = Storage::block_constant;
    raw->nb = nb;
    raw->n = static_cast<std::size_t>(ladder_u64(nb) - 1);
    raw->values = std::move(beta);
    if (!overrides.empty()) {
      raw->overrides.assign(raw->n + 1, {});
      for (const auto& [i, j, v] : overrides) {
        if (i < 2 || j < 2 || i > raw->n || j > raw->n) throw PatternError("override index out of range");
        detail::check_entry(v, i, j);
        raw->overrides[i].emplace_back(static_cast<std::uint32_t>(j), v);
        if (i != j) raw->overrides[j].emplace_back(static_cast<std::uint32_t>(i), v);
      }
      for (auto& row : raw->overrides) {
        std::sort(row.begin(), row.end());
        for (std::size_t k = 1; k < row.size(); ++k)
          if (row[k].first == row[k - 1].first) {
            if (row[k].second != row[k - 1].second) throw PatternError("conflicting overrides");
          }
        row.erase(std::unique(row.begin(), row.end()), row.end());
      }
    }
    const std::size_t n = raw->n;
    return Pattern(std::move(raw), n);
  }

  // ---- accessors ----

  std::size_t dim() const { return dim_; }
  Storage storage() const { return raw_->kind; }
  bool normalized() const { return normalized_; }
  std::size_t shift() const { return shift_; }
  bool has_permutation() const { return static_cast<bool>(perm_); }
  bool has_mask() const { return static_cast<bool>(mask_); }
  int max_block() const { return block_of(dim_); }
  const std::string& rule() const { return raw_->rule; }
  const std::string& id() const { return id_; }
  Pattern& set_id(std::string s) {
    id_ = std::move(s);
    return *this;
  }

  // Position in the shifted raw store hit by view index i (0 if padding).
  std::size_t raw_index(std::size_t i) const {
    std::size_t p = perm_ ? (*perm_)[i] : i;
    if (p <= shift_) return 0;
    p -= shift_;
    return p <= raw_->n ? p : 0;
  }

  bool mask_allows(int bi, int bj) const {
    if (!mask_) return true;
    const int L = max_block();
    return (*mask_)[static_cast<std::size_t>(bi) * (L + 1) + bj] != 0;
  }

  double operator()(std::size_t i, std::size_t j) const {
    if (mask_ && !mask_allows(block_of(i), block_of(j))) return 0.0;
    const std::size_t ri = raw_index(i), rj = raw_index(j);
    if (ri == 0 || rj == 0) return 0.0;
    return raw_->at(ri, rj);
  }

  // Nonzero runs of row i in view coordinates, ascending, split at ladder block boundaries, mask applied.
  void row_runs(std::size_t i, std::vector<Span>& out) const {
    out.clear();
    unmasked_runs(i, out);
    split_and_mask(i, out);
  }

  BlockProfile row_profile(std::size_t i) const {
    BlockProfile p = unmasked_profile(i);
    apply_mask(i, p);
    return p;
  }

  // Profiles of every row 1..dim (index 0 unused). Rows sharing a structured class reuse one computation.
  std::vector<BlockProfile> all_row_profiles() const {
    std::vector<BlockProfile> out(dim_ + 1);
    std::vector<std::optional<BlockProfile>> memo(8);
    for (std::size_t i = 1; i <= dim_; ++i) {
      int key = memo_key(i);
      if (key >= 0) {
        if (!memo[key]) memo[key] = unmasked_profile(i);
        out[i] = *memo[key];
      } else {
        out[i] = unmasked_profile(i);
      }
      apply_mask(i, out[i]);
    }
    return out;
  }

  double row_sum(std::size_t i) const {
    BlockProfile p = row_profile(i);
    CompensatedSum s;
    for (double v : p.sum) s += v;
    return s.value();
  }

  double row_max(std::size_t i) const {
    BlockProfile p = row_profile(i);
    return *std::max_element(p.max.begin(), p.max.end());
  }

  // (L+1) x (L+1) table of block-pair maxima, row-major.
  std::vector<double> block_pair_max() const {
    const int L = max_block();
    std::vector<double> m(static_cast<std::size_t>(L + 1) * (L + 1), 0.0);
    auto prof = all_row_profiles();
    for (std::size_t i = 1; i <= dim_; ++i) {
      const int bi = block_of(i);
      for (int b = 0; b <= L; ++b) {
        double& cell = m[static_cast<std::size_t>(bi) * (L + 1) + b];
        cell = std::max(cell, prof[i].max[b]);
      }
    }
    return m;
  }

  bool first_row_zero() const {
    std::vector<Span> r;
    row_runs(1, r);
    return r.empty();
  }

  // Materialized dense copy (row-major, 0-based), for dim <= 4096.
  std::vector<double> to_dense() const {
    if (dim_ > 4096) throw PatternError("to_dense: dimension exceeds the dense cap 4096");
    std::vector<double> out(dim_ * dim_, 0.0);
    std::vector<Span> runs;
    for (std::size_t i = 1; i <= dim_; ++i) {
      row_runs(i, runs);
      for (const Span& r : runs)
        for (std::size_t j = r.lo; j <= r.hi; ++j) out[(i - 1) * dim_ + (j - 1)] = r.value;
    }
    return out;
  }

  // Beta table (nb x nb) for unpermuted, unshifted block-constant views without overrides.
  std::optional<std::vector<double>> beta_table() const {
    if (raw_->kind != Storage::block_constant || perm_ || shift_ != 0 || !raw_->overrides.empty() || dim_ != raw_->n)
      return std::nullopt;
    const int nb = raw_->nb;
    std::vector<double> b(static_cast<std::size_t>(nb) * nb);
    for (int x = 1; x <= nb; ++x)
      for (int y = 1; y <= nb; ++y) b[(x - 1) * nb + (y - 1)] = mask_allows(x, y) ? raw_->beta(x, y) : 0.0;
    return b;
  }

  // True when v_M can use per-block masses: block-constant, no permutation, no shift, no overrides.
  bool block_mass_fast_path() const {
    return raw_->kind == Storage::block_constant && !perm_ && shift_ == 0 && raw_->overrides.empty();
  }
  double block_value(int a, int b) const { return mask_allows(a, b) ? raw_->beta(a, b) : 0.0; }

  // Override entries (i <= j) of an unpermuted, unshifted block-constant view, after the mask.
  std::vector<std::tuple<std::size_t, std::size_t, double>> override_triplets() const {
    std::vector<std::tuple<std::size_t, std::size_t, double>> out;
    if (raw_->kind != Storage::block_constant || perm_ || shift_ != 0 || raw_->overrides.empty()) return out;
    for (std::size_t i = 1; i <= raw_->n; ++i)
      for (const auto& [j, v] : raw_->overrides[i])
        if (j >= i && mask_allows(block_of(i), block_of(j))) out.emplace_back(i, j, v);
    return out;
  }

  // ---- derived views ----

  // View with coordinates shifted by s and dimension D (used by normalize).
  Pattern embedded(std::size_t D, std::size_t s) const {
    if (perm_ || mask_ || shift_ != 0) throw PatternError("embedding requires a plain pattern");
    if (raw_->n + s > D) throw PatternError("embedding dimension too small");
    Pattern p = *this;
    p.dim_ = D;
    p.shift_ = s;
    return p;
  }

  // N = P^T M P with N_ij = M_{perm(i) perm(j)}; perm has size dim+1 (index 0 unused).
  Pattern permuted(const std::vector<std::uint32_t>& perm) const {
    if (mask_) throw PatternError("cannot permute a masked pattern");
    if (perm.size() != dim_ + 1) throw PatternError("permutation size mismatch");
    std::vector<std::uint32_t> composed(dim_ + 1, 0);
    std::vector<char> seen(dim_ + 1, 0);
    for (std::size_t i = 1; i <= dim_; ++i) {
      const std::uint32_t q = perm[i];
      if (q < 1 || q > dim_ || seen[q]) throw PatternError("not a bijection");
      seen[q] = 1;
      composed[i] = perm_ ? (*perm_)[q] : q;
    }
    Pattern p = *this;
    std::vector<std::uint32_t> touched;
    for (std::size_t i = 1; i <= dim_; ++i)
      if (composed[i] != i) touched.push_back(static_cast<std::uint32_t>(i));
    if (touched.empty()) {
      p.perm_.reset();
      p.touched_.reset();
    } else {
      p.perm_ = std::make_shared<const std::vector<std::uint32_t>>(std::move(composed));
      p.touched_ = std::make_shared<const std::vector<std::uint32_t>>(std::move(touched));
    }
    return p;
  }

  // Restriction to block pairs accepted by pred(i1, i2); entries are copied, never recomputed.
  Pattern masked(const std::function<bool(int, int)>& pred) const {
    const int L = max_block();
    auto m = std::make_shared<std::vector<std::uint8_t>>(static_cast<std::size_t>(L + 1) * (L + 1), 0);
    for (int a = 0; a <= L; ++a)
      for (int b = 0; b <= L; ++b) (*m)[static_cast<std::size_t>(a) * (L + 1) + b] = (mask_allows(a, b) && pred(a, b)) ? 1 : 0;
    Pattern p = *this;
    p.mask_ = std::move(m);
    return p;
  }

  Pattern with_normalized_flag(bool f) const {
    Pattern p = *this;
    p.normalized_ = f;
    return p;
  }

  const std::vector<std::uint32_t>* permutation() const { return perm_.get(); }

 private:
  Pattern(std::shared_ptr<const detail::RawPattern> raw, std::size_t dim) : raw_(std::move(raw)), dim_(dim) {}

  void emit_raw(std::size_t rp, std::size_t a, std::size_t b, std::vector<Span>& out) const {
    if (b < a) return;
    if (b <= shift_) return;
    std::size_t lo = a > shift_ ? a - shift_ : 1;
    std::size_t hi = b - shift_;
    const std::size_t first = out.size();
    raw_->row_runs(rp, lo, hi, out);
    if (shift_ != 0)
      for (std::size_t k = first; k < out.size(); ++k) {
        out[k].lo += static_cast<std::uint32_t>(shift_);
        out[k].hi += static_cast<std::uint32_t>(shift_);
      }
  }

  void unmasked_runs(std::size_t i, std::vector<Span>& out) const {
    const std::size_t rp = raw_index(i);
    if (rp == 0) return;
    if (!perm_) {
      emit_raw(rp, 1, dim_, out);
      return;
    }
    std::size_t cur = 1;
    for (std::uint32_t t : *touched_) {
      if (cur < t) emit_raw(rp, cur, t - 1, out);
      const std::size_t rq = raw_index(t);
      if (rq != 0) {
        const double v = raw_->at(rp, rq);
        if (v != 0.0) out.push_back({t, t, v});
      }
      cur = static_cast<std::size_t>(t) + 1;
    }
    if (cur <= dim_) emit_raw(rp, cur, dim_, out);
  }

  void split_and_mask(std::size_t i, std::vector<Span>& runs) const {
    std::vector<Span> out;
    out.reserve(runs.size() + 8);
    const int bi = block_of(i);
    for (Span r : runs) {
      while (true) {
        const int b = block_of(r.lo);
        const std::size_t end = b == 0 ? 1 : block_set(b).hi - 1;
        Span piece{r.lo, static_cast<std::uint32_t>(std::min<std::size_t>(end, r.hi)), r.value};
        if (mask_allows(bi, b)) out.push_back(piece);
        if (piece.hi == r.hi) break;
        r.lo = piece.hi + 1;
      }
    }
    runs.swap(out);
  }

  BlockProfile unmasked_profile(std::size_t i) const {
    const int L = max_block();
    std::vector<Span> runs;
    unmasked_runs(i, runs);
    // split without mask
    std::vector<CompensatedSum> acc(L + 1);
    BlockProfile p{std::vector<double>(L + 1, 0.0), std::vector<double>(L + 1, 0.0)};
    for (Span r : runs) {
      while (true) {
        const int b = block_of(r.lo);
        const std::size_t end = b == 0 ? 1 : block_set(b).hi - 1;
        const std::size_t hi = std::min<std::size_t>(end, r.hi);
        acc[b] += r.value * static_cast<double>(hi - r.lo + 1);
        p.max[b] = std::max(p.max[b], r.value);
        if (hi == r.hi) break;
        r.lo = static_cast<std::uint32_t>(hi + 1);
      }
    }
    for (int b = 0; b <= L; ++b) p.sum[b] = acc[b].value();
    return p;
  }

  void apply_mask(std::size_t i, BlockProfile& p) const {
    if (!mask_) return;
    const int bi = block_of(i);
    for (int b = 0; b < static_cast<int>(p.sum.size()); ++b)
      if (!mask_allows(bi, b)) p.sum[b] = p.max[b] = 0.0;
  }

  // Rows whose unmasked profile depends only on their raw ladder block.
  int memo_key(std::size_t i) const {
    if (raw_->kind != Storage::block_constant) return -1;
    if (perm_ && (*perm_)[i] != i) return -1;
    const std::size_t rp = raw_index(i);
    if (rp == 0) return 7;
    if (raw_->row_overridden(rp)) return -1;
    return block_of(rp);
  }

  std::shared_ptr<const detail::RawPattern> raw_;
  std::size_t dim_ = 0;
  std::size_t shift_ = 0;
  std::shared_ptr<const std::vector<std::uint32_t>> perm_;
  std::shared_ptr<const std::vector<std::uint32_t>> touched_;
  std::shared_ptr<const std::vector<std::uint8_t>> mask_;
  bool normalized_ = false;
  std::string id_;
};

// ---------------------------------------------------------------------------
// constants

struct PatternConstant {
  double C = 0.0;
  double rowNormMax = 0.0;
  double logTermMax = 0.0;
  std::vector<std::uint32_t> sigma;  // sigma[k-1] = row placed k-th (1-based rows)
};

namespace detail {

// Row maxima b_{i(1)} = sqrt(max_j b^2_ij) and row norms, in one pass.
inline void row_stats(const Pattern& p, std::vector<double>& rowmax, std::vector<double>& rownorm2) {
  const auto prof = p.all_row_profiles();
  rowmax.assign(p.dim() + 1, 0.0);
  rownorm2.assign(p.dim() + 1, 0.0);
  for (std::size_t i = 1; i <= p.dim(); ++i) {
    CompensatedSum s;
    double m = 0.0;
    for (std::size_t b = 0; b < prof[i].sum.size(); ++b) {
      s += prof[i].sum[b];
      m = std::max(m, prof[i].max[b]);
    }
    rownorm2[i] = s.value();
    rowmax[i] = std::sqrt(m);
  }
}

inline std::vector<std::uint32_t> sort_by_row_max(const std::vector<double>& rowmax, std::size_t dim) {
  std::vector<std::uint32_t> sigma(dim);
  std::iota(sigma.begin(), sigma.end(), 1u);
  std::stable_sort(sigma.begin(), sigma.end(), [&](std::uint32_t a, std::uint32_t b) { return rowmax[a] > rowmax[b]; });
  return sigma;
}

template <class LogFn>
PatternConstant constant_with_log(const Pattern& p, LogFn logf) {
  std::vector<double> rowmax, rownorm2;
  row_stats(p, rowmax, rownorm2);
  PatternConstant c;
  for (std::size_t i = 1; i <= p.dim(); ++i) c.rowNormMax = std::max(c.rowNormMax, std::sqrt(rownorm2[i]));
  c.sigma = sort_by_row_max(rowmax, p.dim());
  for (std::size_t k = 1; k <= p.dim(); ++k)
    c.logTermMax = std::max(c.logTermMax, std::sqrt(logf(static_cast<double>(k + 1))) * rowmax[c.sigma[k - 1]]);
  c.C = std::max(c.rowNormMax, c.logTermMax);
  return c;
}

}  // namespace detail

// C = max(max_i sqrt(sum_j b^2_ij), max_i sqrt(log2(i+1)) b_{sigma(i)(1)}).
inline PatternConstant compute_C(const Pattern& p) {
  return detail::constant_with_log(p, [](double x) { return std::log2(x); });
}

// ---------------------------------------------------------------------------
// normalization and the standing assumption

inline bool is_normalized_shape(const Pattern& p) { return d0_for(p.dim()).has_value() && p.first_row_zero(); }

// Embeds into the smallest l_{d0+1}-1 (d0 >= 1) with a zero first row; entries move to 2..d+1 only when row 1 is nonzero.
inline Pattern normalize(const Pattern& p) {
  if (is_normalized_shape(p)) return p.with_normalized_flag(true);
  const bool needs_shift = !p.first_row_zero();
  const std::size_t need = p.dim() + (needs_shift ? 1 : 0);
  int d0 = 1;
  while (dim_for(d0) < need) {
    ++d0;
    if (d0 > 3) throw PatternError("normalize: dimension too large for the ladder (max 65535)");
  }
  return p.embedded(dim_for(d0), needs_shift ? 1 : 0).with_normalized_flag(true);
}

struct AssumptionReport {
  bool pass = true;
  std::string violation;
  int i1 = 0, i2 = 0;
  double observed = 0.0, allowed = 0.0;
};

inline constexpr double kBoundSlack = 1e-12;

inline bool within(double observed, double allowed) { return observed <= allowed * (1.0 + kBoundSlack) + 1e-300; }

// Block-pair decay bounds, rows in block 0 zero, row sums <= C^2.
inline AssumptionReport check_assumption(const Pattern& p, double C) {
  AssumptionReport rep;
  auto fail = [&](std::string what, int a, int b, double obs, double allowed) {
    rep.pass = false;
    rep.violation = std::move(what);
    rep.i1 = a;
    rep.i2 = b;
    rep.observed = obs;
    rep.allowed = allowed;
    return rep;
  };
  if (!d0_for(p.dim())) return fail("dimension is not of the form l_{d0+1}-1", 0, 0, static_cast<double>(p.dim()), 0.0);
  const double C2 = C * C;
  const int L = p.max_block();
  const auto prof = p.all_row_profiles();
  std::vector<double> bpm(static_cast<std::size_t>(L + 1) * (L + 1), 0.0);
  for (std::size_t i = 1; i <= p.dim(); ++i) {
    const int bi = block_of(i);
    CompensatedSum s;
    for (int b = 0; b <= L; ++b) {
      s += prof[i].sum[b];
      double& cell = bpm[static_cast<std::size_t>(bi) * (L + 1) + b];
      cell = std::max(cell, prof[i].max[b]);
    }
    if (i == 1 && s.value() != 0.0) return fail("first row is not zero", 0, 0, s.value(), 0.0);
    if (!within(s.value(), C2)) return fail("row sum exceeds C^2 at row " + std::to_string(i), bi, bi, s.value(), C2);
  }
  for (int a = 1; a <= L; ++a)
    for (int b = a; b <= L; ++b) {
      const double obs = bpm[static_cast<std::size_t>(a) * (L + 1) + b];
      if (a <= b - 3) {
        const double s = static_cast<double>(block_size(a));
        const double allowed = C2 / (s * s);
        if (!within(obs, allowed)) return fail("far block bound C^2/|S_i1|^2", a, b, obs, allowed);
      }
      const double allowed = 2.0 * C2 / std::ldexp(1.0, a);
      if (!within(obs, allowed)) return fail("near block bound 2C^2/2^i1", a, b, obs, allowed);
    }
  return rep;
}

}  // namespace chaincraft
