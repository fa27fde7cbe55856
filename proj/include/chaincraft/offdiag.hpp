// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "chaincraft/chain.hpp"
#include "chaincraft/diagonal.hpp"
#include "chaincraft/metrics.hpp"
#include "chaincraft/pattern.hpp"
#include "chaincraft/point.hpp"

namespace chaincraft {

inline constexpr double kOffdiagFactor = 175.0;

// Parameters of a member of A_{0,h}: the quantized prefix z (as integers over 2^h), the indices of
// supp(t) that meet the row threshold, and the integer entries with their signs.
struct A0Certificate {
  int h = 0;
  double C = 0.0;
  const Pattern* part = nullptr;
  std::vector<std::pair<std::uint32_t, std::uint64_t>> z;
  std::vector<std::uint32_t> I;
  std::vector<std::pair<std::uint32_t, std::uint64_t>> x;
  std::vector<std::int8_t> sign;
};

struct OffdiagWitness {
  Point point;
  A0Certificate cert;
};

namespace detail {

inline std::size_t prefix_limit(std::size_t d, int h) {
  if (h >= 32) return d;
  return std::min<std::size_t>(d, std::size_t{1} << h);
}

// sum_j b^2_ij z_j^2 over the prefix.
inline double prefix_row_mass(const Pattern& part, std::size_t i, const std::vector<std::pair<std::uint32_t, std::uint64_t>>& z,
                              int h, std::vector<std::uint32_t>& idx, std::vector<Span>& runs, std::vector<double>& row) {
  idx.clear();
  for (const auto& e : z) idx.push_back(e.first);
  row_on(part, i, idx, 0, runs, row);
  CompensatedSum s;
  for (std::size_t a = 0; a < z.size(); ++a)
    if (row[a] != 0.0) s += row[a] * std::ldexp(static_cast<double>(z[a].second), -h);
  return s.value();
}

inline bool meets_threshold(double mass, double C, int h) { return mass >= std::ldexp(C * C, -h); }

}  // namespace detail

inline std::vector<std::pair<std::uint32_t, std::uint64_t>> offdiag_prefix(const Point& t, int h) {
  std::vector<std::pair<std::uint32_t, std::uint64_t>> z;
  const std::size_t lim = detail::prefix_limit(t.dim, h);
  for (const auto& [j, v] : t.nz) {
    if (j < 2) continue;
    if (j > lim) break;
    const std::uint64_t x = quantized_count(v, h);
    if (x > 0) z.emplace_back(j, x);
  }
  return z;
}

// I_h(z) over all rows 1..d. Used for the size property; witnesses only consult supp(t).
inline std::vector<std::uint32_t> offdiag_index_set(const Pattern& part, double C, const Point& t, int h) {
  if (h < 1) throw std::invalid_argument("offdiag_index_set: h must be >= 1");
  const auto z = offdiag_prefix(t, h);
  std::vector<std::uint32_t> out, idx;
  std::vector<Span> runs;
  std::vector<double> row;
  for (std::size_t i = 1; i <= part.dim(); ++i)
    if (detail::meets_threshold(detail::prefix_row_mass(part, i, z, h, idx, runs, row), C, h))
      out.push_back(static_cast<std::uint32_t>(i));
  return out;
}

inline OffdiagWitness witness_offdiag(const Pattern& part, double C, const Point& t, int h) {
  if (t.dim != part.dim()) throw std::invalid_argument("witness_offdiag: dimension mismatch");
  if (h < 0 || h > 62) throw std::out_of_range("witness_offdiag: h must be in [0,62]");
  OffdiagWitness w;
  w.point = Point(t.dim);
  w.cert.h = h;
  w.cert.C = C;
  w.cert.part = &part;
  if (h == 0) return w;
  w.cert.z = offdiag_prefix(t, h);
  std::vector<std::uint32_t> idx;
  std::vector<Span> runs;
  std::vector<double> row;
  for (const auto& [i, v] : t.nz) {
    if (i < 2) continue;
    if (!detail::meets_threshold(detail::prefix_row_mass(part, i, w.cert.z, h, idx, runs, row), C, h)) continue;
    w.cert.I.push_back(i);
    const std::uint64_t x = quantized_count(v, h);
    if (x == 0) continue;
    w.cert.x.emplace_back(i, x);
    w.cert.sign.push_back(sign_of(v));
    w.point.nz.emplace_back(i, dyadic_entry(sign_of(v), x, h));
  }
  return w;
}

struct MembershipCheck {
  bool ok = true;
  std::string failure;
};

inline MembershipCheck membership_fail(std::string what) { return {false, std::move(what)}; }

namespace detail {

inline MembershipCheck check_entries(const Point& w, const std::vector<std::pair<std::uint32_t, std::uint64_t>>& x,
                                     const std::vector<std::int8_t>& sign, int h, std::size_t index_offset = 0) {
  if (x.size() != sign.size()) return membership_fail("entry form: sign list length mismatch");
  std::size_t k = 0;
  for (const auto& [j, v] : w.nz) {
    const std::size_t local = j - index_offset;
    while (k < x.size() && x[k].first < local) {
      if (x[k].second != 0) return membership_fail("entry form: missing entry at " + std::to_string(x[k].first));
      ++k;
    }
    if (k == x.size() || x[k].first != local)
      return membership_fail("entry form: coordinate " + std::to_string(j) + " has no certified integer");
    if (sign[k] != 1 && sign[k] != -1) return membership_fail("entry form: sign must be +-1");
    if (v != dyadic_entry(sign[k], x[k].second, h))
      return membership_fail("entry form: coordinate " + std::to_string(j) + " is not sign*sqrt(x/2^h)");
    ++k;
  }
  for (; k < x.size(); ++k)
    if (x[k].second != 0) return membership_fail("entry form: missing entry at " + std::to_string(x[k].first));
  return {};
}

inline bool sum_at_most(const std::vector<std::pair<std::uint32_t, std::uint64_t>>& x, std::uint64_t cap) {
  std::uint64_t s = 0;
  for (const auto& e : x) {
    if (e.second > cap - s) return false;
    s += e.second;
  }
  return true;
}

inline bool strictly_increasing(const std::vector<std::pair<std::uint32_t, std::uint64_t>>& x) {
  for (std::size_t k = 1; k < x.size(); ++k)
    if (x[k].first <= x[k - 1].first) return false;
  return true;
}

}  // namespace detail

inline MembershipCheck verify_membership(const Point& w, const A0Certificate& c) {
  if (c.h == 0) return w.nz.empty() ? MembershipCheck{} : membership_fail("A0: level 0 holds only the zero vector");
  if (!c.part) return membership_fail("A0: certificate has no pattern");
  const std::uint64_t cap = std::uint64_t{1} << c.h;
  const std::size_t lim = detail::prefix_limit(c.part->dim(), c.h);
  if (!detail::strictly_increasing(c.z)) return membership_fail("A0: prefix indices not increasing");
  for (const auto& e : c.z)
    if (e.first < 2 || e.first > lim) return membership_fail("A0: prefix index outside 2..min(d,2^h)");
  if (!detail::sum_at_most(c.z, cap)) return membership_fail("A0 budget: prefix integers sum above 2^h");
  if (!detail::sum_at_most(c.x, cap)) return membership_fail("A0 budget: entry integers sum above 2^h");
  if (!detail::strictly_increasing(c.x)) return membership_fail("A0: entry indices not increasing");
  std::vector<std::uint32_t> idx;
  std::vector<Span> runs;
  std::vector<double> row;
  for (std::uint32_t i : c.I)
    if (!detail::meets_threshold(detail::prefix_row_mass(*c.part, i, c.z, c.h, idx, runs, row), c.C, c.h))
      return membership_fail("A0 index set: row " + std::to_string(i) + " is below C^2/2^h");
  for (const auto& e : c.x)
    if (e.first < 2 || !std::binary_search(c.I.begin(), c.I.end(), e.first))
      return membership_fail("A0 index set: entry " + std::to_string(e.first) + " outside I_h(z)");
  return detail::check_entries(w, c.x, c.sign, c.h);
}

// sum_h 2^h d~_{2,B0}(t, A_{0,max(h-3,0)} witness)^2 against 175 C^2.
inline ChainReport series_offdiag(const Pattern& part, double C, const Point& t, int h_max = kDefaultHMax,
                                  bool verify = true) {
  if (std::fabs(t.norm() - 1.0) > 1e-10) throw std::invalid_argument("series_offdiag: t must be a unit vector");
  ChainReport rep;
  rep.name = "offdiag";
  rep.bound = kOffdiagFactor * C * C;
  TildeFromPoint tilde(part, t);
  std::map<int, double> memo;
  SeriesAccumulator acc;
  for (int h = 0; h <= h_max; ++h) {
    const int k = std::max(h - 3, 0);
    auto it = memo.find(k);
    if (it == memo.end()) {
      OffdiagWitness w = witness_offdiag(part, C, t, k);
      if (!dominated_loose(w.point, t)) rep.dominance_ok = false;
      if (verify) {
        const auto chk = verify_membership(w.point, w.cert);
        if (!chk.ok && rep.membership_ok) {
          rep.membership_ok = false;
          rep.failure = chk.failure;
        }
      }
      it = memo.emplace(k, tilde.sq(w.point)).first;
    }
    acc.add(rep, h, k, it->second);
    if (acc.done()) break;
  }
  rep.series = acc.value();
  rep.tail_bound = rep.levels.empty() ? 0.0 : 2.0 * rep.levels.back().term;
  rep.pass = within(rep.series, rep.bound) && rep.dominance_ok && rep.membership_ok;
  return rep;
}

}  // namespace chaincraft
