// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "chaincraft/ladder.hpp"
#include "chaincraft/pattern.hpp"
#include "chaincraft/point.hpp"
#include "chaincraft/sum.hpp"

namespace chaincraft {

namespace detail {

inline std::vector<std::uint32_t> union_support(const Point& x, const Point& y) {
  std::vector<std::uint32_t> u;
  u.reserve(x.nz.size() + y.nz.size());
  std::size_t a = 0, b = 0;
  while (a < x.nz.size() || b < y.nz.size()) {
    if (b == y.nz.size() || (a < x.nz.size() && x.nz[a].first < y.nz[b].first)) {
      u.push_back(x.nz[a++].first);
    } else if (a == x.nz.size() || y.nz[b].first < x.nz[a].first) {
      u.push_back(y.nz[b++].first);
    } else {
      u.push_back(x.nz[a].first);
      ++a;
      ++b;
    }
  }
  return u;
}

// Values of a point on a sorted index list.
inline std::vector<double> gather(const Point& x, const std::vector<std::uint32_t>& idx) {
  std::vector<double> out(idx.size(), 0.0);
  std::size_t k = 0;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    while (k < x.nz.size() && x.nz[k].first < idx[a]) ++k;
    if (k < x.nz.size() && x.nz[k].first == idx[a]) out[a] = x.nz[k].second;
  }
  return out;
}

// Row i of p evaluated on the sorted index list idx (from position `from`).
inline void row_on(const Pattern& p, std::size_t i, const std::vector<std::uint32_t>& idx, std::size_t from,
                   std::vector<Span>& runs, std::vector<double>& out) {
  out.assign(idx.size(), 0.0);
  p.row_runs(i, runs);
  std::size_t r = 0;
  for (std::size_t b = from; b < idx.size(); ++b) {
    while (r < runs.size() && runs[r].hi < idx[b]) ++r;
    if (r == runs.size()) break;
    if (runs[r].lo <= idx[b]) out[b] = runs[r].value;
  }
}

}  // namespace detail

// Canonical metric of the quadratic process: sqrt(sum_i b_ii (x_i^2-y_i^2)^2 + 4 sum_{i<j} b_ij (x_i x_j - y_i y_j)^2).
inline double dist_sq(const Pattern& p, const Point& x, const Point& y) {
  require_same_dim(x, y);
  if (x.dim != p.dim()) throw std::invalid_argument("dimension mismatch between point and pattern");
  const auto u = detail::union_support(x, y);
  const auto xv = detail::gather(x, u), yv = detail::gather(y, u);
  CompensatedSum s;
  if (p.storage() == Storage::diagonal_rule && !p.has_permutation()) {
    for (std::size_t a = 0; a < u.size(); ++a) {
      const double diff = xv[a] * xv[a] - yv[a] * yv[a];
      s += p(u[a], u[a]) * diff * diff;
    }
    return std::max(0.0, s.value());
  }
  std::vector<Span> runs;
  std::vector<double> row;
  for (std::size_t a = 0; a < u.size(); ++a) {
    detail::row_on(p, u[a], u, a, runs, row);
    for (std::size_t b = a; b < u.size(); ++b) {
      if (row[b] == 0.0) continue;
      if (b == a) {
        const double diff = xv[a] * xv[a] - yv[a] * yv[a];
        s += row[b] * diff * diff;
      } else {
        const double diff = xv[a] * xv[b] - yv[a] * yv[b];
        s += 4.0 * row[b] * diff * diff;
      }
    }
  }
  return std::max(0.0, s.value());
}

inline double dist(const Pattern& p, const Point& x, const Point& y) { return std::sqrt(dist_sq(p, x, y)); }

// Diagonal comparison metric: group i covers [l_i, l_{i+1}) with weight 2^{-i}.
inline double dist_d2_sq(const Point& x, const Point& y, int d0) {
  require_same_dim(x, y);
  if (x.dim != dim_for(d0)) throw std::invalid_argument("dist_d2: dimension is not l_{d0+1}-1");
  const auto u = detail::union_support(x, y);
  const auto xv = detail::gather(x, u), yv = detail::gather(y, u);
  CompensatedSum s;
  for (std::size_t a = 0; a < u.size(); ++a) {
    if (u[a] < 2) continue;
    const int group = block_of(u[a]) - 1;
    const double diff = xv[a] * xv[a] - yv[a] * yv[a];
    s += std::ldexp(diff * diff, -group);
  }
  return s.value();
}

inline double dist_d2(const Point& x, const Point& y, int d0) { return std::sqrt(dist_d2_sq(x, y, d0)); }

// v_M(t, j) = sum_i M_ij t_i^2 for a fixed t; block masses are used when the pattern is block-constant.
class WeightFunction {
 public:
  WeightFunction(const Pattern& m, const Point& t) : m_(&m), t_(&t) {
    if (t.dim != m.dim()) throw std::invalid_argument("dimension mismatch between point and pattern");
    for (const auto& e : t.nz) idx_.push_back(e.first);
    if (m.block_mass_fast_path()) {
      fast_ = true;
      const int L = m.max_block();
      std::vector<CompensatedSum> acc(L + 1);
      for (const auto& [j, v] : t.nz) acc[block_of(j)] += v * v;
      mass_.resize(L + 1);
      for (int b = 0; b <= L; ++b) mass_[b] = acc[b].value();
    }
  }

  double operator()(std::size_t j) const {
    if (fast_) {
      const int bj = block_of(j);
      CompensatedSum s;
      for (std::size_t b = 1; b < mass_.size(); ++b) s += m_->block_value(static_cast<int>(b), bj) * mass_[b];
      return s.value();
    }
    detail::row_on(*m_, j, idx_, 0, runs_, row_);
    CompensatedSum s;
    for (std::size_t a = 0; a < idx_.size(); ++a)
      if (row_[a] != 0.0) s += row_[a] * t_->nz[a].second * t_->nz[a].second;
    return s.value();
  }

 private:
  const Pattern* m_;
  const Point* t_;
  std::vector<std::uint32_t> idx_;
  bool fast_ = false;
  std::vector<double> mass_;
  mutable std::vector<Span> runs_;
  mutable std::vector<double> row_;
};

inline double weight_v(const Pattern& m, const Point& t, std::size_t j) {
  if (j < 1 || j > m.dim()) throw std::out_of_range("weight_v: index out of range");
  return WeightFunction(m, t)(j);
}

// sum_j v_M(x,j) (x_j - y_j)^2; asymmetric by construction.
inline double dist_tilde2_sq(const Pattern& m, const Point& x, const Point& y) {
  require_same_dim(x, y);
  WeightFunction v(m, x);
  const auto u = detail::union_support(x, y);
  const auto xv = detail::gather(x, u), yv = detail::gather(y, u);
  CompensatedSum s;
  for (std::size_t a = 0; a < u.size(); ++a) {
    const double diff = xv[a] - yv[a];
    if (diff != 0.0) s += v(u[a]) * diff * diff;
  }
  return s.value();
}

inline double dist_tilde2(const Pattern& m, const Point& x, const Point& y) { return std::sqrt(dist_tilde2_sq(m, x, y)); }

// d~_{2,M}(t, .)^2 for a fixed t, with v_M(t, .) cached on supp(t).
class TildeFromPoint {
 public:
  TildeFromPoint(const Pattern& m, const Point& t) : v_(m, t), t_(t) {
    cached_.reserve(t.nz.size());
    for (const auto& e : t.nz) cached_.push_back(v_(e.first));
  }

  double v_on_support(std::size_t k) const { return cached_[k]; }
  const Point& base() const { return t_; }

  double sq(const Point& y) const {
    require_same_dim(t_, y);
    CompensatedSum s;
    std::size_t b = 0;
    for (std::size_t a = 0; a < t_.nz.size(); ++a) {
      const std::uint32_t j = t_.nz[a].first;
      while (b < y.nz.size() && y.nz[b].first < j) {
        s += v_(y.nz[b].first) * y.nz[b].second * y.nz[b].second;
        ++b;
      }
      double yj = 0.0;
      if (b < y.nz.size() && y.nz[b].first == j) yj = y.nz[b++].second;
      const double diff = t_.nz[a].second - yj;
      if (diff != 0.0) s += cached_[a] * diff * diff;
    }
    for (; b < y.nz.size(); ++b) s += v_(y.nz[b].first) * y.nz[b].second * y.nz[b].second;
    return s.value();
  }

 private:
  WeightFunction v_;
  const Point& t_;
  std::vector<double> cached_;
};

struct SetDistance {
  double value = 0.0;
  std::size_t argmin = 0;
};

inline SetDistance dist_to_set(const std::function<double(const Point&, const Point&)>& metric, const Point& t,
                               const std::vector<Point>& A) {
  if (A.empty()) throw std::invalid_argument("dist_to_set: empty set");
  if (A.size() > 1000000) throw std::length_error("dist_to_set: more than 10^6 candidates");
  SetDistance best{metric(t, A[0]), 0};
  for (std::size_t k = 1; k < A.size(); ++k) {
    const double v = metric(t, A[k]);
    if (v < best.value) best = {v, k};
  }
  return best;
}

// that_j t_j >= 0 and |that_j| <= |t_j| for j >= 2.
inline bool dominated_by(const Point& that, const Point& t) {
  for (const auto& [j, v] : that.nz) {
    if (j < 2) continue;
    const double tj = t.at(j);
    if (v * tj < 0.0 || std::fabs(v) > std::fabs(tj)) return false;
  }
  return true;
}

}  // namespace chaincraft
