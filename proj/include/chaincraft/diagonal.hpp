// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "chaincraft/dyadics.hpp"
#include "chaincraft/ladder.hpp"
#include "chaincraft/metrics.hpp"
#include "chaincraft/point.hpp"
#include "chaincraft/sum.hpp"

namespace chaincraft {

inline constexpr double kDiagonalSeriesBound = 27.0;
inline constexpr int kDefaultHMax = 48;

struct DiagonalWitness {
  int h = 0;
  int h0 = 0;
  Point point;
  std::vector<std::uint64_t> x;  // x[k] is x_{k+2}, over 2..l_{h0}-1
  double first = 0.0;             // completing first coordinate (lifted levels only)
};

// Level-h member of the quantized family: x_j = floor(2^{h-i} t_j^2) for j in S_i, i <= h0 = min(h, d0+1),
// entry sqrt(x_j / 2^{h-i}). Coordinates are nonnegative.
inline DiagonalWitness diagonal_witness(const Point& t, int h, int d0) {
  if (h < 1) throw std::invalid_argument("diagonal_witness: h must be >= 1");
  if (t.dim != dim_for(d0)) throw std::invalid_argument("diagonal_witness: dimension is not l_{d0+1}-1");
  DiagonalWitness w;
  w.h = h;
  w.h0 = std::min(h, d0 + 1);
  w.point = Point(t.dim);
  w.x.assign(static_cast<std::size_t>(ladder_u64(w.h0)) - 2, 0);
  for (const auto& [j, v] : t.nz) {
    if (j < 2) continue;
    const int i = block_of(j);
    if (i > w.h0) break;
    const double q = std::floor(std::ldexp(v * v, h - i));
    if (q == 0.0) continue;
    w.x[j - 2] = static_cast<std::uint64_t>(q);
    w.point.nz.emplace_back(j, std::sqrt(std::ldexp(q, -(h - i))));
  }
  return w;
}

inline bool diagonal_membership_ok(const DiagonalWitness& w) {
  return in_T(w.h0, std::uint64_t{1} << (w.h - w.h0), w.x);
}

// Witness for the level-h set: e_1 for h <= 2, otherwise the level h-2 member with norm-completing first coordinate.
inline DiagonalWitness diagonal_level_witness(const Point& t, int h, int d0) {
  if (h <= 2) {
    DiagonalWitness w;
    w.h = h;
    w.point = Point::unit(t.dim, 1);
    w.first = 1.0;
    return w;
  }
  DiagonalWitness w = diagonal_witness(t, h - 2, d0);
  const double rest = w.point.norm2();
  w.first = std::sqrt(std::max(0.0, 1.0 - rest));
  if (w.first != 0.0) w.point.nz.insert(w.point.nz.begin(), {1u, w.first});
  w.h = h;
  return w;
}

// Explicit level set for enumerable levels.
inline std::vector<Point> diagonal_build_level(int h, int d0) {
  const std::size_t d = dim_for(d0);
  if (h <= 2) return {Point::unit(d, 1)};
  const int hb = h - 2;
  const int h0 = std::min(hb, d0 + 1);
  const std::uint64_t p = std::uint64_t{1} << (hb - h0);
  if (h0 > 3 || p > 64 || count_T(h0, p) > 1000000)
    throw std::length_error("diagonal_build_level: level too large to enumerate; use witness-based evaluation");
  std::vector<Point> out;
  for (const auto& x : enumerate_T(h0, p)) {
    Point pt(d);
    CompensatedSum s;
    std::vector<Point::Entry> tail;
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (x[k] == 0) continue;
      const std::size_t j = k + 2;
      const double e = std::sqrt(std::ldexp(static_cast<double>(x[k]), -(hb - block_of(j))));
      tail.emplace_back(static_cast<std::uint32_t>(j), e);
      s += e * e;
    }
    const double y = std::sqrt(std::max(0.0, 1.0 - s.value()));
    if (y != 0.0) pt.nz.emplace_back(1u, y);
    pt.nz.insert(pt.nz.end(), tail.begin(), tail.end());
    out.push_back(std::move(pt));
  }
  return out;
}

struct LevelTerm {
  int h = 0;
  double distance_sq = 0.0;
  double term = 0.0;  // 2^h * distance^2
};

struct DiagonalReport {
  std::vector<LevelTerm> levels;
  double series = 0.0;
  double tail_bound = 0.0;
  double bound = kDiagonalSeriesBound;
  bool pass = false;
  bool membership_ok = true;
  bool dominance_ok = true;
};

// Hook for tests of failure paths: receives each level witness and may alter it.
using WitnessTamper = std::function<void(int h, Point&)>;

// sum_h 2^h d_2(t, A_h)^2 over the level witnesses, stopping at h_max or after 4 consecutive terms < 1e-14.
inline DiagonalReport diagonal_series(const Point& t, int d0, int h_max = kDefaultHMax, const WitnessTamper& tamper = {}) {
  if (std::fabs(t.norm() - 1.0) > 1e-10) throw std::invalid_argument("diagonal_series: t must be a unit vector");
  DiagonalReport rep;
  CompensatedSum total;
  int small = 0;
  int last = 0;
  for (int h = 0; h <= h_max; ++h) {
    DiagonalWitness w = diagonal_level_witness(t, h, d0);
    if (h >= 3) {
      rep.membership_ok = rep.membership_ok && diagonal_membership_ok(w);
      for (const auto& [j, v] : w.point.nz)
        if (j >= 2 && std::fabs(v) > std::fabs(t.at(j))) rep.dominance_ok = false;
    }
    if (tamper) tamper(h, w.point);
    LevelTerm lt{h, dist_d2_sq(t, w.point, d0), 0.0};
    lt.term = std::ldexp(lt.distance_sq, h);
    total += lt.term;
    rep.levels.push_back(lt);
    last = h;
    if (h >= 3) {
      small = lt.term < 1e-14 ? small + 1 : 0;
      if (small >= 4) break;
    }
  }
  rep.series = total.value();
  rep.tail_bound = std::ldexp(static_cast<double>(t.dim + 3), -last);
  rep.pass = rep.series <= rep.bound && rep.membership_ok && rep.dominance_ok;
  return rep;
}

// ---------------------------------------------------------------------------
// scalar quantization inequalities, truncated at k_max

// sum_k 2^k (x - floor(2^k x)/2^k)^2, at most 4x.
inline double floor_series(double x, int k_max) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("floor_series: x must be in [0,1]");
  CompensatedSum s;
  for (int k = 0; k <= k_max; ++k) {
    const double r = x - std::ldexp(std::floor(std::ldexp(x, k)), -k);
    s += std::ldexp(r * r, k);
  }
  return s.value();
}

// sum_k 2^k (sqrt x - sqrt(floor(2^k x)/2^k))^2, at most 4.
inline double sqrt_floor_series(double x, int k_max) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("sqrt_floor_series: x must be in [0,1]");
  CompensatedSum s;
  const double sx = std::sqrt(x);
  for (int k = 0; k <= k_max; ++k) {
    const double r = sx - std::sqrt(std::ldexp(std::floor(std::ldexp(x, k)), -k));
    s += std::ldexp(r * r, k);
  }
  return s.value();
}

// floor_series(x) / x, the intermediate form bounding sqrt_floor_series.
inline double floor_series_over_x(double x, int k_max) { return x == 0.0 ? 0.0 : floor_series(x, k_max) / x; }

// sum_h x 2^h exp(-x 2^h), below 2 + 20/7.
inline double exp_series(double x, int k_max) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("exp_series: x must be in [0,1]");
  CompensatedSum s;
  for (int k = 0; k <= k_max; ++k) {
    const double y = std::ldexp(x, k);
    s += y * std::exp(-y);
  }
  return s.value();
}

}  // namespace chaincraft
