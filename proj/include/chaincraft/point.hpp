// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "chaincraft/sum.hpp"

namespace chaincraft {

// Sparse point in R^dim, coordinates 1-based, entries sorted by index, no stored zeros.
struct Point {
  using Entry = std::pair<std::uint32_t, double>;

  std::size_t dim = 0;
  std::vector<Entry> nz;

  Point() = default;
  explicit Point(std::size_t d) : dim(d) {}

  static Point unit(std::size_t d, std::size_t j) {
    if (j < 1 || j > d) throw std::out_of_range("Point::unit: index out of range");
    Point p(d);
    p.nz.emplace_back(static_cast<std::uint32_t>(j), 1.0);
    return p;
  }

  // coords[k] is coordinate k+1.
  static Point from_dense(const std::vector<double>& coords) {
    Point p(coords.size());
    for (std::size_t k = 0; k < coords.size(); ++k) {
      if (!std::isfinite(coords[k])) throw std::invalid_argument("Point: non-finite coordinate");
      if (coords[k] != 0.0) p.nz.emplace_back(static_cast<std::uint32_t>(k + 1), coords[k]);
    }
    return p;
  }

  // Builds from unsorted (index, value) pairs; duplicate indices are rejected.
  static Point from_entries(std::size_t d, std::vector<Entry> entries) {
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.first < b.first; });
    Point p(d);
    for (std::size_t k = 0; k < entries.size(); ++k) {
      if (entries[k].first < 1 || entries[k].first > d) throw std::out_of_range("Point: index out of range");
      if (k > 0 && entries[k].first == entries[k - 1].first) throw std::invalid_argument("Point: duplicate index");
      if (entries[k].second != 0.0) p.nz.push_back(entries[k]);
    }
    return p;
  }

  std::vector<double> to_dense() const {
    std::vector<double> out(dim, 0.0);
    for (const auto& [j, v] : nz) out[j - 1] = v;
    return out;
  }

  double at(std::size_t j) const {
    auto it = std::lower_bound(nz.begin(), nz.end(), j, [](const Entry& e, std::size_t k) { return e.first < k; });
    return (it != nz.end() && it->first == j) ? it->second : 0.0;
  }

  double norm2() const {
    CompensatedSum s;
    for (const auto& e : nz) s += e.second * e.second;
    return s.value();
  }
  double norm() const { return std::sqrt(norm2()); }

  // Sum of squares over coordinates >= 2.
  double tail_norm2() const {
    CompensatedSum s;
    for (const auto& e : nz)
      if (e.first >= 2) s += e.second * e.second;
    return s.value();
  }

  void set(std::size_t j, double v) {
    auto it = std::lower_bound(nz.begin(), nz.end(), j, [](const Entry& e, std::size_t k) { return e.first < k; });
    if (it != nz.end() && it->first == j) {
      if (v == 0.0)
        nz.erase(it);
      else
        it->second = v;
    } else if (v != 0.0) {
      nz.insert(it, {static_cast<std::uint32_t>(j), v});
    }
  }

  bool operator==(const Point& o) const { return dim == o.dim && nz == o.nz; }
};

inline void require_same_dim(const Point& x, const Point& y) {
  if (x.dim != y.dim) throw std::invalid_argument("dimension mismatch between points");
}

// Random unit vector with dense support on coordinates 2..dim (coordinate 1 left at zero).
template <class Rng>
Point random_unit_tail(std::size_t dim, Rng& rng) {
  std::vector<double> c(dim, 0.0);
  double s = 0.0;
  do {
    s = 0.0;
    for (std::size_t k = 1; k < dim; ++k) {
      c[k] = rng.normal();
      s += c[k] * c[k];
    }
  } while (s == 0.0);
  const double inv = 1.0 / std::sqrt(s);
  for (std::size_t k = 1; k < dim; ++k) c[k] *= inv;
  return Point::from_dense(c);
}

// Random unit vector supported on the given coordinates.
template <class Rng>
Point random_unit_on(std::size_t dim, const std::vector<std::size_t>& support, Rng& rng) {
  std::vector<Point::Entry> e;
  double s = 0.0;
  for (std::size_t j : support) {
    double g = rng.normal();
    e.emplace_back(static_cast<std::uint32_t>(j), g);
    s += g * g;
  }
  const double inv = 1.0 / std::sqrt(s);
  for (auto& kv : e) kv.second *= inv;
  return Point::from_entries(dim, std::move(e));
}

}  // namespace chaincraft
