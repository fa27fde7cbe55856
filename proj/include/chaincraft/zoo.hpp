// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "chaincraft/ladder.hpp"
#include "chaincraft/pattern.hpp"
#include "chaincraft/point.hpp"
#include "chaincraft/rng.hpp"

namespace chaincraft {

// Symmetric band |i-j| <= bw on rows 2..dim with b^2_ij uniform in [0.5, 1] / (2 bw + 1).
inline Pattern banded_pattern(std::size_t dim, std::size_t bw, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<double> v(dim * dim, 0.0);
  const double scale = 1.0 / static_cast<double>(2 * bw + 1);
  for (std::size_t i = 2; i <= dim; ++i)
    for (std::size_t j = i; j <= std::min(dim, i + bw); ++j) {
      const double x = (0.5 + 0.5 * rng.uniform()) * scale;
      v[(i - 1) * dim + (j - 1)] = v[(j - 1) * dim + (i - 1)] = x;
    }
  return Pattern::dense(dim, std::move(v));
}

// Dense symmetric pattern with about 30% zeros, entries up to 1/dim; row 1 kept zero when asked.
inline Pattern random_dense_pattern(std::size_t dim, std::uint64_t seed, bool zero_first_row = true) {
  CounterRng rng(seed);
  std::vector<double> v(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = i; j < dim; ++j) {
      if (zero_first_row && (i == 0 || j == 0)) continue;
      const double x = rng.uniform() < 0.3 ? 0.0 : rng.uniform() / static_cast<double>(dim);
      v[i * dim + j] = v[j * dim + i] = x;
    }
  return Pattern::dense(dim, std::move(v));
}

// d = 65535 block-constant pattern: beta(a,b) = u_ab / (2^max(a,b) |S_max(a,b)|), a nonzero far pair (1,4),
// plus `extra` random overrides between blocks 1..2 and block 4. Overrides stay below every beta(a,4), so row
// maxima keep their block order and sorting by them is the identity.
inline Pattern block_constant_pattern(std::uint64_t seed, int extra = 8) {
  CounterRng rng(seed);
  constexpr int nb = 4;
  std::vector<double> beta(nb * nb, 0.0);
  for (int a = 1; a <= nb; ++a)
    for (int b = a; b <= nb; ++b) {
      const int m = std::max(a, b);
      const double x = (0.5 + 0.5 * rng.uniform()) / (std::ldexp(1.0, m) * static_cast<double>(block_size(m)));
      beta[(a - 1) * nb + (b - 1)] = beta[(b - 1) * nb + (a - 1)] = x;
    }
  std::vector<std::tuple<std::size_t, std::size_t, double>> ov;
  const auto s4 = block_in_dim(4, dim_for(3));
  double floor4 = beta[nb - 1];
  for (int a = 1; a <= nb; ++a) floor4 = std::min(floor4, beta[(a - 1) * nb + (nb - 1)]);
  for (int k = 0; k < extra; ++k) {
    const std::size_t i = 2 + static_cast<std::size_t>(rng.uniform() * 14.0);
    const std::size_t j = s4.lo + static_cast<std::size_t>(rng.uniform() * static_cast<double>(s4.hi - s4.lo));
    ov.emplace_back(i, j, floor4 * (0.25 + 0.5 * rng.uniform()));
  }
  std::sort(ov.begin(), ov.end());
  ov.erase(std::unique(ov.begin(), ov.end(),
                       [](const auto& x, const auto& y) { return std::get<0>(x) == std::get<0>(y) && std::get<1>(x) == std::get<1>(y); }),
           ov.end());
  return Pattern::block_constant(nb, std::move(beta), ov);
}

struct ZooEntry {
  std::string name;
  Pattern pattern;
};

// Fixed seeded zoo used by the end-to-end checks and the Monte-Carlo comparison.
inline std::vector<ZooEntry> pattern_zoo(bool include_large = true) {
  std::vector<ZooEntry> z;
  z.push_back({"easy-15", Pattern::diagonal_rule("inverse-sqrt-log2", 15)});
  z.push_back({"easy-255", Pattern::diagonal_rule("inverse-sqrt-log2", 255)});
  z.push_back({"identity-4", Pattern::diagonal_rule("identity", 4)});
  z.push_back({"zero-15", Pattern::zero(15)});
  z.push_back({"banded-15", banded_pattern(15, 2, 11)});
  z.push_back({"banded-255", banded_pattern(255, 3, 12)});
  z.push_back({"dense-15", random_dense_pattern(15, 13)});
  z.push_back({"dense-60", random_dense_pattern(60, 14)});
  if (include_large) z.push_back({"block-65535", block_constant_pattern(15)});
  return z;
}

// e_2, e_d, uniform on 2..d, geometric decay 2^{-j/2}, then random unit vectors. Above 4096 coordinates the
// uniform and random points use a random support of `sparse` coordinates spread over every ladder block.
inline std::vector<Point> point_battery(std::size_t dim, std::size_t random_count, CounterRng rng,
                                        std::size_t sparse = 48) {
  std::vector<Point> pts;
  pts.push_back(Point::unit(dim, 2));
  pts.push_back(Point::unit(dim, dim));
  const bool dense = dim <= 4096;
  auto sparse_support = [&](CounterRng& r) {
    std::vector<std::size_t> s;
    const int L = block_of(dim);
    const std::size_t per = std::max<std::size_t>(1, sparse / static_cast<std::size_t>(L));
    for (int b = 1; b <= L; ++b) {
      const auto blk = block_in_dim(b, dim);
      const std::size_t len = blk.hi - blk.lo;
      for (std::size_t k = 0; k < std::min(per, len); ++k)
        s.push_back(blk.lo + static_cast<std::size_t>(r.uniform() * static_cast<double>(len)));
    }
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
  };
  {
    std::vector<Point::Entry> e;
    CounterRng r = rng.split(1);
    const auto supp = dense ? std::vector<std::size_t>{} : sparse_support(r);
    const std::size_t n = dense ? dim - 1 : supp.size();
    const double v = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t k = 0; k < n; ++k) e.emplace_back(static_cast<std::uint32_t>(dense ? k + 2 : supp[k]), v);
    pts.push_back(Point::from_entries(dim, std::move(e)));
  }
  {
    std::vector<Point::Entry> e;
    double s = 0.0;
    for (std::size_t j = 2; j <= std::min<std::size_t>(dim, 80); ++j) {
      const double v = std::pow(2.0, -0.5 * static_cast<double>(j - 2));
      e.emplace_back(static_cast<std::uint32_t>(j), v);
      s += v * v;
    }
    for (auto& kv : e) kv.second /= std::sqrt(s);
    pts.push_back(Point::from_entries(dim, std::move(e)));
  }
  for (std::size_t k = 0; k < random_count; ++k) {
    CounterRng r = rng.split(100 + k);
    if (dense)
      pts.push_back(random_unit_tail(dim, r));
    else
      pts.push_back(random_unit_on(dim, sparse_support(r), r));
  }
  return pts;
}

}  // namespace chaincraft
