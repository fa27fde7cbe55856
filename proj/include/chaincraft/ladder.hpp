// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace chaincraft {

// l_h = 2^(2^h) for 0 <= h <= 5; l_6 overflows 64 bits.
constexpr std::uint64_t ladder_u64(int h) {
  if (h < 0 || h > 5) throw std::out_of_range("ladder_u64: h must be in [0,5]");
  return std::uint64_t{1} << (std::uint64_t{1} << h);
}

// Half-open integer range [lo, hi).
struct IndexRange {
  std::size_t lo = 0;
  std::size_t hi = 0;
  std::size_t size() const { return hi > lo ? hi - lo : 0; }
  bool contains(std::size_t j) const { return j >= lo && j < hi; }
};

// S_n = [l_{n-1}, l_n); S_1 = {2,3}.
inline IndexRange block_set(int n) {
  if (n < 1 || n > 5) throw std::out_of_range("block_set: n must be in [1,5]");
  return {static_cast<std::size_t>(ladder_u64(n - 1)), static_cast<std::size_t>(ladder_u64(n))};
}

inline std::size_t block_size(int n) { return block_set(n).size(); }

// Ladder block containing coordinate j (1-based); coordinate 1 sits in block 0.
inline int block_of(std::size_t j) {
  if (j < 2) return 0;
  int n = 1;
  while (static_cast<std::uint64_t>(j) >= ladder_u64(n)) ++n;
  return n;
}

// S_n clipped to coordinates 1..dim.
inline IndexRange block_in_dim(int n, std::size_t dim) {
  if (n == 0) return {1, dim >= 1 ? std::size_t{2} : std::size_t{1}};
  IndexRange r = block_set(n);
  if (r.lo > dim + 1) r.lo = dim + 1;
  if (r.hi > dim + 1) r.hi = dim + 1;
  return r;
}

// Normalized dimension l_{d0+1} - 1.
inline std::size_t dim_for(int d0) {
  if (d0 < 1 || d0 > 4) throw std::out_of_range("dim_for: d0 must be in [1,4]");
  return static_cast<std::size_t>(ladder_u64(d0 + 1) - 1);
}

inline std::optional<int> d0_for(std::size_t dim) {
  for (int d0 = 1; d0 <= 4; ++d0)
    if (dim_for(d0) == dim) return d0;
  return std::nullopt;
}

inline int require_d0(std::size_t dim) {
  auto d0 = d0_for(dim);
  if (!d0) throw std::invalid_argument("dimension " + std::to_string(dim) + " is not of the form l_{d0+1}-1");
  return *d0;
}

}  // namespace chaincraft
