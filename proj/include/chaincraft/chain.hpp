// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "chaincraft/point.hpp"
#include "chaincraft/sum.hpp"

namespace chaincraft {

// x = floor(2^h t^2), the integer behind a quantized entry.
inline std::uint64_t quantized_count(double t, int h) {
  return static_cast<std::uint64_t>(std::floor(std::ldexp(t * t, h)));
}

// sign * sqrt(x / 2^h); the only entry form emitted by the sampled and off-diagonal families.
inline double dyadic_entry(std::int8_t sign, std::uint64_t x, int h) {
  const double e = std::sqrt(std::ldexp(static_cast<double>(x), -h));
  return sign < 0 ? -e : e;
}

inline std::int8_t sign_of(double v) { return v < 0.0 ? -1 : (v > 0.0 ? 1 : 0); }

// Dominance up to a few ulps: scaled witnesses are products of rounded factors.
inline bool dominated_loose(const Point& that, const Point& t, std::size_t from = 2) {
  for (const auto& [j, v] : that.nz) {
    if (j < from) continue;
    const double tj = t.at(j);
    if (v * tj < 0.0 || std::fabs(v) > std::fabs(tj) * (1.0 + 1e-14)) return false;
  }
  return true;
}

struct ChainLevel {
  int h = 0;
  int source = 0;  // level of the underlying family the witness was taken from
  double distance_sq = 0.0;
  double term = 0.0;
};

struct ChainReport {
  std::string name;
  std::vector<ChainLevel> levels;
  double series = 0.0;
  double bound = 0.0;
  double tail_bound = 0.0;
  bool pass = false;
  bool dominance_ok = true;
  bool membership_ok = true;
  int sampling_failures = 0;
  std::uint64_t seed = 0;
  std::uint64_t draws = 0;
  std::string failure;
  std::map<std::string, double> budgets;   // name -> allowed
  std::map<std::string, double> observed;  // name -> observed
};

// Accumulates 2^h d^2 in ascending h; stops after 4 consecutive terms below 1e-14 once h >= min_h.
class SeriesAccumulator {
 public:
  explicit SeriesAccumulator(int min_h = 3) : min_h_(min_h) {}

  void add(ChainReport& rep, int h, int source, double dsq) {
    ChainLevel lv{h, source, dsq, std::ldexp(dsq, h)};
    sum_ += lv.term;
    rep.levels.push_back(lv);
    last_ = h;
    if (h >= min_h_) small_ = lv.term < 1e-14 ? small_ + 1 : 0;
  }
  bool done() const { return small_ >= 4; }
  double value() const { return sum_.value(); }
  int last() const { return last_; }

 private:
  int min_h_;
  int small_ = 0;
  int last_ = 0;
  CompensatedSum sum_;
};

}  // namespace chaincraft
