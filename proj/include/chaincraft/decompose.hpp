// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "chaincraft/ladder.hpp"
#include "chaincraft/pattern.hpp"
#include "chaincraft/rng.hpp"

namespace chaincraft {

// One symmetric part. q = 0 covers block pairs with |i1-i2| <= 1 and min(i1,i2) = r mod 2;
// q = 2 covers |i1-i2| = 2 with min(i1,i2) = r mod 4. Groups are the diagonal blocks (lists of ladder blocks).
struct PartSpec {
  std::string name;
  int q = 0;
  int r = 0;
  std::vector<std::vector<int>> groups;

  bool accepts(int a, int b) const {
    if (a < 1 || b < 1) return false;
    const int lo = std::min(a, b), gap = std::abs(a - b);
    if (q == 0) return gap <= 1 && lo % 2 == r;
    return gap == 2 && lo % 4 == r;
  }
};

inline bool far_part_accepts(int a, int b) { return a >= 1 && b >= 1 && std::abs(a - b) >= 3; }

inline std::vector<PartSpec> symmetric_part_specs(int L) {
  std::vector<PartSpec> out;
  for (int r = 0; r < 2; ++r) {
    PartSpec s{"near" + std::to_string(r), 0, r, {}};
    for (int k = 0; 2 * k + r <= L; ++k) {
      std::vector<int> g;
      for (int b = 2 * k + r; b <= 2 * k + r + 1; ++b)
        if (b >= 1 && b <= L) g.push_back(b);
      if (!g.empty()) s.groups.push_back(g);
    }
    out.push_back(s);
  }
  for (int r = 0; r < 4; ++r) {
    PartSpec s{"gap2-" + std::to_string(r), 2, r, {}};
    for (int k = 0; 4 * k + r <= L; ++k) {
      std::vector<int> g;
      for (int b = 4 * k + r; b <= 4 * k + r + 2; ++b)
        if (b >= 1 && b <= L) g.push_back(b);
      if (!g.empty()) s.groups.push_back(g);
    }
    out.push_back(s);
  }
  return out;
}

struct Decomposition {
  int L = 0;
  Pattern far;                  // |i1 - i2| >= 3
  std::vector<Pattern> sym;     // six parts, same order as specs
  std::vector<PartSpec> specs;
};

inline Decomposition decompose(const Pattern& p) {
  if (!p.normalized() && !is_normalized_shape(p)) throw PatternError("decompose: pattern is not normalized");
  Decomposition d;
  d.L = p.max_block();
  d.far = p.masked(far_part_accepts).with_normalized_flag(true).set_id(p.id() + "/far");
  d.specs = symmetric_part_specs(d.L);
  for (const auto& s : d.specs) {
    Pattern part = p.masked([s](int a, int b) { return s.accepts(a, b); }).with_normalized_flag(true);
    part.set_id(p.id() + "/" + s.name);
    d.sym.push_back(std::move(part));
  }
  return d;
}

struct DecompositionReport {
  bool partition = true;     // every block pair (both >= 1) in exactly one part
  bool exact = true;         // entries sum back to the input
  bool disjoint = true;      // at most one part nonzero at any entry
  bool block_diagonal = true;
  std::string failure;
  std::size_t entries_checked = 0;
};

inline DecompositionReport verify_decomposition(const Pattern& p, const Decomposition& d, std::uint64_t seed = 1) {
  DecompositionReport rep;
  const int L = d.L;
  std::vector<const Pattern*> parts{&d.far};
  for (const auto& s : d.sym) parts.push_back(&s);

  for (int a = 0; a <= L; ++a)
    for (int b = 0; b <= L; ++b) {
      int count = far_part_accepts(a, b) ? 1 : 0;
      for (const auto& s : d.specs) count += s.accepts(a, b) ? 1 : 0;
      const int want = (a >= 1 && b >= 1) ? 1 : 0;
      if (count != want && rep.partition) {
        rep.partition = false;
        rep.failure = "block pair (" + std::to_string(a) + "," + std::to_string(b) + ") covered " + std::to_string(count) + " times";
      }
    }

  auto check_entry = [&](std::size_t i, std::size_t j) {
    const double whole = p(i, j);
    double sum = 0.0;
    int nonzero = 0;
    for (const Pattern* q : parts) {
      const double v = (*q)(i, j);
      sum += v;
      nonzero += v != 0.0;
    }
    ++rep.entries_checked;
    if (sum != whole && rep.exact) {
      rep.exact = false;
      rep.failure = "entry (" + std::to_string(i) + "," + std::to_string(j) + ") not reproduced";
    }
    if (nonzero > 1 && rep.disjoint) {
      rep.disjoint = false;
      rep.failure = "entry (" + std::to_string(i) + "," + std::to_string(j) + ") in several parts";
    }
  };

  const std::size_t n = p.dim();
  if (n <= 4096) {
    for (std::size_t i = 1; i <= n; ++i)
      for (std::size_t j = 1; j <= n; ++j) check_entry(i, j);
  } else {
    // Block profiles summed over the parts must match the input row by row, plus sampled entries.
    const auto whole = p.all_row_profiles();
    std::vector<std::vector<BlockProfile>> pp;
    for (const Pattern* q : parts) pp.push_back(q->all_row_profiles());
    for (std::size_t i = 1; i <= n && rep.exact; ++i)
      for (int b = 0; b <= L; ++b) {
        double s = 0.0, m = 0.0;
        for (const auto& v : pp) {
          s += v[i].sum[b];
          m = std::max(m, v[i].max[b]);
        }
        if (s != whole[i].sum[b] || m != whole[i].max[b]) {
          rep.exact = false;
          rep.failure = "row " + std::to_string(i) + " block " + std::to_string(b) + " profile not reproduced";
          break;
        }
      }
    CounterRng rng(seed);
    for (int k = 0; k < 100000; ++k) {
      std::size_t i = 1 + rng.next_u64() % n, j = 1 + rng.next_u64() % n;
      check_entry(i, j);
    }
  }

  for (std::size_t k = 0; k < d.sym.size(); ++k) {
    const auto bpm = d.sym[k].block_pair_max();
    std::vector<int> group_of(L + 1, -1);
    for (std::size_t g = 0; g < d.specs[k].groups.size(); ++g)
      for (int b : d.specs[k].groups[g]) group_of[b] = static_cast<int>(g);
    for (int a = 0; a <= L; ++a)
      for (int b = 0; b <= L; ++b) {
        if (bpm[static_cast<std::size_t>(a) * (L + 1) + b] == 0.0) continue;
        if (group_of[a] < 0 || group_of[a] != group_of[b]) {
          if (rep.block_diagonal)
            rep.failure = d.specs[k].name + " has mass outside its diagonal blocks at (" + std::to_string(a) + "," + std::to_string(b) + ")";
          rep.block_diagonal = false;
        }
      }
  }
  return rep;
}

}  // namespace chaincraft
