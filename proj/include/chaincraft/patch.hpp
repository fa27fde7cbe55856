// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "chaincraft/block.hpp"
#include "chaincraft/chain.hpp"
#include "chaincraft/decompose.hpp"
#include "chaincraft/dyadics.hpp"
#include "chaincraft/ladder.hpp"
#include "chaincraft/metrics.hpp"
#include "chaincraft/pattern.hpp"
#include "chaincraft/point.hpp"
#include "chaincraft/rng.hpp"

namespace chaincraft {

inline constexpr double kPatchConstant = 73.0;
inline constexpr double kPatchBlockFactor = 16.0;

// One tile of {2..d}: slot i holds the diagonal block whose smallest ladder block is i, or ladder block i alone
// (with a zero matrix) when no diagonal block of the part touches it.
struct PatchSlot {
  int index = 0;
  std::vector<int> blocks;
  std::size_t lo = 0;
  std::size_t n = 0;
  int w = 0;  // largest ladder block in the slot
  bool zero = false;
};

inline std::vector<PatchSlot> patch_slots(const PartSpec& part_spec, int L, std::size_t d) {
  std::vector<int> owner(L + 1, 0);
  std::vector<PatchSlot> slots(L);
  for (int i = 1; i <= L; ++i) slots[i - 1].index = i;
  for (const auto& g : part_spec.groups) {
    const int lo = *std::min_element(g.begin(), g.end());
    if (lo < 1 || lo > L) throw std::logic_error("patch_slots: group outside 1..L in " + part_spec.name);
    if (!slots[lo - 1].blocks.empty()) throw std::logic_error("patch_slots: two groups share slot " + std::to_string(lo));
    for (int b : g) {
      if (b < 1 || b > L) continue;
      ++owner[b];
      slots[lo - 1].blocks.push_back(b);
    }
  }
  for (int b = 1; b <= L; ++b) {
    if (owner[b] > 1) throw std::logic_error("patch_slots: ladder block " + std::to_string(b) + " covered twice in " + part_spec.name);
    if (owner[b] == 0) {
      if (!slots[b - 1].blocks.empty()) throw std::logic_error("patch_slots: slot collision at " + std::to_string(b));
      slots[b - 1].blocks = {b};
      slots[b - 1].zero = true;
      owner[b] = 1;
    }
  }
  for (auto& s : slots) {
    if (s.blocks.empty()) continue;
    std::sort(s.blocks.begin(), s.blocks.end());
    for (std::size_t k = 1; k < s.blocks.size(); ++k)
      if (s.blocks[k] != s.blocks[k - 1] + 1) throw std::logic_error("patch_slots: slot is not contiguous");
    const auto first = block_in_dim(s.blocks.front(), d), last = block_in_dim(s.blocks.back(), d);
    s.lo = first.lo;
    s.n = last.hi - first.lo;
    s.w = s.blocks.back();
  }
  std::size_t next = 2;
  for (const auto& s : slots) {
    if (s.blocks.empty()) continue;
    if (s.lo != next) throw std::logic_error("patch_slots: slots do not tile 2..d in " + part_spec.name);
    next = s.lo + s.n;
  }
  if (next != d + 1) throw std::logic_error("patch_slots: slots do not reach d in " + part_spec.name);
  return slots;
}

struct A1Slot {
  int index = 0;
  std::size_t lo = 0;
  std::size_t n = 0;
  double y = 0.0;
  int level = 0;  // h + floor(log2 y)
  bool present = false;
  Point sub_point;
  A2Certificate sub;
};

// Parameters of a member of A_{1,h}: the mass vector and a sub-certificate per slot i <= min(h, L).
struct A1Certificate {
  int h = 0;
  int L = 0;
  std::size_t dim = 0;
  std::vector<A1Slot> slots;
};

struct PatchedWitness {
  Point point;
  A1Certificate cert;
};

inline int floor_log2(double y) {
  int e = 0;
  std::frexp(y, &e);
  return e - 1;
}

inline MembershipCheck verify_membership(const Point& w, const A1Certificate& c) {
  if (w.dim != c.dim) return membership_fail("A1: witness dimension mismatch");
  if (c.h == 0) return w.nz.empty() ? MembershipCheck{} : membership_fail("A1: level 0 holds only the zero vector");
  const int h0 = std::min(c.h, c.L);
  if (static_cast<int>(c.slots.size()) > h0) return membership_fail("A1 mass vector: more than min(h, L) slots");
  CompensatedSum ys;
  for (const auto& s : c.slots) {
    if (s.index < 1 || s.index > h0) return membership_fail("A1 mass vector: slot index outside 1..min(h,L)");
    if (!(s.y >= 0.0) || !detail::is_dyadic_at(s.y, c.h))
      return membership_fail("A1 mass vector: y_" + std::to_string(s.index) + " is not a multiple of 1/M(h)");
    ys += s.y;
  }
  if (!within(ys.value(), 1.0)) return membership_fail("A1 mass vector: sum of y exceeds 1");
  std::size_t k = 0;
  for (const auto& s : c.slots) {
    Point slice(s.n);
    while (k < w.nz.size() && w.nz[k].first < s.lo) {
      return membership_fail("A1: coordinate " + std::to_string(w.nz[k].first) + " outside the certified slots");
    }
    for (; k < w.nz.size() && w.nz[k].first < s.lo + s.n; ++k) slice.nz.emplace_back(w.nz[k].first - s.lo + 1, w.nz[k].second);
    if (!s.present) {
      if (!slice.nz.empty()) return membership_fail("A1: slot " + std::to_string(s.index) + " must be zero");
      continue;
    }
    if (s.y <= 0.0) return membership_fail("A1 mass vector: present slot with y = 0");
    if (s.level != c.h + floor_log2(s.y)) return membership_fail("A1: slot level is not h + floor(log2 y)");
    if (s.sub.h != std::max(s.level - 4, 0)) return membership_fail("A1: sub-certificate level is not max(k-4,0)");
    const auto sub = verify_membership(s.sub_point, s.sub);
    if (!sub.ok) return membership_fail("slot " + std::to_string(s.index) + ": " + sub.failure);
    const double scale = std::sqrt(s.y);
    if (slice.nz.size() != s.sub_point.nz.size()) return membership_fail("A1 entry form: slot support differs from sub-witness");
    for (std::size_t a = 0; a < slice.nz.size(); ++a)
      if (slice.nz[a].first != s.sub_point.nz[a].first || slice.nz[a].second != scale * s.sub_point.nz[a].second)
        return membership_fail("A1 entry form: slot " + std::to_string(s.index) + " entry is not sqrt(y) times the sub-witness");
  }
  if (k != w.nz.size()) return membership_fail("A1: coordinate " + std::to_string(w.nz[k].first) + " outside the certified slots");
  return {};
}

// Slot tiling and block statistics of one symmetric part; independent of t.
struct PatchPlan {
  const Pattern* part = nullptr;
  int L = 0;
  double K = 0.0;        // 8 C^2
  double K_block = 0.0;  // 16 C^2
  bool slot_cap_ok = true;
  std::vector<PatchSlot> slots;
  std::vector<BlockCaps> caps;
};

inline PatchPlan make_patch_plan(const Pattern& part, const PartSpec& part_spec, double C) {
  PatchPlan plan;
  plan.part = &part;
  plan.L = part.max_block();
  plan.K = 8.0 * C * C;
  plan.K_block = 16.0 * C * C;
  plan.slots = patch_slots(part_spec, plan.L, part.dim());
  for (const auto& s : plan.slots) {
    const BlockCaps c = block_caps(BlockMatrix{&part, s.lo, s.n});
    if (!s.zero && !within(c.max_entry, std::ldexp(plan.K, -s.index))) plan.slot_cap_ok = false;
    plan.caps.push_back(c);
  }
  return plan;
}

// Witnesses of A_{1,h}(part) for one t: slots tile {2..d}, each nonempty slot runs a block chain on t|_i.
class PatchedChain {
 public:
  PatchedChain(const Pattern& part, const PartSpec& part_spec, double C, const Point& t, int samples, CounterRng rng,
               bool verify = true)
      : PatchedChain(make_patch_plan(part, part_spec, C), t, samples, rng, verify) {}

  PatchedChain(const PatchPlan& plan, const Point& t, int samples, CounterRng rng, bool verify = true)
      : part_(plan.part), t_(t), L_(plan.L), K_(plan.K), K_block_(plan.K_block), slot_cap_ok_(plan.slot_cap_ok),
        slots_(plan.slots), caps_(plan.caps) {
    if (t.dim != part_->dim()) throw std::invalid_argument("PatchedChain: dimension mismatch");
    mass_.assign(L_, 0.0);
    chains_.resize(L_);
    for (std::size_t k = 0; k < slots_.size(); ++k) {
      const PatchSlot& s = slots_[k];
      const BlockMatrix bm{part_, s.lo, s.n};
      CompensatedSum m;
      std::vector<Point::Entry> local;
      for (const auto& [j, v] : t.nz)
        if (j >= s.lo && j < s.lo + s.n) {
          m += v * v;
          local.emplace_back(static_cast<std::uint32_t>(j - s.lo + 1), v);
        }
      mass_[s.index - 1] = m.value();
      if (m.value() <= 0.0) continue;
      const double scale = 1.0 / std::sqrt(m.value());
      Point slice(s.n);
      for (auto& [j, v] : local) slice.nz.emplace_back(j, v * scale);
      chains_[s.index - 1] = std::make_unique<BlockChain>(bm, s.w, K_block_, slice, samples,
                                                          rng.split(static_cast<std::uint64_t>(s.index)), verify,
                                                          &caps_[k]);
    }
  }

  const std::vector<PatchSlot>& slots() const { return slots_; }
  double mass(int i) const { return mass_[i - 1]; }
  double K() const { return K_; }
  double K_block() const { return K_block_; }
  bool slot_cap_ok() const { return slot_cap_ok_; }
  BlockChain* chain(int i) { return chains_[i - 1].get(); }

  PatchedWitness at(int h) {
    PatchedWitness pw;
    pw.point = Point(t_.dim);
    pw.cert.h = h;
    pw.cert.L = L_;
    pw.cert.dim = t_.dim;
    if (h == 0) return pw;
    const int h0 = std::min(h, L_);
    for (int i = 1; i <= h0; ++i) {
      const PatchSlot& s = slots_[i - 1];
      A1Slot rec;
      rec.index = i;
      rec.lo = s.lo;
      rec.n = s.n;
      rec.y = quantize_down(mass_[i - 1], h);
      BlockChain* ch = chains_[i - 1].get();
      if (rec.y > 0.0 && ch) {
        rec.level = h + floor_log2(rec.y);
        const BlockWitness& bw = ch->at(std::max(rec.level - 4, 0));
        rec.present = true;
        rec.sub_point = bw.point;
        rec.sub = bw.cert;
        const double scale = std::sqrt(rec.y);
        for (const auto& [j, v] : bw.point.nz) pw.point.nz.emplace_back(static_cast<std::uint32_t>(s.lo + j - 1), scale * v);
      }
      pw.cert.slots.push_back(std::move(rec));
    }
    return pw;
  }

  // sum_{h>=1} 2^h d~_{2,M^(i)}(t|_i, A^(i)_h witness)^2 for slot i; 0 for empty slices.
  ChainReport block_series(int i, int h_max) {
    ChainReport rep;
    rep.name = "slot" + std::to_string(i);
    rep.bound = kBlockFactor * K_block_;
    BlockChain* ch = chains_[i - 1].get();
    if (ch) {
      SeriesAccumulator acc(slots_[i - 1].w + 5);
      fill_block_report(rep, *ch, acc, h_max, 1);
    }
    rep.pass = within(rep.series, rep.bound) && rep.dominance_ok && rep.membership_ok;
    return rep;
  }

 private:
  const Pattern* part_;
  Point t_;
  int L_;
  double K_, K_block_;
  bool slot_cap_ok_ = true;
  std::vector<PatchSlot> slots_;
  std::vector<BlockCaps> caps_;
  std::vector<double> mass_;
  std::vector<std::unique_ptr<BlockChain>> chains_;
};

inline PatchedWitness patch_witness(const Pattern& part, const PartSpec& part_spec, double C, const Point& t, int h,
                                    int samples = kDefaultSamples, std::uint64_t seed = 1) {
  PatchedChain pc(part, part_spec, C, t, samples, CounterRng(seed));
  return pc.at(h);
}

// sum_h 2^h d~_{2,part}(t, A_{1,max(h-2,0)} witness)^2 with budgets 73K + 16 max_i(slot series), K = 8C^2.
inline ChainReport series_patched(PatchedChain& pc, const Pattern& part, const Point& t, int h_max = kDefaultHMax,
                                  bool verify = true) {
  ChainReport rep;
  rep.name = "patched";
  TildeFromPoint tilde(part, t);
  std::map<int, double> memo;
  SeriesAccumulator acc;
  for (int h = 0; h <= h_max; ++h) {
    const int k = std::max(h - 2, 0);
    auto it = memo.find(k);
    if (it == memo.end()) {
      PatchedWitness pw = pc.at(k);
      if (!dominated_loose(pw.point, t)) rep.dominance_ok = false;
      if (verify) {
        const auto chk = verify_membership(pw.point, pw.cert);
        if (!chk.ok && rep.membership_ok) {
          rep.membership_ok = false;
          rep.failure = chk.failure;
        }
      }
      it = memo.emplace(k, tilde.sq(pw.point)).first;
    }
    acc.add(rep, h, k, it->second);
    if (acc.done()) break;
  }
  rep.series = acc.value();
  rep.tail_bound = rep.levels.empty() ? 0.0 : 2.0 * rep.levels.back().term;
  double worst = 0.0;
  bool blocks_ok = true;
  for (const auto& s : pc.slots()) {
    ChainReport b = pc.block_series(s.index, h_max);
    worst = std::max(worst, b.series);
    blocks_ok = blocks_ok && b.pass;
    rep.sampling_failures += b.sampling_failures;
    rep.draws += b.draws;
    if (!b.membership_ok && rep.membership_ok) {
      rep.membership_ok = false;
      rep.failure = b.failure;
    }
  }
  rep.bound = kPatchConstant * pc.K() + kPatchBlockFactor * worst;
  rep.budgets["patched"] = rep.bound;
  rep.observed["patched"] = rep.series;
  rep.budgets["patched-worst-case"] = kPatchConstant * pc.K() + kPatchBlockFactor * kBlockFactor * pc.K_block();
  rep.observed["patched-worst-case"] = rep.series;
  rep.budgets["slot-series"] = kBlockFactor * pc.K_block();
  rep.observed["slot-series"] = worst;
  rep.pass = within(rep.series, rep.bound) && blocks_ok && pc.slot_cap_ok() && rep.dominance_ok && rep.membership_ok;
  if (!pc.slot_cap_ok() && rep.failure.empty()) rep.failure = "slot entry exceeds K/2^i";
  return rep;
}

}  // namespace chaincraft
