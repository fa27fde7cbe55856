// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "chaincraft/block.hpp"
#include "chaincraft/chain.hpp"
#include "chaincraft/decompose.hpp"
#include "chaincraft/metrics.hpp"
#include "chaincraft/offdiag.hpp"
#include "chaincraft/patch.hpp"
#include "chaincraft/pattern.hpp"
#include "chaincraft/point.hpp"
#include "chaincraft/rng.hpp"

namespace chaincraft {

inline constexpr double kGlueFactor = 60.0;          // ceil(log2 7) + 1 + 2^3 * 7
inline constexpr double kMetricFactor = 8.0;         // (2 sqrt 2)^2
inline constexpr double kFullConstant = 121931520.0;  // 8 * 60 * (8 * 73 + 16 * 990 * 16)

class AssumptionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GlueResult {
  Point point;
  bool mixed_sign = false;  // some coordinate had nonzero entries of both signs
  bool overflow = false;    // ||m(x)|| > 1, replaced by e_1
};

// Coordinatewise signed maximum over the nonzero entries (0 when their signs disagree), coordinate 1 set to 0,
// then completion to the sphere through coordinate 1.
inline GlueResult glue(const std::vector<const Point*>& parts, std::size_t dim) {
  GlueResult g;
  std::map<std::uint32_t, std::pair<double, int>> acc;  // j -> (max |.|, sign or 2 when mixed)
  for (const Point* p : parts) {
    if (p->dim != dim) throw std::invalid_argument("glue: dimension mismatch");
    for (const auto& [j, v] : p->nz) {
      if (j < 2) continue;
      auto [it, fresh] = acc.try_emplace(j, std::fabs(v), sign_of(v));
      if (fresh) continue;
      if (it->second.second != sign_of(v)) it->second.second = 2;
      it->second.first = std::max(it->second.first, std::fabs(v));
    }
  }
  Point x(dim);
  for (const auto& [j, e] : acc) {
    if (e.second == 2) {
      g.mixed_sign = true;
      continue;
    }
    x.nz.emplace_back(j, e.second < 0 ? -e.first : e.first);
  }
  const double tail = x.norm2();
  if (tail > 1.0) {
    g.overflow = true;
    g.point = Point::unit(dim, 1);
    return g;
  }
  const double first = std::sqrt(1.0 - tail);
  if (first != 0.0) x.nz.insert(x.nz.begin(), {1u, first});
  g.point = std::move(x);
  return g;
}

inline GlueResult glue(const std::vector<Point>& parts, std::size_t dim) {
  std::vector<const Point*> ptrs;
  for (const auto& p : parts) ptrs.push_back(&p);
  return glue(ptrs, dim);
}

struct FinalCertificate {
  int h = 0;
  int inner = 0;  // max(h-3, 0)
  std::size_t dim = 0;
  Point off_point;
  A0Certificate off;
  std::vector<Point> sym_points;
  std::vector<A1Certificate> sym;
  bool mixed_sign = false;
  bool overflow = false;
  double first = 1.0;
};

using MembershipCertificate = std::variant<A0Certificate, A2Certificate, A1Certificate, FinalCertificate>;

inline MembershipCheck verify_membership(const Point& w, const FinalCertificate& c) {
  if (w.dim != c.dim) return membership_fail("final: witness dimension mismatch");
  const double nrm = w.norm();
  if (std::fabs(nrm - 1.0) > 1e-12) return membership_fail("final sphere: ||witness|| = " + std::to_string(nrm));
  if (c.inner == 0) {
    if (w.nz.size() == 1 && w.nz[0].first == 1 && w.nz[0].second == 1.0) return {};
    return membership_fail("final: levels h <= 3 hold only e_1");
  }
  if (c.inner != std::max(c.h - 3, 0)) return membership_fail("final: inner level is not max(h-3,0)");
  if (c.off.h != std::max(c.inner - 3, 0)) return membership_fail("final: off-diagonal level is not max(inner-3,0)");
  auto off = verify_membership(c.off_point, c.off);
  if (!off.ok) return membership_fail("off-diagonal component: " + off.failure);
  if (c.sym.size() != c.sym_points.size()) return membership_fail("final: symmetric component lists differ in length");
  std::vector<const Point*> parts{&c.off_point};
  for (std::size_t r = 0; r < c.sym.size(); ++r) {
    if (c.sym[r].h != std::max(c.inner - 2, 0)) return membership_fail("final: symmetric level is not max(inner-2,0)");
    auto s = verify_membership(c.sym_points[r], c.sym[r]);
    if (!s.ok) return membership_fail("symmetric component " + std::to_string(r + 1) + ": " + s.failure);
    parts.push_back(&c.sym_points[r]);
  }
  const GlueResult g = glue(parts, c.dim);
  if (g.point.nz != w.nz) return membership_fail("final composition: witness differs from s(m(components))");
  return {};
}

inline MembershipCheck verify_membership(const Point& w, const MembershipCertificate& c) {
  return std::visit([&](const auto& cert) { return verify_membership(w, cert); }, c);
}

struct FullOptions {
  int h_max = kDefaultHMax;
  int samples = kDefaultSamples;
  std::uint64_t seed = 1;
  bool verify = true;
  WitnessTamper tamper;
};

struct FullWitness {
  Point point;
  FinalCertificate cert;
};

// Decomposition and slot plans of a pattern, shared by the chains of every t.
struct FullPlan {
  const Pattern* pattern = nullptr;
  double C = 0.0;
  Decomposition dec;
  std::vector<PatchPlan> sym;
};

// The pattern must be normalized and satisfy the standing assumption with C.
inline std::shared_ptr<const FullPlan> make_full_plan(const Pattern& p, double C) {
  const AssumptionReport a = check_assumption(p, C);
  if (!a.pass) throw AssumptionError("standing assumption fails (" + a.violation + "); run prepare_pattern first");
  auto plan = std::make_shared<FullPlan>();
  plan->pattern = &p;
  plan->C = C;
  plan->dec = decompose(p);
  for (std::size_t r = 0; r < plan->dec.sym.size(); ++r)
    plan->sym.push_back(make_patch_plan(plan->dec.sym[r], plan->dec.specs[r], C));
  return plan;
}

// Witnesses of the glued sequence for one t.
class FullChain {
 public:
  FullChain(const Pattern& p, double C, const Point& t, const FullOptions& opt = {})
      : FullChain(make_full_plan(p, C), t, opt) {}

  FullChain(std::shared_ptr<const FullPlan> plan, const Point& t, const FullOptions& opt = {})
      : plan_(std::move(plan)), p_(plan_->pattern), C_(plan_->C), t_(t), opt_(opt) {
    if (t.dim != p_->dim()) throw std::invalid_argument("FullChain: dimension mismatch");
    if (std::fabs(t.norm() - 1.0) > 1e-10) throw std::invalid_argument("FullChain: t must be a unit vector");
    CounterRng root(opt.seed);
    for (std::size_t r = 0; r < plan_->sym.size(); ++r)
      sym_.push_back(std::make_unique<PatchedChain>(plan_->sym[r], t, opt.samples,
                                                    root.split(static_cast<std::uint64_t>(r + 1)), opt.verify));
  }

  const Decomposition& decomposition() const { return plan_->dec; }
  PatchedChain& sym(std::size_t r) { return *sym_[r]; }

  FullWitness at(int h) {
    FullWitness fw;
    fw.cert.h = h;
    fw.cert.dim = t_.dim;
    fw.cert.inner = std::max(h - 3, 0);
    if (fw.cert.inner == 0) {
      fw.point = Point::unit(t_.dim, 1);
      return fw;
    }
    const int hi = fw.cert.inner;
    OffdiagWitness ow = witness_offdiag(plan_->dec.far, C_, t_, std::max(hi - 3, 0));
    fw.cert.off_point = std::move(ow.point);
    fw.cert.off = std::move(ow.cert);
    std::vector<const Point*> parts{&fw.cert.off_point};
    fw.cert.sym_points.reserve(sym_.size());
    for (auto& pc : sym_) {
      PatchedWitness pw = pc->at(std::max(hi - 2, 0));
      fw.cert.sym_points.push_back(std::move(pw.point));
      fw.cert.sym.push_back(std::move(pw.cert));
    }
    for (const auto& sp : fw.cert.sym_points) parts.push_back(&sp);
    GlueResult g = glue(parts, t_.dim);
    fw.cert.mixed_sign = g.mixed_sign;
    fw.cert.overflow = g.overflow;
    fw.cert.first = g.point.at(1);
    fw.point = std::move(g.point);
    return fw;
  }

 private:
  std::shared_ptr<const FullPlan> plan_;
  const Pattern* p_;
  double C_;
  Point t_;
  FullOptions opt_;
  std::vector<std::unique_ptr<PatchedChain>> sym_;
};

inline FullWitness witness_full(const Pattern& p, double C, const Point& t, int h, const FullOptions& opt = {}) {
  FullChain fc(p, C, t, opt);
  return fc.at(h);
}

struct FullReport {
  ChainReport total;                 // canonical metric series against c0 C^2
  ChainReport glued;                 // d~_{2,B} series of the glued witnesses against 60 max(component)
  ChainReport offdiag;               // against 175 C^2
  std::vector<ChainReport> patched;  // each against 73K + 16 max slot series
  bool metric_chain_ok = true;       // d <= 2 sqrt2 d~_2 per level
  bool additivity_ok = true;         // d~_{2,B}^2 = d~_{2,B0}^2 + sum_r d~_{2,Bsym,r}^2
  bool mixed_sign_hit = false;
  bool overflow_hit = false;
  double max_additivity_error = 0.0;
  bool pass = false;
};

inline FullReport series_full(std::shared_ptr<const FullPlan> plan, const Point& t, const FullOptions& opt = {}) {
  FullReport rep;
  const Pattern& p = *plan->pattern;
  const double C = plan->C;
  FullChain fc(plan, t, opt);
  const Decomposition& dec = fc.decomposition();

  rep.offdiag = series_offdiag(dec.far, C, t, opt.h_max, opt.verify);
  double comp_max = rep.offdiag.series;
  for (std::size_t r = 0; r < dec.sym.size(); ++r) {
    rep.patched.push_back(series_patched(fc.sym(r), dec.sym[r], t, opt.h_max, opt.verify));
    rep.patched.back().name = dec.specs[r].name;
    comp_max = std::max(comp_max, rep.patched.back().series);
  }

  TildeFromPoint tildeB(p, t), tildeFar(dec.far, t);
  std::vector<std::unique_ptr<TildeFromPoint>> tildeSym;
  for (const auto& part : dec.sym) tildeSym.push_back(std::make_unique<TildeFromPoint>(part, t));

  rep.total.name = "full";
  rep.total.seed = opt.seed;
  rep.glued.name = "glued";
  SeriesAccumulator accTotal, accGlued;
  for (int h = 0; h <= opt.h_max; ++h) {
    FullWitness fw = fc.at(h);
    if (opt.tamper) opt.tamper(h, fw.point);
    if (!dominated_loose(fw.point, t)) rep.total.dominance_ok = false;
    rep.mixed_sign_hit = rep.mixed_sign_hit || fw.cert.mixed_sign;
    rep.overflow_hit = rep.overflow_hit || fw.cert.overflow;
    if (opt.verify) {
      const auto chk = verify_membership(fw.point, fw.cert);
      if (!chk.ok && rep.total.membership_ok) {
        rep.total.membership_ok = false;
        rep.total.failure = "h=" + std::to_string(h) + ": " + chk.failure;
      }
    }
    const double dcan = dist_sq(p, t, fw.point);
    const double dt = tildeB.sq(fw.point);
    CompensatedSum parts;
    parts += tildeFar.sq(fw.point);
    for (const auto& ts : tildeSym) parts += ts->sq(fw.point);
    const double err = std::fabs(parts.value() - dt);
    const double rel = err / std::max(dt, 1e-300);
    if (err > 1e-300) rep.max_additivity_error = std::max(rep.max_additivity_error, rel);
    if (rel > 1e-9 && err > 1e-15) rep.additivity_ok = false;
    if (std::sqrt(dcan) > 2.0 * std::sqrt(2.0) * std::sqrt(dt) * (1.0 + 1e-9) + 1e-15) rep.metric_chain_ok = false;
    accTotal.add(rep.total, h, fw.cert.inner, dcan);
    accGlued.add(rep.glued, h, fw.cert.inner, dt);
    if (accTotal.done() && accGlued.done()) break;
  }
  rep.total.series = accTotal.value();
  rep.glued.series = accGlued.value();
  rep.total.tail_bound = rep.total.levels.empty() ? 0.0 : 2.0 * rep.total.levels.back().term;
  rep.glued.tail_bound = rep.glued.levels.empty() ? 0.0 : 2.0 * rep.glued.levels.back().term;

  const double C2 = C * C;
  rep.total.bound = kFullConstant * C2;
  rep.glued.bound = kGlueFactor * comp_max;

  auto& b = rep.total.budgets;
  auto& o = rep.total.observed;
  b["offdiag"] = rep.offdiag.bound;
  o["offdiag"] = rep.offdiag.series;
  for (const auto& pr : rep.patched) {
    b[pr.name] = pr.bound;
    o[pr.name] = pr.series;
    b[pr.name + "/worst-case"] = pr.budgets.at("patched-worst-case");
    o[pr.name + "/worst-case"] = pr.series;
    b[pr.name + "/slot-series"] = pr.budgets.at("slot-series");
    o[pr.name + "/slot-series"] = pr.observed.at("slot-series");
    rep.total.sampling_failures += pr.sampling_failures;
    rep.total.draws += pr.draws;
  }
  b["glue"] = rep.glued.bound;
  o["glue"] = rep.glued.series;
  b["metric"] = kMetricFactor * rep.glued.series;
  o["metric"] = rep.total.series;
  b["c0"] = rep.total.bound;
  o["c0"] = rep.total.series;

  bool budgets_ok = true;
  for (const auto& [name, allowed] : b)
    if (!within(o.at(name), allowed)) {
      budgets_ok = false;
      if (rep.total.failure.empty()) rep.total.failure = "budget " + name + " exceeded";
    }
  bool parts_ok = rep.offdiag.pass;
  for (const auto& pr : rep.patched) parts_ok = parts_ok && pr.pass;
  if (!parts_ok && rep.total.failure.empty()) rep.total.failure = "component check failed";
  rep.total.pass = budgets_ok && parts_ok && rep.total.dominance_ok && rep.total.membership_ok;
  rep.glued.pass = within(rep.glued.series, rep.glued.bound);
  rep.pass = rep.total.pass && rep.metric_chain_ok && rep.additivity_ok && !rep.overflow_hit;
  return rep;
}

inline FullReport series_full(const Pattern& p, double C, const Point& t, const FullOptions& opt = {}) {
  return series_full(make_full_plan(p, C), t, opt);
}

}  // namespace chaincraft
