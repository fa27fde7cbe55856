// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "chaincraft/chain.hpp"
#include "chaincraft/decompose.hpp"
#include "chaincraft/ladder.hpp"
#include "chaincraft/pattern.hpp"
#include "json.hpp"

namespace chaincraft {

using Json = nlohmann::ordered_json;

inline constexpr const char* kReportSchema = "chaincraft/1";

// {"kind": "dense"|"diagonal-rule"|"block-constant", "dim": int, "data": ...}; all values are variances b^2.
//   dense:          data = array of dim rows, or a flat array of dim*dim values
//   diagonal-rule:  data = rule name ("inverse-sqrt-log2", "identity", "zero") or an array of dim diagonal values
//   block-constant: data = {"beta": nb x nb rows, "overrides": [[i, j, v], ...]}, dim = l_nb - 1
inline Pattern pattern_from_json(const Json& j) {
  if (!j.is_object()) throw PatternError("pattern document must be an object");
  if (!j.contains("kind") || !j.contains("dim") || !j.contains("data")) throw PatternError("pattern needs kind, dim and data");
  const std::string kind = j.at("kind").get<std::string>();
  const auto dim = j.at("dim").get<std::size_t>();
  const Json& data = j.at("data");
  Pattern p;
  if (kind == "dense") {
    std::vector<double> v;
    if (!data.is_array()) throw PatternError("dense data must be an array");
    if (!data.empty() && data.front().is_array()) {
      if (data.size() != dim) throw PatternError("dense data must have dim rows");
      for (const auto& row : data) {
        if (!row.is_array() || row.size() != dim) throw PatternError("dense rows must have dim entries");
        for (const auto& x : row) v.push_back(x.get<double>());
      }
    } else {
      for (const auto& x : data) v.push_back(x.get<double>());
    }
    p = Pattern::dense(dim, std::move(v));
  } else if (kind == "diagonal-rule") {
    if (data.is_string()) {
      p = Pattern::diagonal_rule(data.get<std::string>(), dim);
    } else if (data.is_array()) {
      if (data.size() != dim) throw PatternError("diagonal data must have dim entries");
      p = Pattern::diagonal(data.get<std::vector<double>>());
    } else {
      throw PatternError("diagonal-rule data must be a rule name or an array");
    }
  } else if (kind == "block-constant") {
    if (!data.is_object() || !data.contains("beta")) throw PatternError("block-constant data needs beta");
    const Json& beta = data.at("beta");
    const int nb = static_cast<int>(beta.size());
    std::vector<double> b;
    for (const auto& row : beta) {
      if (!row.is_array() || static_cast<int>(row.size()) != nb) throw PatternError("beta must be square");
      for (const auto& x : row) b.push_back(x.get<double>());
    }
    std::vector<std::tuple<std::size_t, std::size_t, double>> ov;
    if (data.contains("overrides"))
      for (const auto& t : data.at("overrides")) {
        if (!t.is_array() || t.size() != 3) throw PatternError("overrides are [i, j, value] triples");
        ov.emplace_back(t[0].get<std::size_t>(), t[1].get<std::size_t>(), t[2].get<double>());
      }
    p = Pattern::block_constant(nb, std::move(b), ov);
    if (p.dim() != dim) throw PatternError("block-constant dim must be l_nb - 1 = " + std::to_string(p.dim()));
  } else {
    throw PatternError("unknown pattern kind '" + kind + "'");
  }
  return p;
}

inline Pattern load_pattern(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PatternError("cannot open pattern file " + path);
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw PatternError("pattern file " + path + ": " + e.what());
  }
  Pattern p = pattern_from_json(j);
  p.set_id(path);
  return p;
}

// Block-constant views export their beta table plus override triplets; anything up to 4096 exports upper-triangle
// triplets (i, j, b^2_ij); larger permuted views export row spans [i, lo, hi, value].
inline Json pattern_part_json(const Pattern& p) {
  Json out;
  out["id"] = p.id();
  out["dim"] = p.dim();
  if (p.storage() == Storage::block_constant && !p.has_permutation() && p.shift() == 0) {
    const int L = p.max_block();
    Json beta = Json::array();
    for (int a = 1; a <= L; ++a) {
      Json row = Json::array();
      for (int b = 1; b <= L; ++b) row.push_back(p.block_value(a, b));
      beta.push_back(row);
    }
    out["beta"] = beta;
    Json ov = Json::array();
    for (const auto& [i, j, v] : p.override_triplets()) ov.push_back({i, j, v});
    out["overrides"] = ov;
    return out;
  }
  std::vector<Span> runs;
  Json trip = Json::array();
  const bool entries = p.dim() <= 4096;
  for (std::size_t i = 1; i <= p.dim(); ++i) {
    runs.clear();
    p.row_runs(i, runs);
    for (const Span& r : runs) {
      if (r.hi < i) continue;
      const std::size_t lo = std::max<std::size_t>(r.lo, i);
      if (entries) {
        for (std::size_t j = lo; j <= r.hi; ++j) trip.push_back({i, j, r.value});
      } else {
        trip.push_back({i, lo, static_cast<std::size_t>(r.hi), r.value});
      }
    }
  }
  out[entries ? "triplets" : "spans"] = trip;
  return out;
}

inline Json decomposition_json(const Decomposition& d) {
  Json out;
  out["L"] = d.L;
  Json parts = Json::array();
  Json far = pattern_part_json(d.far);
  far["name"] = "far";
  parts.push_back(far);
  for (std::size_t r = 0; r < d.sym.size(); ++r) {
    Json part = pattern_part_json(d.sym[r]);
    part["name"] = d.specs[r].name;
    Json groups = Json::array();
    for (const auto& g : d.specs[r].groups) groups.push_back(g);
    part["groups"] = groups;
    parts.push_back(part);
  }
  out["parts"] = parts;
  return out;
}

// One bound comparison: passes when observed <= bound (with the shared relative slack).
struct Check {
  std::string name;
  std::string bound_label;  // human-readable statement of the bound being checked
  double observed = 0.0;
  double bound = 0.0;
  bool pass = false;
  std::string detail;
};

inline Check make_check(std::string name, std::string label, double observed, double bound, bool extra_ok = true,
                        std::string detail = {}) {
  return {std::move(name), std::move(label), observed, bound, within(observed, bound) && extra_ok, std::move(detail)};
}

// A boolean property with no numeric bound: observed and bound are 1/0 flags.
inline Check make_flag(std::string name, std::string label, bool ok, std::string detail = {}) {
  return {std::move(name), std::move(label), ok ? 0.0 : 1.0, 0.0, ok, std::move(detail)};
}

inline Json number_json(double x) {
  if (std::isfinite(x)) return Json(x);
  return Json(x > 0 ? "inf" : (x < 0 ? "-inf" : "nan"));
}

inline Json check_json(const Check& c) {
  Json j;
  j["name"] = c.name;
  j["bound_label"] = c.bound_label;
  j["observed"] = number_json(c.observed);
  j["bound"] = number_json(c.bound);
  j["margin"] = number_json(c.bound - c.observed);
  j["pass"] = c.pass;
  if (!c.detail.empty()) j["detail"] = c.detail;
  return j;
}

struct Report {
  std::string command;
  Json config = Json::object();
  std::vector<Check> checks;
  Json data = Json::object();
  std::string precondition;  // non-empty when the run could not start (exit 3)

  bool pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
  const Check* first_failure() const {
    for (const auto& c : checks)
      if (!c.pass) return &c;
    return nullptr;
  }
  int exit_code() const { return !precondition.empty() ? 3 : (pass() ? 0 : 2); }
};

inline Json report_json(const Report& r) {
  Json j;
  j["schema"] = kReportSchema;
  j["command"] = r.command;
  j["config"] = r.config;
  j["pass"] = r.pass() && r.precondition.empty();
  j["exit_code"] = r.exit_code();
  if (!r.precondition.empty()) j["precondition"] = r.precondition;
  Json checks = Json::array();
  for (const auto& c : r.checks) checks.push_back(check_json(c));
  j["checks"] = checks;
  j["data"] = r.data;
  return j;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_report_csv(std::ostream& os, const Report& r) {
  os << "command,check,observed,bound,margin,pass,bound_label,detail\n";
  os.precision(17);
  for (const auto& c : r.checks)
    os << r.command << ',' << csv_escape(c.name) << ',' << c.observed << ',' << c.bound << ',' << (c.bound - c.observed) << ','
       << (c.pass ? "true" : "false") << ',' << csv_escape(c.bound_label) << ',' << csv_escape(c.detail) << '\n';
}

inline Json chain_report_json(const ChainReport& rep, bool levels = false) {
  Json j;
  j["name"] = rep.name;
  j["series"] = number_json(rep.series);
  j["bound"] = number_json(rep.bound);
  j["tail_bound"] = number_json(rep.tail_bound);
  j["pass"] = rep.pass;
  j["dominance_ok"] = rep.dominance_ok;
  j["membership_ok"] = rep.membership_ok;
  j["sampling_failures"] = rep.sampling_failures;
  j["seed"] = rep.seed;
  j["draws"] = rep.draws;
  if (!rep.failure.empty()) j["failure"] = rep.failure;
  Json b = Json::object();
  for (const auto& [name, allowed] : rep.budgets) {
    Json e;
    e["observed"] = number_json(rep.observed.count(name) ? rep.observed.at(name) : 0.0);
    e["bound"] = number_json(allowed);
    b[name] = e;
  }
  j["internal_budgets"] = b;
  if (levels) {
    Json lv = Json::array();
    for (const auto& l : rep.levels) lv.push_back({{"h", l.h}, {"source", l.source}, {"distance_sq", l.distance_sq}, {"term", l.term}});
    j["per_level"] = lv;
  }
  return j;
}

}  // namespace chaincraft
