#pragma once

// User constraints over a gene.
//
// A constraint file lists rules matched against gene slot paths
// ("<part id>.<attribute>", shell-style wildcards allowed):
//
//   {
//     "global_change": 0.2,
//     "mirror_legs": true,
//     "entries": [
//       {"path": "B0.*", "fixed": true},
//       {"path": "*.stiffness", "group": "kp"},
//       {"path": "LL0_0.length", "min": 0.3, "max": 0.5}
//     ]
//   }
//
// Rules resolve into one absolute interval per slot. The global band
// (+-global_change around the template value) always applies on top.

#include <fnmatch.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "codesign/morphology/description.hpp"
#include "codesign/morphology/gene.hpp"

namespace codesign {

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool contains(double v) const { return v >= lo && v <= hi; }
  double width() const { return hi - lo; }
  bool empty() const { return !(lo <= hi); }
  Interval intersect(const Interval& o) const { return {std::max(lo, o.lo), std::min(hi, o.hi)}; }
  bool operator==(const Interval&) const = default;
};

struct ConstraintRule {
  std::string path;  // glob over slot paths
  std::optional<double> min;
  std::optional<double> max;
  bool fixed = false;
  std::string group;  // empty: no linking
};

struct ConstraintRules {
  double global_change = 0.2;
  bool mirror_legs = false;
  std::vector<ConstraintRule> entries;
};

/// Fully resolved constraints for one template. Fixed slots have degenerate
/// intervals and every member of a linked group shares one interval.
struct ConstraintSpec {
  std::vector<GeneSlot> layout;
  std::vector<double> template_values;
  std::vector<Interval> intervals;
  std::vector<char> fixed;
  std::vector<int> group;  // -1 when unlinked
  std::vector<std::vector<int>> groups;
  double global_change = 0.0;

  size_t size() const { return layout.size(); }
};

/// The +-global_change band around a template value. Direction components use
/// an absolute band (they are often exactly zero); attach_pos is kept in [0,1].
inline Interval global_band(Attribute attr, double v, double global_change) {
  Interval band;
  if (is_direction(attr)) {
    band = {v - global_change, v + global_change};
    band = band.intersect({-1.0, 1.0});
  } else {
    const double a = v * (1.0 - global_change);
    const double b = v * (1.0 + global_change);
    band = {std::min(a, b), std::max(a, b)};
    if (attr == Attribute::AttachPos) band = band.intersect({0.0, 1.0});
  }
  return band;
}

inline bool glob_match(const std::string& pattern, const std::string& text) {
  return fnmatch(pattern.c_str(), text.c_str(), 0) == 0;
}

inline ConstraintRules constraint_rules_from_json(const nlohmann::json& doc) {
  ConstraintRules rules;
  try {
    rules.global_change = doc.value("global_change", 0.2);
    rules.mirror_legs = doc.value("mirror_legs", false);
    if (doc.contains("entries")) {
      for (const auto& e : doc.at("entries")) {
        ConstraintRule r;
        r.path = e.at("path").get<std::string>();
        if (e.contains("min")) r.min = e.at("min").get<double>();
        if (e.contains("max")) r.max = e.at("max").get<double>();
        r.fixed = e.value("fixed", false);
        r.group = e.value("group", std::string());
        rules.entries.push_back(std::move(r));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  if (!(rules.global_change >= 0.0)) {
    throw Error(ErrorCode::InvalidAttribute, "global_change must be >= 0");
  }
  return rules;
}

inline ConstraintRules load_constraint_rules(const std::filesystem::path& path) {
  try {
    return constraint_rules_from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

namespace detail {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(size_t n) : parent(n) {
    for (size_t i = 0; i < n; ++i) parent[i] = static_cast<int>(i);
  }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

inline std::string mirrored_id(const std::string& id) {
  if (id.rfind("LL", 0) == 0) return "RL" + id.substr(2);
  if (id.rfind("RL", 0) == 0) return "LL" + id.substr(2);
  return {};
}

}  // namespace detail

inline ConstraintSpec resolve_constraints(const AgentGraph& tmpl, const ConstraintRules& rules) {
  const Gene base = flatten_gene(tmpl);
  const size_t n = base.size();
  ConstraintSpec spec;
  spec.layout = base.layout;
  spec.template_values = base.values;
  spec.global_change = rules.global_change;
  spec.intervals.resize(n);
  spec.fixed.assign(n, 0);
  spec.group.assign(n, -1);

  std::vector<Interval> user(n);
  std::map<std::string, std::vector<int>> named_groups;
  for (size_t i = 0; i < n; ++i) {
    const std::string path = base.layout[i].path();
    for (const auto& r : rules.entries) {
      if (!glob_match(r.path, path)) continue;
      if (r.min) user[i].lo = *r.min;
      if (r.max) user[i].hi = *r.max;
      if (r.fixed) spec.fixed[i] = 1;
      if (!r.group.empty()) named_groups[r.group].push_back(static_cast<int>(i));
    }
  }

  detail::UnionFind uf(n);
  for (const auto& [name, members] : named_groups) {
    for (size_t k = 1; k < members.size(); ++k) uf.unite(members[0], members[k]);
  }
  if (rules.mirror_legs) {
    std::map<std::string, int> by_path;
    for (size_t i = 0; i < n; ++i) by_path[base.layout[i].path()] = static_cast<int>(i);
    for (size_t i = 0; i < n; ++i) {
      const GeneSlot& s = base.layout[i];
      // The lateral direction component is mirrored, not shared.
      if (s.attribute == Attribute::InitDirX) continue;
      const std::string other = detail::mirrored_id(s.owner);
      if (other.empty()) continue;
      auto it = by_path.find(GeneSlot{other, s.attribute}.path());
      if (it != by_path.end()) uf.unite(static_cast<int>(i), it->second);
    }
  }

  for (size_t i = 0; i < n; ++i) {
    const double v = base.values[i];
    Interval iv = global_band(base.layout[i].attribute, v, rules.global_change).intersect(user[i]);
    if (spec.fixed[i]) iv = {v, v};
    spec.intervals[i] = iv;
  }

  std::map<int, std::vector<int>> roots;
  for (size_t i = 0; i < n; ++i) roots[uf.find(static_cast<int>(i))].push_back(static_cast<int>(i));
  for (auto& [root, members] : roots) {
    if (members.size() < 2) continue;
    const double v0 = base.values[members[0]];
    bool any_fixed = false;
    Interval shared;
    for (int m : members) {
      if (base.values[m] != v0) {
        throw Error(ErrorCode::InvalidAttribute,
                    "linked attributes " + base.layout[members[0]].path() + " and " +
                        base.layout[m].path() + " differ in the template");
      }
      any_fixed = any_fixed || spec.fixed[m];
      shared = shared.intersect(spec.intervals[m]);
    }
    if (any_fixed) shared = {v0, v0};
    const int gid = static_cast<int>(spec.groups.size());
    for (int m : members) {
      spec.group[m] = gid;
      spec.intervals[m] = shared;
      spec.fixed[m] = any_fixed ? 1 : 0;
    }
    spec.groups.push_back(members);
  }

  for (size_t i = 0; i < n; ++i) {
    if (spec.intervals[i].empty()) {
      throw Error(ErrorCode::EmptyFeasibleInterval, base.layout[i].path());
    }
  }
  return spec;
}

inline ConstraintSpec resolve_constraints(const AgentGraph& tmpl, double global_change) {
  ConstraintRules rules;
  rules.global_change = global_change;
  return resolve_constraints(tmpl, rules);
}

enum class ViolationKind { OutOfRange, FixedModified, LinkedUnequal, LayoutMismatch };

struct Violation {
  ViolationKind kind;
  int index = -1;
  std::string path;
};

inline std::vector<Violation> validate_constraints(const Gene& gene, const ConstraintSpec& spec) {
  std::vector<Violation> out;
  if (gene.layout != spec.layout || gene.values.size() != spec.size()) {
    out.push_back({ViolationKind::LayoutMismatch, -1, ""});
    return out;
  }
  for (size_t i = 0; i < spec.size(); ++i) {
    const double v = gene.values[i];
    const std::string path = spec.layout[i].path();
    if (spec.fixed[i] && v != spec.template_values[i]) {
      out.push_back({ViolationKind::FixedModified, static_cast<int>(i), path});
    } else if (!spec.intervals[i].contains(v)) {
      out.push_back({ViolationKind::OutOfRange, static_cast<int>(i), path});
    }
  }
  for (const auto& members : spec.groups) {
    for (size_t k = 1; k < members.size(); ++k) {
      if (gene.values[members[k]] != gene.values[members[0]]) {
        out.push_back({ViolationKind::LinkedUnequal, members[k], spec.layout[members[k]].path()});
      }
    }
  }
  return out;
}

inline double uniform_in(const Interval& iv, std::mt19937_64& rng) {
  if (iv.lo == iv.hi) return iv.lo;
  std::uniform_real_distribution<double> dist(iv.lo, iv.hi);
  return std::clamp(dist(rng), iv.lo, iv.hi);
}

/// n genes drawn uniformly inside the feasible box: fixed slots keep the
/// template value and each linked group receives a single shared draw.
inline std::vector<Gene> sample_variants(const AgentGraph& tmpl, const ConstraintSpec& spec,
                                         int n, std::mt19937_64& rng) {
  if (n < 1) throw Error(ErrorCode::ConfigEmpty, "sample_variants needs n >= 1");
  const Gene base = flatten_gene(tmpl);
  if (base.layout != spec.layout) throw Error(ErrorCode::LayoutMismatch, "constraints/template");
  std::vector<Interval> feasible(spec.size());
  for (size_t i = 0; i < spec.size(); ++i) {
    feasible[i] = spec.intervals[i].intersect(
        global_band(spec.layout[i].attribute, base.values[i], spec.global_change));
    if (spec.fixed[i]) feasible[i] = {base.values[i], base.values[i]};
    if (feasible[i].empty()) throw Error(ErrorCode::EmptyFeasibleInterval, spec.layout[i].path());
  }
  for (const auto& members : spec.groups) {
    Interval shared;
    for (int m : members) shared = shared.intersect(feasible[m]);
    if (shared.empty()) throw Error(ErrorCode::EmptyFeasibleInterval, spec.layout[members[0]].path());
    for (int m : members) feasible[m] = shared;
  }

  std::vector<Gene> out;
  out.reserve(n);
  for (int k = 0; k < n; ++k) {
    Gene g = base;
    for (size_t i = 0; i < spec.size(); ++i) {
      if (spec.group[i] >= 0) continue;
      g.values[i] = spec.fixed[i] ? base.values[i] : uniform_in(feasible[i], rng);
    }
    for (const auto& members : spec.groups) {
      const double v = spec.fixed[members[0]] ? base.values[members[0]]
                                              : uniform_in(feasible[members[0]], rng);
      for (int m : members) g.values[m] = v;
    }
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace codesign
