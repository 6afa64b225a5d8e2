#pragma once

#include <string>
#include <vector>

#include "codesign/morphology/agent.hpp"

namespace codesign {

enum class Attribute {
  Length,
  Radius,
  Density,
  AttachPos,
  InitDirX,
  InitDirY,
  InitDirZ,
  Stiffness,
  Damping,
  MaxEffort,
};

inline std::string_view attribute_name(Attribute a) {
  switch (a) {
    case Attribute::Length: return "length";
    case Attribute::Radius: return "radius";
    case Attribute::Density: return "density";
    case Attribute::AttachPos: return "attach_pos";
    case Attribute::InitDirX: return "init_dir.x";
    case Attribute::InitDirY: return "init_dir.y";
    case Attribute::InitDirZ: return "init_dir.z";
    case Attribute::Stiffness: return "stiffness";
    case Attribute::Damping: return "damping";
    case Attribute::MaxEffort: return "max_effort";
  }
  return "";
}

inline bool is_direction(Attribute a) {
  return a == Attribute::InitDirX || a == Attribute::InitDirY || a == Attribute::InitDirZ;
}

// Joint attributes are addressed through the joint's child part, which is
// unique because every non-root part has exactly one parent joint.
struct GeneSlot {
  std::string owner;  // part id
  Attribute attribute;

  std::string path() const { return owner + "." + std::string(attribute_name(attribute)); }
  bool operator==(const GeneSlot&) const = default;
};

struct Gene {
  std::vector<double> values;
  std::vector<GeneSlot> layout;

  size_t size() const { return values.size(); }
  bool operator==(const Gene&) const = default;
};

/// Canonical layout: depth-first from the root; each part's attributes, then
/// for each child joint its PD attributes followed by the child subtree. The
/// root carries no attach_pos (it has no parent).
inline std::vector<GeneSlot> gene_layout(const AgentGraph& g) {
  std::vector<GeneSlot> layout;
  const auto& parts = g.parts();
  auto emit_part = [&](int idx) {
    const std::string& id = parts[idx].id;
    layout.push_back({id, Attribute::Length});
    layout.push_back({id, Attribute::Radius});
    layout.push_back({id, Attribute::Density});
    if (idx != g.root_index()) layout.push_back({id, Attribute::AttachPos});
    layout.push_back({id, Attribute::InitDirX});
    layout.push_back({id, Attribute::InitDirY});
    layout.push_back({id, Attribute::InitDirZ});
  };
  auto emit_joint = [&](const Joint& j) {
    layout.push_back({j.child, Attribute::Stiffness});
    layout.push_back({j.child, Attribute::Damping});
    layout.push_back({j.child, Attribute::MaxEffort});
  };
  // dfs_order() already yields root, then each child subtree in joint order,
  // so a part's parent joint immediately precedes the part itself.
  for (int idx : g.dfs_order()) {
    int pj = g.parent_joint(idx);
    if (pj >= 0) emit_joint(g.joints()[pj]);
    emit_part(idx);
  }
  return layout;
}

namespace detail {

inline double read_slot(const AgentGraph& g, const GeneSlot& s) {
  const int idx = g.part_index(s.owner);
  const BodyPart& p = g.parts()[idx];
  auto joint = [&]() -> const Joint& {
    int pj = g.parent_joint(idx);
    if (pj < 0) throw Error(ErrorCode::LayoutMismatch, s.path() + ": root has no joint");
    return g.joints()[pj];
  };
  switch (s.attribute) {
    case Attribute::Length: return p.length;
    case Attribute::Radius: return p.radius;
    case Attribute::Density: return p.density;
    case Attribute::AttachPos: return p.attach_pos;
    case Attribute::InitDirX: return p.init_dir.x();
    case Attribute::InitDirY: return p.init_dir.y();
    case Attribute::InitDirZ: return p.init_dir.z();
    case Attribute::Stiffness: return joint().stiffness;
    case Attribute::Damping: return joint().damping;
    case Attribute::MaxEffort: return joint().max_effort;
  }
  return 0.0;
}

}  // namespace detail

inline Gene flatten_gene(const AgentGraph& g) {
  Gene gene;
  gene.layout = gene_layout(g);
  gene.values.reserve(gene.layout.size());
  for (const auto& s : gene.layout) gene.values.push_back(detail::read_slot(g, s));
  return gene;
}

/// Writes the gene's values into a copy of the template.
///
/// Directions are re-normalised here, on the phenotype side, so the gene itself
/// can stay inside its constraint box. A direction already unit to within
/// 1e-15 is kept verbatim, which keeps apply(flatten(A)) == A bit-exact.
inline AgentGraph apply_gene(const AgentGraph& tmpl, const Gene& gene) {
  if (gene.values.size() != gene.layout.size()) {
    throw Error(ErrorCode::LayoutMismatch, "gene values/layout length differ");
  }
  const auto expected = gene_layout(tmpl);
  if (gene.layout != expected) {
    throw Error(ErrorCode::LayoutMismatch, "gene layout does not match template topology");
  }
  std::vector<BodyPart> parts = tmpl.parts();
  std::vector<Joint> joints = tmpl.joints();
  for (size_t i = 0; i < gene.size(); ++i) {
    const GeneSlot& s = gene.layout[i];
    const double v = gene.values[i];
    const int idx = tmpl.part_index(s.owner);
    BodyPart& p = parts[idx];
    switch (s.attribute) {
      case Attribute::Length: p.length = v; break;
      case Attribute::Radius: p.radius = v; break;
      case Attribute::Density: p.density = v; break;
      case Attribute::AttachPos: p.attach_pos = v; break;
      case Attribute::InitDirX: p.init_dir.x() = v; break;
      case Attribute::InitDirY: p.init_dir.y() = v; break;
      case Attribute::InitDirZ: p.init_dir.z() = v; break;
      case Attribute::Stiffness: joints[tmpl.parent_joint(idx)].stiffness = v; break;
      case Attribute::Damping: joints[tmpl.parent_joint(idx)].damping = v; break;
      case Attribute::MaxEffort: joints[tmpl.parent_joint(idx)].max_effort = v; break;
    }
  }
  for (auto& p : parts) {
    const double n = p.init_dir.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw Error(ErrorCode::BadUnitVector, "init_dir of '" + p.id + "' is degenerate");
    }
    if (std::abs(n - 1.0) > 1e-15) p.init_dir /= n;
  }
  return AgentGraph::create(std::move(parts), std::move(joints), tmpl.root());
}

}  // namespace codesign
