#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "codesign/error.hpp"

namespace codesign {

enum class PartClass { Body, LeftLeg, RightLeg };

inline std::string_view part_class_name(PartClass c) {
  switch (c) {
    case PartClass::Body: return "B";
    case PartClass::LeftLeg: return "LL";
    case PartClass::RightLeg: return "RL";
  }
  return "B";
}

inline PartClass parse_part_class(std::string_view s) {
  if (s == "B") return PartClass::Body;
  if (s == "LL") return PartClass::LeftLeg;
  if (s == "RL") return PartClass::RightLeg;
  throw Error(ErrorCode::ParseError, "unknown part class '" + std::string(s) + "'");
}

// A capsule. For the root the body frame sits at the capsule centre; for every
// other part it sits at the attachment point and the capsule extends from there
// along init_dir.
struct BodyPart {
  std::string id;
  PartClass part_class = PartClass::Body;
  int leg_index = 0;  // k in LL_k / RL_k; unused for body parts
  double length = 0.0;
  double radius = 0.0;
  double density = 0.0;
  double attach_pos = 0.0;  // fraction along the parent capsule
  Eigen::Vector3d init_dir = Eigen::Vector3d::UnitY();

  bool operator==(const BodyPart& o) const {
    return id == o.id && part_class == o.part_class && leg_index == o.leg_index &&
           length == o.length && radius == o.radius && density == o.density &&
           attach_pos == o.attach_pos && init_dir == o.init_dir;
  }
};

struct Joint {
  std::string parent;
  std::string child;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitX();
  double range_lo = -1.0;
  double range_hi = 1.0;
  double stiffness = 0.0;
  double damping = 0.0;
  double max_effort = 1.0;
  double friction = 1.0;

  bool operator==(const Joint& o) const {
    return parent == o.parent && child == o.child && axis == o.axis &&
           range_lo == o.range_lo && range_hi == o.range_hi &&
           stiffness == o.stiffness && damping == o.damping &&
           max_effort == o.max_effort && friction == o.friction;
  }
};

inline constexpr double kUnitTolerance = 1e-9;

inline double capsule_volume(double length, double radius) {
  constexpr double pi = std::numbers::pi;
  return pi * radius * radius * length + (4.0 / 3.0) * pi * radius * radius * radius;
}

inline double capsule_mass(double length, double radius, double density) {
  if (!(length > 0.0) || !(radius > 0.0) || !(density > 0.0)) {
    throw Error(ErrorCode::NonPositiveDimension, "capsule dimensions and density must be > 0");
  }
  return density * capsule_volume(length, radius);
}

/// Validated tree of capsules connected by hinge joints.
///
/// Construction goes through create(), which checks every invariant and
/// precomputes the topology: the parent joint of each part, the child joints of
/// each part, and a depth-first ordering of the parts starting at the root.
/// Instances are immutable.
class AgentGraph {
 public:
  static AgentGraph create(std::vector<BodyPart> parts, std::vector<Joint> joints,
                           std::string root) {
    AgentGraph g;
    g.parts_ = std::move(parts);
    g.joints_ = std::move(joints);
    g.root_ = std::move(root);
    g.validate_and_index();
    return g;
  }

  const std::vector<BodyPart>& parts() const { return parts_; }
  const std::vector<Joint>& joints() const { return joints_; }
  const std::string& root() const { return root_; }
  int root_index() const { return root_index_; }

  int part_index(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw Error(ErrorCode::UnknownId, "no part '" + id + "'");
    return it->second;
  }
  const BodyPart& part(const std::string& id) const { return parts_[part_index(id)]; }

  // Index into joints() of the joint whose child is part i, or -1 for the root.
  int parent_joint(int part) const { return parent_joint_[part]; }
  const std::vector<int>& child_joints(int part) const { return child_joints_[part]; }

  // Parts in depth-first order (root first, children in declaration order).
  const std::vector<int>& dfs_order() const { return dfs_order_; }

  // Joints in the order their child parts appear in dfs_order().
  std::vector<int> dfs_joint_order() const {
    std::vector<int> out;
    for (int p : dfs_order_) {
      if (parent_joint_[p] >= 0) out.push_back(parent_joint_[p]);
    }
    return out;
  }

  bool operator==(const AgentGraph& o) const {
    return root_ == o.root_ && parts_ == o.parts_ && joints_ == o.joints_;
  }

  // Same agent with parts and joints listed in depth-first order.
  AgentGraph canonical() const {
    std::vector<BodyPart> parts;
    std::vector<Joint> joints;
    for (int p : dfs_order_) parts.push_back(parts_[p]);
    for (int j : dfs_joint_order()) joints.push_back(joints_[j]);
    return create(std::move(parts), std::move(joints), root_);
  }

  // True when both graphs have the same ids, classes and joint connectivity.
  bool same_topology(const AgentGraph& o) const {
    if (root_ != o.root_ || parts_.size() != o.parts_.size() ||
        joints_.size() != o.joints_.size())
      return false;
    for (size_t i = 0; i < parts_.size(); ++i) {
      if (parts_[i].id != o.parts_[i].id || parts_[i].part_class != o.parts_[i].part_class)
        return false;
    }
    for (size_t j = 0; j < joints_.size(); ++j) {
      if (joints_[j].parent != o.joints_[j].parent || joints_[j].child != o.joints_[j].child)
        return false;
    }
    return true;
  }

 private:
  AgentGraph() = default;

  static void check_unit(const Eigen::Vector3d& v, const std::string& what) {
    if (!v.allFinite() || std::abs(v.norm() - 1.0) > kUnitTolerance) {
      throw Error(ErrorCode::BadUnitVector, what + " is not a unit vector");
    }
  }

  void validate_and_index() {
    if (parts_.empty()) throw Error(ErrorCode::ConfigEmpty, "agent has no parts");
    for (size_t i = 0; i < parts_.size(); ++i) {
      const BodyPart& p = parts_[i];
      if (!index_.emplace(p.id, static_cast<int>(i)).second) {
        throw Error(ErrorCode::ParseError, "duplicate part id '" + p.id + "'");
      }
      if (!(p.length > 0.0) || !(p.radius > 0.0) || !(p.density > 0.0)) {
        throw Error(ErrorCode::NonPositiveDimension, "part '" + p.id + "'");
      }
      if (!(p.attach_pos >= 0.0 && p.attach_pos <= 1.0)) {
        throw Error(ErrorCode::InvalidAttribute, "attach_pos of '" + p.id + "' outside [0,1]");
      }
      check_unit(p.init_dir, "init_dir of '" + p.id + "'");
    }
    auto root_it = index_.find(root_);
    if (root_it == index_.end()) throw Error(ErrorCode::UnknownId, "root '" + root_ + "'");
    root_index_ = root_it->second;

    const int n = static_cast<int>(parts_.size());
    parent_joint_.assign(n, -1);
    child_joints_.assign(n, {});
    for (size_t j = 0; j < joints_.size(); ++j) {
      const Joint& jt = joints_[j];
      const std::string tag = "joint " + jt.parent + "->" + jt.child;
      auto pi = index_.find(jt.parent);
      auto ci = index_.find(jt.child);
      if (pi == index_.end()) throw Error(ErrorCode::UnknownId, tag + ": parent");
      if (ci == index_.end()) throw Error(ErrorCode::UnknownId, tag + ": child");
      if (!(jt.range_lo < jt.range_hi)) throw Error(ErrorCode::InvalidAttribute, tag + ": range");
      if (!(jt.stiffness >= 0.0) || !(jt.damping >= 0.0) || !(jt.friction >= 0.0)) {
        throw Error(ErrorCode::InvalidAttribute, tag + ": negative gain");
      }
      if (!(jt.max_effort > 0.0)) throw Error(ErrorCode::NonPositiveDimension, tag + ": max_effort");
      check_unit(jt.axis, tag + " axis");
      if (ci->second == pi->second) throw Error(ErrorCode::CycleDetected, tag);
      if (ci->second == root_index_) {
        throw Error(ErrorCode::CycleDetected, tag + ": root cannot be a child");
      }
      if (parent_joint_[ci->second] >= 0) {
        throw Error(ErrorCode::MultipleParents, tag);
      }
      parent_joint_[ci->second] = static_cast<int>(j);
      child_joints_[pi->second].push_back(static_cast<int>(j));
    }

    // Walk parent links from every node: either we reach the root, we revisit a
    // node (cycle), or we stop at a parentless non-root part (disconnected).
    for (int start = 0; start < n; ++start) {
      std::vector<char> seen(n, 0);
      int cur = start;
      while (cur != root_index_) {
        if (seen[cur]) throw Error(ErrorCode::CycleDetected, "through part '" + parts_[cur].id + "'");
        seen[cur] = 1;
        int pj = parent_joint_[cur];
        if (pj < 0) throw Error(ErrorCode::DisconnectedPart, "part '" + parts_[cur].id + "'");
        cur = index_.at(joints_[pj].parent);
      }
    }

    dfs_order_.clear();
    std::vector<int> stack{root_index_};
    while (!stack.empty()) {
      int p = stack.back();
      stack.pop_back();
      dfs_order_.push_back(p);
      const auto& cj = child_joints_[p];
      for (auto it = cj.rbegin(); it != cj.rend(); ++it) {
        stack.push_back(index_.at(joints_[*it].child));
      }
    }
  }

  std::vector<BodyPart> parts_;
  std::vector<Joint> joints_;
  std::string root_;
  int root_index_ = 0;
  std::unordered_map<std::string, int> index_;
  std::vector<int> parent_joint_;
  std::vector<std::vector<int>> child_joints_;
  std::vector<int> dfs_order_;
};

}  // namespace codesign
