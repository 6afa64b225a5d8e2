#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "codesign/morphology/agent.hpp"
#include "codesign/physics/spatial.hpp"

namespace codesign {

struct ContactParams {
  double ground_stiffness = 2.0e4;  // N/m
  double ground_damping = 2.0e2;    // N s/m
  double friction_coeff = 1.0;
  double ground_height = 0.0;
  // Tangential force is -min(mu * f_n, slip_damping * |v_t|) along v_t, a
  // viscous regularisation of Coulomb friction near zero slip.
  double slip_damping = 2.0e2;  // N s/m
};

struct SimConfig {
  double dt = 1.0 / 60.0;
  int substeps = 8;
  Eigen::Vector3d gravity{0.0, 0.0, -9.81};
  ContactParams contact;
  bool ground_contact = true;
  bool self_collision = false;
  double self_collision_stiffness = 2.0e4;
  double self_collision_damping = 1.0e2;
  double limit_stiffness = 200.0;  // N m / rad beyond the joint range
  double limit_damping = 2.0;
  double spawn_clearance = 0.02;  // m between the lowest capsule point and the ground
  bool fixed_root = false;        // pin the root body in place (test rigs)
};

struct CapsuleInertia {
  double mass = 0.0;
  double axial = 0.0;  // about the capsule axis through the centre of mass
  double perp = 0.0;   // about any perpendicular axis through the centre of mass
};

inline CapsuleInertia capsule_inertia(double length, double radius, double density) {
  constexpr double pi = std::numbers::pi;
  const double r2 = radius * radius;
  const double mc = density * pi * r2 * length;
  const double ms = density * (4.0 / 3.0) * pi * r2 * radius;
  CapsuleInertia out;
  out.mass = mc + ms;
  out.axial = mc * r2 / 2.0 + ms * 2.0 * r2 / 5.0;
  out.perp = mc * (length * length / 12.0 + r2 / 4.0) +
             ms * (2.0 * r2 / 5.0 + length * length / 4.0 + 3.0 * length * radius / 8.0);
  return out;
}

/// One rigid body of the articulated model. Body 0 is the root; every other
/// body hangs off an earlier one through a hinge.
struct RigidBody {
  std::string id;
  int parent = -1;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitX();  // hinge axis, parent and child frames
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();  // joint origin in the parent frame
  double mass = 0.0;
  Eigen::Vector3d com = Eigen::Vector3d::Zero();
  Eigen::Matrix3d inertia_com = Eigen::Matrix3d::Zero();
  Matrix6d inertia = Matrix6d::Zero();
  Eigen::Vector3d seg_a = Eigen::Vector3d::Zero();  // capsule segment end points
  Eigen::Vector3d seg_b = Eigen::Vector3d::Zero();
  double radius = 0.0;
  double contact_mass = 0.0;  // free-body effective mass at a capsule end, lower bound
  double friction_scale = 1.0;
  double range_lo = 0.0, range_hi = 0.0;
  double stiffness = 0.0, damping = 0.0, max_effort = 0.0;
};

/// Rigid-body model of an agent. Bodies follow the graph's depth-first order,
/// so joint k of every joint-space vector drives body k + 1.
struct PhysicsModel {
  std::vector<RigidBody> bodies;
  std::vector<std::pair<int, int>> collision_pairs;

  int body_count() const { return static_cast<int>(bodies.size()); }
  int joint_count() const { return body_count() - 1; }
  double total_mass() const {
    double m = 0.0;
    for (const auto& b : bodies) m += b.mass;
    return m;
  }
};

namespace detail {

// Closest points between segments p1-q1 and p2-q2; returns squared distance.
inline double segment_closest(const Eigen::Vector3d& p1, const Eigen::Vector3d& q1,
                              const Eigen::Vector3d& p2, const Eigen::Vector3d& q2,
                              Eigen::Vector3d& c1, Eigen::Vector3d& c2) {
  const Eigen::Vector3d d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
  const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
  double s = 0.0, t = 0.0;
  constexpr double eps = 1e-12;
  if (a <= eps && e <= eps) {
    s = t = 0.0;
  } else if (a <= eps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= eps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2), denom = a * e - b * b;
      s = denom > eps ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  c1 = p1 + d1 * s;
  c2 = p2 + d2 * t;
  return (c1 - c2).squaredNorm();
}

}  // namespace detail

inline PhysicsModel build_physics_model(const AgentGraph& g) {
  PhysicsModel model;
  const auto& order = g.dfs_order();
  std::vector<int> slot(g.parts().size(), -1);
  for (size_t k = 0; k < order.size(); ++k) slot[order[k]] = static_cast<int>(k);

  for (int pi : order) {
    const BodyPart& p = g.parts()[pi];
    RigidBody b;
    b.id = p.id;
    const int pj = g.parent_joint(pi);
    const Eigen::Vector3d d = p.init_dir;
    if (pj < 0) {
      b.seg_a = -0.5 * p.length * d;
      b.seg_b = 0.5 * p.length * d;
    } else {
      const Joint& j = g.joints()[pj];
      const int parent = g.part_index(j.parent);
      const BodyPart& pp = g.parts()[parent];
      const double along = parent == g.root_index() ? p.attach_pos - 0.5 : p.attach_pos;
      b.parent = slot[parent];
      b.offset = along * pp.length * pp.init_dir;
      b.axis = j.axis;
      b.range_lo = j.range_lo;
      b.range_hi = j.range_hi;
      b.stiffness = j.stiffness;
      b.damping = j.damping;
      b.max_effort = j.max_effort;
      b.friction_scale = j.friction;
      b.seg_a = Eigen::Vector3d::Zero();
      b.seg_b = p.length * d;
    }
    const CapsuleInertia ci = capsule_inertia(p.length, p.radius, p.density);
    b.mass = ci.mass;
    b.com = 0.5 * (b.seg_a + b.seg_b);
    b.inertia_com = ci.perp * Eigen::Matrix3d::Identity() + (ci.axial - ci.perp) * d * d.transpose();
    b.inertia = spatial_inertia(b.mass, b.com, b.inertia_com);
    b.radius = p.radius;
    const double reach2 = 0.25 * p.length * p.length + p.radius * p.radius;
    b.contact_mass = 1.0 / (1.0 / ci.mass + reach2 / std::min(ci.perp, ci.axial));
    model.bodies.push_back(b);
  }

  // Self-collision candidates: bodies that are neither parent and child nor
  // already touching in the reference pose (e.g. legs sharing a hip).
  const int n = model.body_count();
  std::vector<Eigen::Vector3d> origin(n, Eigen::Vector3d::Zero());
  for (int i = 1; i < n; ++i) origin[i] = origin[model.bodies[i].parent] + model.bodies[i].offset;
  for (int i = 0; i < n; ++i) {
    for (int k = i + 1; k < n; ++k) {
      const RigidBody& a = model.bodies[i];
      const RigidBody& b = model.bodies[k];
      if (b.parent == i || a.parent == k) continue;
      Eigen::Vector3d c1, c2;
      const double d2 = detail::segment_closest(origin[i] + a.seg_a, origin[i] + a.seg_b,
                                                origin[k] + b.seg_a, origin[k] + b.seg_b, c1, c2);
      const double reach = a.radius + b.radius;
      if (d2 < reach * reach) continue;
      model.collision_pairs.emplace_back(i, k);
    }
  }
  return model;
}

}  // namespace codesign
