#pragma once

#include <random>
#include <string>

#include "codesign/morphology/constraints.hpp"

namespace codesign {

struct GeneratorConfig {
  int min_body_parts = 1;
  int max_body_parts = 4;
  int min_leg_pairs = 0;
  int max_leg_pairs = 2;
  int segments_per_leg = 2;
  Interval body_length{0.3, 0.5};
  Interval body_radius{0.08, 0.12};
  Interval leg_length{0.25, 0.45};
  Interval leg_radius{0.04, 0.07};
  Interval density{800.0, 1200.0};
  Interval stiffness{20.0, 60.0};
  Interval damping{1.0, 4.0};
  Interval max_effort{10.0, 30.0};
  Interval joint_half_range{0.4, 0.8};
};

namespace detail {

// Reflection across the sagittal (x = 0) plane. Directions flip x; hinge axes
// are pseudo-vectors and flip y and z instead.
inline Eigen::Vector3d mirror_direction(const Eigen::Vector3d& d) { return {-d.x(), d.y(), d.z()}; }
inline Eigen::Vector3d mirror_axis(const Eigen::Vector3d& a) { return {a.x(), -a.y(), -a.z()}; }

}  // namespace detail

/// Two-step random generation: a chain of body parts along +y, then mirrored
/// left/right leg pairs attached to randomly chosen body parts. Geometric
/// overlap is not checked.
inline AgentGraph random_agent(const GeneratorConfig& cfg, std::mt19937_64& rng) {
  const Interval* intervals[] = {&cfg.body_length, &cfg.body_radius, &cfg.leg_length, &cfg.leg_radius,
                                 &cfg.density,     &cfg.stiffness,   &cfg.damping,    &cfg.max_effort,
                                 &cfg.joint_half_range};
  bool bad = cfg.max_body_parts < 1 || cfg.min_body_parts < 1 ||
             cfg.min_body_parts > cfg.max_body_parts || cfg.min_leg_pairs < 0 ||
             cfg.min_leg_pairs > cfg.max_leg_pairs ||
             (cfg.max_leg_pairs > 0 && cfg.segments_per_leg < 1);
  for (const Interval* iv : intervals) bad = bad || iv->empty() || !(iv->lo > 0.0);
  if (bad) throw Error(ErrorCode::ConfigEmpty, "generator config admits no agent");

  auto draw = [&](const Interval& iv) { return uniform_in(iv, rng); };
  auto draw_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  const int body_count = draw_int(cfg.min_body_parts, cfg.max_body_parts);
  const int leg_pairs = draw_int(cfg.min_leg_pairs, cfg.max_leg_pairs);
  const double kp = draw(cfg.stiffness);
  const double kd = draw(cfg.damping);
  const double effort = draw(cfg.max_effort);
  const double density = draw(cfg.density);

  std::vector<BodyPart> parts;
  std::vector<Joint> joints;
  auto make_joint = [&](const std::string& parent, const std::string& child, Eigen::Vector3d axis) {
    Joint j;
    j.parent = parent;
    j.child = child;
    j.axis = axis.normalized();
    const double half = draw(cfg.joint_half_range);
    j.range_lo = -half;
    j.range_hi = half;
    j.stiffness = kp;
    j.damping = kd;
    j.max_effort = effort;
    return j;
  };

  for (int i = 0; i < body_count; ++i) {
    BodyPart b;
    b.id = "B" + std::to_string(i);
    b.part_class = PartClass::Body;
    b.length = draw(cfg.body_length);
    b.radius = draw(cfg.body_radius);
    b.density = density;
    b.attach_pos = i == 0 ? 0.0 : 1.0;
    b.init_dir = Eigen::Vector3d::UnitY();
    parts.push_back(b);
    if (i > 0) {
      // Alternate yaw and pitch hinges along the spine.
      Eigen::Vector3d axis = (i % 2 == 1) ? Eigen::Vector3d::UnitZ() : Eigen::Vector3d::UnitX();
      joints.push_back(make_joint("B" + std::to_string(i - 1), b.id, axis));
    }
  }

  for (int k = 0; k < leg_pairs; ++k) {
    const std::string host = "B" + std::to_string(draw_int(0, body_count - 1));
    const double attach = draw({0.1, 0.9});
    Eigen::Vector3d dir(draw({0.5, 1.0}), draw({-0.3, 0.3}), -draw({0.2, 0.8}));
    dir.normalize();
    Eigen::Vector3d axis = Eigen::Vector3d::UnitX();
    std::string prev_r = host, prev_l = host;
    for (int s = 0; s < cfg.segments_per_leg; ++s) {
      const double len = draw(cfg.leg_length);
      const double rad = draw(cfg.leg_radius);
      BodyPart r;
      r.id = "RL" + std::to_string(k) + "_" + std::to_string(s);
      r.part_class = PartClass::RightLeg;
      r.leg_index = k;
      r.length = len;
      r.radius = rad;
      r.density = density;
      r.attach_pos = s == 0 ? attach : 1.0;
      r.init_dir = dir;
      BodyPart l = r;
      l.id = "LL" + std::to_string(k) + "_" + std::to_string(s);
      l.part_class = PartClass::LeftLeg;
      l.init_dir = detail::mirror_direction(dir);

      Joint jr = make_joint(prev_r, r.id, axis);
      Joint jl = jr;
      jl.parent = prev_l;
      jl.child = l.id;
      jl.axis = detail::mirror_axis(jr.axis);
      parts.push_back(r);
      parts.push_back(l);
      joints.push_back(jr);
      joints.push_back(jl);
      prev_r = r.id;
      prev_l = l.id;

      // Next segment: steeper, with a knee axis perpendicular to the segment.
      Eigen::Vector3d next(dir.x() * 0.3, dir.y(), -1.0);
      axis = dir.cross(Eigen::Vector3d::UnitZ());
      if (axis.norm() < 1e-6) axis = Eigen::Vector3d::UnitX();
      axis.normalize();
      dir = next.normalized();
    }
  }
  return AgentGraph::create(std::move(parts), std::move(joints), "B0");
}

}  // namespace codesign
