#pragma once

// Policy observations s = (s_m, s_p, s_g) and episode termination.

#include <string_view>

#include "codesign/physics/simulator.hpp"

namespace codesign {

struct ObservationDims {
  int morphology = 0;
  int perceptive = 0;
  int global = 0;
  int total() const { return morphology + perceptive + global; }
  bool operator==(const ObservationDims&) const = default;
};

inline constexpr double kMorphologyScale = 0.2;
inline constexpr double kJointVelocityScale = 0.1;

/// Builds observations for one agent. The morphology block is expressed
/// relative to a template with the same topology (relative deviation divided
/// by kMorphologyScale; unit vectors and joint ranges verbatim) and is computed
/// once at construction.
class Observer {
 public:
  Observer(const AgentGraph& tmpl, const AgentGraph& agent,
           Eigen::Vector3d target = Eigen::Vector3d(0.0, 10.0, 0.0))
      : target_(std::move(target)) {
    if (!tmpl.same_topology(agent)) throw Error(ErrorCode::LayoutMismatch, "agent/template topology");
    std::vector<double> m;
    auto rel = [](double v, double t) {
      const double scale = t != 0.0 ? std::abs(t) : 1.0;
      return (v - t) / (scale * kMorphologyScale);
    };
    for (int pi : agent.dfs_order()) {
      const BodyPart& p = agent.parts()[pi];
      const BodyPart& t = tmpl.parts()[pi];
      m.insert(m.end(), {rel(p.length, t.length), rel(p.radius, t.radius), rel(p.density, t.density),
                         rel(p.attach_pos, t.attach_pos), p.init_dir.x(), p.init_dir.y(), p.init_dir.z()});
    }
    for (int ji : agent.dfs_joint_order()) {
      const Joint& j = agent.joints()[ji];
      const Joint& t = tmpl.joints()[ji];
      m.insert(m.end(), {j.axis.x(), j.axis.y(), j.axis.z(), j.range_lo, j.range_hi,
                         rel(j.stiffness, t.stiffness), rel(j.damping, t.damping),
                         rel(j.max_effort, t.max_effort)});
    }
    morph_ = Eigen::Map<Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
    const int parts = static_cast<int>(agent.parts().size());
    const int joints = parts - 1;
    for (int ji : agent.dfs_joint_order()) {
      range_lo_.push_back(agent.joints()[ji].range_lo);
      range_hi_.push_back(agent.joints()[ji].range_hi);
    }
    dims_.morphology = static_cast<int>(morph_.size());
    dims_.perceptive = 1 + 4 + 7 * (parts - 1) + 2 * joints + 6 + joints;
    dims_.global = 7;
  }

  const ObservationDims& dims() const { return dims_; }
  const Eigen::VectorXd& morphology() const { return morph_; }
  const Eigen::Vector3d& target() const { return target_; }

  double normalized_joint(int j, double q) const {
    const double lo = range_lo_[j], hi = range_hi_[j];
    return std::clamp((2.0 * q - lo - hi) / (hi - lo), -1.0, 1.0);
  }

  /// Writes [s_m, s_p, s_g] into out (size dims().total()).
  void observe(const SimState& s, const std::vector<Pose>& poses, Eigen::Ref<Eigen::VectorXd> out) const {
    int k = 0;
    out.segment(k, dims_.morphology) = morph_;
    k += dims_.morphology;

    const Pose& root = poses[0];
    const Eigen::Matrix3d Rt = root.R.transpose();
    Eigen::Quaterniond qr = s.root_quat;
    if (qr.w() < 0.0) qr.coeffs() *= -1.0;
    out[k++] = s.root_pos.z();
    out.segment<4>(k) << qr.w(), qr.x(), qr.y(), qr.z();
    k += 4;
    for (size_t i = 1; i < poses.size(); ++i) {
      out.segment<3>(k) = Rt * (poses[i].p - root.p);
      k += 3;
      Eigen::Quaterniond rel(Rt * poses[i].R);
      if (rel.w() < 0.0) rel.coeffs() *= -1.0;
      out.segment<4>(k) << rel.w(), rel.x(), rel.y(), rel.z();
      k += 4;
    }
    const int nj = static_cast<int>(s.q.size());
    for (int j = 0; j < nj; ++j) {
      out[k++] = normalized_joint(j, s.q[j]);
      out[k++] = kJointVelocityScale * s.qdot[j];
    }
    out.segment<3>(k) = Rt * s.root_lin_vel;
    k += 3;
    out.segment<3>(k) = Rt * s.root_ang_vel;
    k += 3;
    out.segment(k, nj) = s.prev_action;
    k += nj;

    out[k++] = (target_ - s.root_pos).norm();
    out.segment<3>(k) = heading(root.R);
    k += 3;
    out.segment<3>(k) = up(root.R);
  }

  Eigen::VectorXd observe(const SimState& s, const Simulator& sim) const {
    Eigen::VectorXd out(dims_.total());
    observe(s, sim.body_poses(s), out);
    return out;
  }

  static Eigen::Vector3d heading(const Eigen::Matrix3d& R) { return R.col(1); }
  static Eigen::Vector3d up(const Eigen::Matrix3d& R) { return R.col(2); }

 private:
  Eigen::Vector3d target_;
  Eigen::VectorXd morph_;
  std::vector<double> range_lo_, range_hi_;
  ObservationDims dims_;
};

enum class TerminationReason { None, Flipped, WrongDirection, LeftScene, Fell, Diverged };

inline std::string_view termination_name(TerminationReason r) {
  switch (r) {
    case TerminationReason::None: return "none";
    case TerminationReason::Flipped: return "flipped";
    case TerminationReason::WrongDirection: return "wrong_direction";
    case TerminationReason::LeftScene: return "left_scene";
    case TerminationReason::Fell: return "fell";
    case TerminationReason::Diverged: return "diverged";
  }
  return "none";
}

struct TerminationLimits {
  double flip_threshold = 0.2;        // minimum up-vector z component
  double direction_threshold = -0.5;  // minimum heading projection on forward
  double fall_fraction = 0.2;         // of the initial root height
  double scene_half_width = 3.0;      // |x| bound
  double scene_back = -1.0;           // minimum y
  Eigen::Vector3d forward{0.0, 1.0, 0.0};
};

inline TerminationReason terminated(const SimState& s, double initial_height,
                                    const TerminationLimits& limits = {}) {
  if (!s.finite()) return TerminationReason::Diverged;
  const Eigen::Matrix3d R = s.root_quat.toRotationMatrix();
  if (Observer::up(R).z() < limits.flip_threshold) return TerminationReason::Flipped;
  if (Observer::heading(R).dot(limits.forward) < limits.direction_threshold)
    return TerminationReason::WrongDirection;
  if (std::abs(s.root_pos.x()) > limits.scene_half_width || s.root_pos.y() < limits.scene_back)
    return TerminationReason::LeftScene;
  if (s.root_pos.z() < limits.fall_fraction * initial_height) return TerminationReason::Fell;
  return TerminationReason::None;
}

}  // namespace codesign
