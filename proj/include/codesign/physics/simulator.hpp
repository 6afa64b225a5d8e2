#pragma once

// Floating-base articulated-body dynamics with penalty ground contact.
//
// Generalised coordinates: root position and orientation (world), one angle per
// hinge. Root velocity is stored in world coordinates (linear velocity of the
// root frame origin and angular velocity). Each control step of dt is split
// into fixed substeps advanced with kick-drift-kick velocity Verlet (the
// closing kick evaluates forces at a predicted end-of-step velocity); the
// articulated-body algorithm runs in body coordinates.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "codesign/morphology/agent.hpp"
#include "codesign/physics/model.hpp"

namespace codesign {

struct SimState {
  Eigen::VectorXd q;
  Eigen::VectorXd qdot;
  Eigen::Vector3d root_pos = Eigen::Vector3d::Zero();
  Eigen::Quaterniond root_quat = Eigen::Quaterniond::Identity();
  Eigen::Vector3d root_lin_vel = Eigen::Vector3d::Zero();  // world
  Eigen::Vector3d root_ang_vel = Eigen::Vector3d::Zero();  // world
  double t = 0.0;
  Eigen::VectorXd prev_action;

  bool finite() const {
    return q.allFinite() && qdot.allFinite() && root_pos.allFinite() &&
           root_quat.coeffs().allFinite() && root_lin_vel.allFinite() && root_ang_vel.allFinite();
  }
};

struct Pose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
};

/// Joint torque under PD control towards target, clamped to +-max_effort.
inline double pd_torque(double target, double q, double qdot, double stiffness, double damping,
                        double max_effort) {
  return std::clamp(stiffness * (target - q) - damping * qdot, -max_effort, max_effort);
}

class Simulator {
 public:
  Simulator(const AgentGraph& agent, SimConfig cfg = {})
      : model_(build_physics_model(agent)), cfg_(std::move(cfg)) {
    const int n = model_.body_count();
    pose_.resize(n);
    vel_.resize(n);
    bias_.resize(n);
    IA_.resize(n);
    pA_.resize(n);
    U_.resize(n);
    D_.resize(n);
    u_.resize(n);
    acc_.resize(n);
    X_.resize(n);
    fext_.resize(n);
  }

  const PhysicsModel& model() const { return model_; }
  const SimConfig& config() const { return cfg_; }
  int joint_count() const { return model_.joint_count(); }

  /// Standing pose at the origin: joint angles drawn uniformly within
  /// +-randomization (clamped to the joint range), root lifted so the lowest
  /// capsule point clears the ground by spawn_clearance.
  SimState init(const Eigen::VectorXd& randomization, std::mt19937_64& rng) const {
    const int nj = joint_count();
    SimState s;
    s.q = Eigen::VectorXd::Zero(nj);
    s.qdot = Eigen::VectorXd::Zero(nj);
    s.prev_action = Eigen::VectorXd::Zero(nj);
    for (int j = 0; j < nj; ++j) {
      const double r = randomization.size() == 0 ? 0.0 : randomization[std::min<int>(j, randomization.size() - 1)];
      double v = 0.0;
      if (r > 0.0) v = std::uniform_real_distribution<double>(-r, r)(rng);
      const RigidBody& b = model_.bodies[j + 1];
      s.q[j] = std::clamp(v, b.range_lo, b.range_hi);
    }
    if (!cfg_.fixed_root) {
      double lowest = std::numeric_limits<double>::infinity();
      for (const auto& [a, b, r] : capsules(s)) lowest = std::min({lowest, a.z() - r, b.z() - r});
      s.root_pos.z() = cfg_.contact.ground_height + cfg_.spawn_clearance - lowest;
    }
    return s;
  }

  SimState init(double randomization, std::mt19937_64& rng) const {
    return init(Eigen::VectorXd::Constant(1, randomization), rng);
  }

  Eigen::VectorXd pd_torques(const Eigen::VectorXd& target, const SimState& s) const {
    Eigen::VectorXd tau(joint_count());
    for (int j = 0; j < joint_count(); ++j) {
      const RigidBody& b = model_.bodies[j + 1];
      tau[j] = pd_torque(target[j], s.q[j], s.qdot[j], b.stiffness, b.damping, b.max_effort);
    }
    return tau;
  }

  /// One control step with constant joint torques.
  void step(SimState& s, const Eigen::VectorXd& torques) {
    check_size(torques);
    advance(s, [&](const SimState&, Eigen::VectorXd& tau, Eigen::VectorXd& arm) {
      tau = torques;
      arm.setZero();
    });
  }

  /// One control step under PD control; the torque is recomputed each substep.
  void step_pd(SimState& s, const Eigen::VectorXd& targets) {
    check_size(targets);
    const double h = cfg_.dt / cfg_.substeps;
    advance(s, [&](const SimState& cur, Eigen::VectorXd& tau, Eigen::VectorXd& arm) {
      for (int j = 0; j < joint_count(); ++j) {
        const RigidBody& b = model_.bodies[j + 1];
        const double raw = b.stiffness * (targets[j] - cur.q[j]) - b.damping * cur.qdot[j];
        tau[j] = std::clamp(raw, -b.max_effort, b.max_effort);
        // Unsaturated drives are integrated implicitly: the torque change over
        // one substep, -(kd h + kp h^2) qdd, acts like extra joint inertia.
        arm[j] = std::abs(raw) <= b.max_effort ? b.damping * h + b.stiffness * h * h : 0.0;
      }
    });
  }

  /// World pose of every body frame.
  std::vector<Pose> body_poses(const SimState& s) const {
    std::vector<Pose> out(model_.body_count());
    out[0].R = s.root_quat.toRotationMatrix();
    out[0].p = s.root_pos;
    for (int i = 1; i < model_.body_count(); ++i) {
      const RigidBody& b = model_.bodies[i];
      const Pose& P = out[b.parent];
      out[i].R = P.R * Eigen::AngleAxisd(s.q[i - 1], b.axis).toRotationMatrix();
      out[i].p = P.p + P.R * b.offset;
    }
    return out;
  }

  // Body poses used by the most recent dynamics evaluation, which runs on the
  // final positions of the last substep.
  const std::vector<Pose>& internal_poses() const { return pose_; }

  struct Capsule {
    Eigen::Vector3d a, b;
    double radius;
  };
  std::vector<Capsule> capsules(const SimState& s) const {
    auto poses = body_poses(s);
    std::vector<Capsule> out;
    for (int i = 0; i < model_.body_count(); ++i) {
      const RigidBody& b = model_.bodies[i];
      out.push_back({poses[i].p + poses[i].R * b.seg_a, poses[i].p + poses[i].R * b.seg_b, b.radius});
    }
    return out;
  }

  /// Kinetic plus gravitational potential energy.
  double energy(const SimState& s) {
    kinematics(s);
    double e = 0.0;
    for (int i = 0; i < model_.body_count(); ++i) {
      const RigidBody& b = model_.bodies[i];
      e += 0.5 * vel_[i].dot(b.inertia * vel_[i]);
      e -= b.mass * cfg_.gravity.dot(pose_[i].p + pose_[i].R * b.com);
    }
    return e;
  }

  /// Total linear and angular momentum about the world origin.
  std::pair<Eigen::Vector3d, Eigen::Vector3d> momentum(const SimState& s) {
    kinematics(s);
    Eigen::Vector3d lin = Eigen::Vector3d::Zero(), ang = Eigen::Vector3d::Zero();
    for (int i = 0; i < model_.body_count(); ++i) {
      const Vector6d h = model_.bodies[i].inertia * vel_[i];  // body coords, about body origin
      const Eigen::Vector3d f = pose_[i].R * h.tail<3>();
      lin += f;
      ang += pose_[i].R * h.head<3>() + pose_[i].p.cross(f);
    }
    return {lin, ang};
  }

  /// Generalised acceleration [root linear (world); root angular (world); qdd].
  Eigen::VectorXd accelerations(const SimState& s, const Eigen::VectorXd& torques) {
    Eigen::VectorXd out(6 + joint_count());
    dynamics(s, torques, Eigen::VectorXd::Zero(joint_count()), out);
    return out;
  }

 private:
  void check_size(const Eigen::VectorXd& v) const {
    if (v.size() != joint_count()) throw Error(ErrorCode::ShapeMismatch, "command length != joint count");
  }

  template <class Command>
  void advance(SimState& s, Command&& command) {
    const int nj = joint_count();
    const double h = cfg_.dt / cfg_.substeps;
    Eigen::VectorXd tau(nj), arm(nj), acc(6 + nj), qdot_half(nj);
    auto kick = [&](double dt) {
      if (!cfg_.fixed_root) {
        s.root_lin_vel += dt * acc.head<3>();
        s.root_ang_vel += dt * acc.segment<3>(3);
      }
      s.qdot += dt * acc.tail(nj);
    };
    for (int k = 0; k < cfg_.substeps; ++k) {
      command(s, tau, arm);
      dynamics(s, tau, arm, acc);
      kick(0.5 * h);
      if (!cfg_.fixed_root) {
        s.root_pos += h * s.root_lin_vel;
        const Eigen::Vector3d rot = h * s.root_ang_vel;
        const double angle = rot.norm();
        if (angle > 0.0) {
          s.root_quat = Eigen::Quaterniond(Eigen::AngleAxisd(angle, rot / angle)) * s.root_quat;
        }
        s.root_quat.normalize();
      }
      s.q += h * s.qdot;
      // Velocity-dependent forces see a predicted end-of-step velocity.
      const Eigen::Vector3d lin_half = s.root_lin_vel, ang_half = s.root_ang_vel;
      qdot_half = s.qdot;
      kick(0.5 * h);
      command(s, tau, arm);
      dynamics(s, tau, arm, acc);
      s.root_lin_vel = lin_half;
      s.root_ang_vel = ang_half;
      s.qdot = qdot_half;
      kick(0.5 * h);
      if (!s.finite() || !acc.allFinite()) {
        throw Error(ErrorCode::NumericalDivergence, "non-finite simulator state");
      }
    }
    s.t += cfg_.dt;
  }

  // Poses, body velocities and velocity-product terms for state s.
  void kinematics(const SimState& s) {
    const int n = model_.body_count();
    const Eigen::Matrix3d R0 = s.root_quat.toRotationMatrix();
    pose_[0].R = R0;
    pose_[0].p = s.root_pos;
    vel_[0].setZero();
    if (!cfg_.fixed_root) {
      vel_[0].head<3>() = R0.transpose() * s.root_ang_vel;
      vel_[0].tail<3>() = R0.transpose() * s.root_lin_vel;
    }
    bias_[0].setZero();
    for (int i = 1; i < n; ++i) {
      const RigidBody& b = model_.bodies[i];
      const Eigen::Matrix3d Rj = Eigen::AngleAxisd(s.q[i - 1], b.axis).toRotationMatrix();
      X_[i].E = Rj.transpose();
      X_[i].r = b.offset;
      const Pose& P = pose_[b.parent];
      pose_[i].R = P.R * Rj;
      pose_[i].p = P.p + P.R * b.offset;
      Vector6d vJ;
      vJ.head<3>() = b.axis * s.qdot[i - 1];
      vJ.tail<3>().setZero();
      vel_[i] = X_[i].apply_motion(vel_[b.parent]) + vJ;
      bias_[i] = motion_cross(vel_[i], vJ);
    }
  }

  // World velocity of a point given in body i coordinates.
  Eigen::Vector3d point_velocity(int i, const Eigen::Vector3d& p_body) const {
    return pose_[i].R * (vel_[i].tail<3>() + vel_[i].head<3>().cross(p_body));
  }

  void add_world_force(int i, const Eigen::Vector3d& point_world, const Eigen::Vector3d& f_world) {
    const Eigen::Matrix3d Rt = pose_[i].R.transpose();
    fext_[i] += point_force(Rt * (point_world - pose_[i].p), Rt * f_world);
  }

  void external_forces() {
    const int n = model_.body_count();
    for (int i = 0; i < n; ++i) {
      const RigidBody& b = model_.bodies[i];
      fext_[i] = point_force(b.com, b.mass * (pose_[i].R.transpose() * cfg_.gravity));
    }
    if (cfg_.ground_contact) {
      const ContactParams& c = cfg_.contact;
      const double h = cfg_.dt / cfg_.substeps;
      for (int i = 0; i < n; ++i) {
        const RigidBody& b = model_.bodies[i];
        // Gains are capped where explicit integration of this body alone
        // would stop being stable at the substep.
        const double k = std::min(c.ground_stiffness, b.contact_mass / (h * h));
        const double cd = std::min(c.ground_damping, b.contact_mass / h);
        const double cs = std::min(c.slip_damping, b.contact_mass / h);
        for (const Eigen::Vector3d* end : {&b.seg_a, &b.seg_b}) {
          const Eigen::Vector3d centre = pose_[i].p + pose_[i].R * *end;
          const double depth = c.ground_height - (centre.z() - b.radius);
          if (depth <= 0.0) continue;
          const Eigen::Vector3d contact(centre.x(), centre.y(), c.ground_height);
          const Eigen::Vector3d v = point_velocity(i, pose_[i].R.transpose() * (contact - pose_[i].p));
          const double fn = std::max(0.0, k * depth - cd * v.z());
          Eigen::Vector3d f(0.0, 0.0, fn);
          const Eigen::Vector2d vt(v.x(), v.y());
          const double speed = vt.norm();
          if (speed > 0.0 && fn > 0.0) {
            const double mu = c.friction_coeff * b.friction_scale;
            const double ft = std::min(mu * fn, cs * speed);
            f.x() = -ft * vt.x() / speed;
            f.y() = -ft * vt.y() / speed;
          }
          add_world_force(i, contact, f);
        }
      }
    }
    if (cfg_.self_collision) {
      for (const auto& [i, k] : model_.collision_pairs) {
        const RigidBody& a = model_.bodies[i];
        const RigidBody& b = model_.bodies[k];
        Eigen::Vector3d c1, c2;
        const double d2 = detail::segment_closest(
            pose_[i].p + pose_[i].R * a.seg_a, pose_[i].p + pose_[i].R * a.seg_b,
            pose_[k].p + pose_[k].R * b.seg_a, pose_[k].p + pose_[k].R * b.seg_b, c1, c2);
        const double reach = a.radius + b.radius;
        if (d2 >= reach * reach || d2 <= 1e-24) continue;
        const double dist = std::sqrt(d2);
        const Eigen::Vector3d nrm = (c1 - c2) / dist;  // from b towards a
        const Eigen::Vector3d mid = 0.5 * (c1 + c2);
        const double vrel = (point_velocity(i, pose_[i].R.transpose() * (mid - pose_[i].p)) -
                             point_velocity(k, pose_[k].R.transpose() * (mid - pose_[k].p)))
                                .dot(nrm);
        const double fn = std::max(
            0.0, cfg_.self_collision_stiffness * (reach - dist) - cfg_.self_collision_damping * vrel);
        add_world_force(i, mid, fn * nrm);
        add_world_force(k, mid, -fn * nrm);
      }
    }
  }

  void dynamics(const SimState& s, const Eigen::VectorXd& command, const Eigen::VectorXd& armature,
                Eigen::VectorXd& out) {
    const double h = cfg_.dt / cfg_.substeps;
    const int n = model_.body_count();
    kinematics(s);
    external_forces();
    for (int i = 0; i < n; ++i) {
      const Matrix6d& I = model_.bodies[i].inertia;
      IA_[i] = I;
      pA_[i] = force_cross(vel_[i], I * vel_[i]) - fext_[i];
    }
    for (int i = n - 1; i >= 1; --i) {
      const RigidBody& b = model_.bodies[i];
      const int j = i - 1;
      double tau = command[j];
      double arm = armature[j];
      const double q = s.q[j], qd = s.qdot[j];
      if (q > b.range_hi || q < b.range_lo) {
        const double edge = q > b.range_hi ? b.range_hi : b.range_lo;
        const bool outward = (q - edge) * qd > 0.0;
        tau -= cfg_.limit_stiffness * (q - edge) + (outward ? cfg_.limit_damping * qd : 0.0);
        arm += cfg_.limit_stiffness * h * h + (outward ? cfg_.limit_damping * h : 0.0);
      }
      U_[i] = IA_[i].leftCols<3>() * b.axis;
      D_[i] = b.axis.dot(U_[i].head<3>()) + arm;
      u_[i] = tau - b.axis.dot(pA_[i].head<3>());
      const Matrix6d Ia = IA_[i] - U_[i] * U_[i].transpose() / D_[i];
      const Vector6d pa = pA_[i] + Ia * bias_[i] + U_[i] * (u_[i] / D_[i]);
      const Matrix6d X = X_[i].matrix();
      IA_[b.parent].noalias() += X.transpose() * Ia * X;
      pA_[b.parent] += X_[i].transpose_apply_force(pa);
    }
    if (cfg_.fixed_root) {
      acc_[0].setZero();
    } else {
      acc_[0] = -IA_[0].ldlt().solve(pA_[0]);
    }
    for (int i = 1; i < n; ++i) {
      const RigidBody& b = model_.bodies[i];
      acc_[i] = X_[i].apply_motion(acc_[b.parent]) + bias_[i];
      const double qdd = (u_[i] - U_[i].dot(acc_[i])) / D_[i];
      acc_[i].head<3>() += b.axis * qdd;
      out[6 + i - 1] = qdd;
    }
    if (cfg_.fixed_root) {
      out.head<6>().setZero();
    } else {
      const Eigen::Matrix3d& R0 = pose_[0].R;
      const Eigen::Vector3d w = vel_[0].head<3>(), v = vel_[0].tail<3>();
      out.head<3>() = R0 * (acc_[0].tail<3>() + w.cross(v));
      out.segment<3>(3) = R0 * acc_[0].head<3>();
    }
  }

  PhysicsModel model_;
  SimConfig cfg_;
  std::vector<Pose> pose_;
  std::vector<Vector6d> vel_, bias_, pA_, U_, acc_, fext_;
  std::vector<Matrix6d> IA_;
  std::vector<double> D_, u_;
  std::vector<SpatialTransform> X_;
};

}  // namespace codesign
