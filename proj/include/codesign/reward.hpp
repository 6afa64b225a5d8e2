#pragma once

#include <Eigen/Core>
#include <cmath>

#include "codesign/error.hpp"

namespace codesign {

struct RewardConfig {
  double w_heading = 0.5;
  double w_up = 0.1;
  double t_heading = 0.8;
  double t_up = 0.9;
  double w_act = -0.05;
  double w_energy = -0.05;
  double w_jointlimit = -0.1;
  double t_jointlimit = 0.99;
  double dt = 1.0 / 60.0;
  double alive_bonus = 0.5;
  Eigen::Vector3d forward{0.0, 1.0, 0.0};
  Eigen::Vector3d vertical{0.0, 0.0, 1.0};
};

struct RewardBreakdown {
  double pose = 0.0;        // r_p
  double velocity = 0.0;    // r_v
  double efficiency = 0.0;  // r_e
  double alive = 0.0;       // r_a
  double total = 0.0;
};

// 1 at or above the threshold, linear below it (no lower clamp).
inline double alignment_reward(double projection, double threshold) {
  return projection >= threshold ? 1.0 : projection / threshold;
}

inline double heading_reward(const Eigen::Vector3d& heading, const RewardConfig& cfg = {}) {
  return alignment_reward(heading.dot(cfg.forward), cfg.t_heading);
}

inline double up_reward(const Eigen::Vector3d& up, const RewardConfig& cfg = {}) {
  return alignment_reward(up.dot(cfg.vertical), cfg.t_up);
}

inline double pose_reward(const Eigen::Vector3d& heading, const Eigen::Vector3d& up, const RewardConfig& cfg = {}) {
  return cfg.w_heading * heading_reward(heading, cfg) + cfg.w_up * up_reward(up, cfg);
}

inline double velocity_reward(double y_prev, double y_curr, const RewardConfig& cfg = {}) {
  return (y_curr - y_prev) / cfg.dt;
}

/// joint_pos_norm is the joint position mapped onto [-1, 1] over its range.
inline double efficiency_reward(const Eigen::VectorXd& action, const Eigen::VectorXd& joint_vel,
                                const Eigen::VectorXd& joint_pos_norm, const RewardConfig& cfg = {}) {
  if (action.size() != joint_vel.size() || action.size() != joint_pos_norm.size()) {
    throw Error(ErrorCode::ShapeMismatch, "efficiency reward inputs differ in length");
  }
  const double act = action.squaredNorm();
  const double energy = action.cwiseProduct(joint_vel).cwiseAbs().sum();
  const double at_limit = static_cast<double>((joint_pos_norm.array().abs() > cfg.t_jointlimit).count());
  return cfg.w_act * act + cfg.w_energy * energy + cfg.w_jointlimit * at_limit;
}

inline double alive_reward(bool terminated, const RewardConfig& cfg = {}) {
  return terminated ? 0.0 : cfg.alive_bonus;
}

/// What the reward needs from two consecutive control steps.
struct RewardInputs {
  Eigen::Vector3d heading = Eigen::Vector3d::UnitY();
  Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
  double y_prev = 0.0;
  double y_curr = 0.0;
  Eigen::VectorXd action;
  Eigen::VectorXd joint_vel;
  Eigen::VectorXd joint_pos_norm;
  bool terminated = false;
};

inline RewardBreakdown total_reward(const RewardInputs& in, const RewardConfig& cfg = {}) {
  RewardBreakdown r;
  r.pose = pose_reward(in.heading, in.up, cfg);
  r.velocity = velocity_reward(in.y_prev, in.y_curr, cfg);
  r.efficiency = efficiency_reward(in.action, in.joint_vel, in.joint_pos_norm, cfg);
  r.alive = alive_reward(in.terminated, cfg);
  r.total = r.pose + r.velocity + r.efficiency + r.alive;
  return r;
}

}  // namespace codesign
