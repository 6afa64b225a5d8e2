#pragma once

// One locomotion environment: simulator, observer, reward and termination for
// a single agent variant, with automatic reset at episode end.

#include <cstdint>
#include <random>

#include "codesign/physics/observation.hpp"
#include "codesign/reward.hpp"

namespace codesign {

struct EnvConfig {
  SimConfig sim;
  RewardConfig reward;
  TerminationLimits limits;
  int max_episode_steps = 400;
  double init_randomization = 0.1;  // rad, per joint
};

/// Deterministic 64-bit seed derivation (splitmix64 finaliser over a mix of
/// the inputs).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t z = base ^ (a * 0x9E3779B97F4A7C15ull) ^ (b * 0xC2B2AE3D27D4EB4Full);
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

struct StepResult {
  RewardBreakdown reward;
  bool done = false;       // episode ended at this step (termination or time limit)
  bool truncated = false;  // ended by the time limit only
  TerminationReason reason = TerminationReason::None;
  double episode_return = 0.0;  // valid when done
  int episode_length = 0;       // valid when done
  bool partial = false;         // the episode started mid-way (see Environment::stagger)
  Eigen::VectorXd final_obs;    // observation before the reset, when truncated
};

class Environment {
 public:
  Environment(const AgentGraph& tmpl, const AgentGraph& agent, const EnvConfig& cfg, std::uint64_t seed,
              int variant = 0)
      : cfg_(cfg), sim_(agent, cfg.sim), observer_(tmpl, agent), rng_(seed), variant_(variant) {
    cfg_.reward.dt = cfg.sim.dt;
    reset();
  }

  int variant() const { return variant_; }
  int obs_dim() const { return observer_.dims().total(); }
  int act_dim() const { return sim_.joint_count(); }
  const Observer& observer() const { return observer_; }
  const Simulator& simulator() const { return sim_; }
  const SimState& state() const { return state_; }
  const Eigen::VectorXd& observation() const { return obs_; }
  int episode_steps() const { return steps_; }

  void reset() {
    state_ = sim_.init(cfg_.init_randomization, rng_);
    initial_height_ = state_.root_pos.z();
    steps_ = 0;
    return_ = 0.0;
    partial_ = false;
    observe();
  }

  /// Pretends the current episode has already run `steps` steps so that a
  /// pool of environments does not reach the time limit in lockstep. The
  /// shortened episode is reported as partial.
  void stagger(int steps) {
    steps_ = std::clamp(steps, 0, cfg_.max_episode_steps - 1);
    partial_ = steps_ > 0;
  }

  /// Policy action in [-1, 1] per joint (clipped) mapped linearly onto the
  /// joint range as the PD target.
  Eigen::VectorXd targets(const Eigen::VectorXd& action) const {
    Eigen::VectorXd t(act_dim());
    for (int j = 0; j < act_dim(); ++j) {
      const RigidBody& b = sim_.model().bodies[j + 1];
      t[j] = 0.5 * (b.range_lo + b.range_hi) + 0.5 * (b.range_hi - b.range_lo) * action[j];
    }
    return t;
  }

  StepResult step(const Eigen::VectorXd& raw_action) {
    if (raw_action.size() != act_dim()) throw Error(ErrorCode::ShapeMismatch, "action length");
    const Eigen::VectorXd action = raw_action.cwiseMax(-1.0).cwiseMin(1.0);
    StepResult r;
    const double y_prev = state_.root_pos.y();
    bool diverged = false;
    try {
      sim_.step_pd(state_, targets(action));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NumericalDivergence) throw;
      diverged = true;
    }
    state_.prev_action = action;
    ++steps_;
    if (diverged) {
      r.reason = TerminationReason::Diverged;
    } else {
      r.reason = terminated(state_, initial_height_, cfg_.limits);
    }
    const bool term = r.reason != TerminationReason::None;
    if (diverged) {
      // Nothing about the state can be trusted; the step earns nothing.
      r.reward = RewardBreakdown{};
    } else {
      poses_ = sim_.body_poses(state_);
      RewardInputs in;
      in.heading = Observer::heading(poses_[0].R);
      in.up = Observer::up(poses_[0].R);
      in.y_prev = y_prev;
      in.y_curr = state_.root_pos.y();
      in.action = action;
      in.joint_vel = state_.qdot;
      in.joint_pos_norm.resize(act_dim());
      for (int j = 0; j < act_dim(); ++j) in.joint_pos_norm[j] = observer_.normalized_joint(j, state_.q[j]);
      in.terminated = term;
      r.reward = total_reward(in, cfg_.reward);
    }
    return_ += r.reward.total;
    r.truncated = !term && steps_ >= cfg_.max_episode_steps;
    r.done = term || r.truncated;
    if (r.done) {
      r.episode_return = return_;
      r.episode_length = steps_;
      r.partial = partial_;
      if (r.truncated) {
        observe_from_poses();
        r.final_obs = obs_;
      }
      reset();
    } else {
      observe_from_poses();
    }
    return r;
  }

 private:
  void observe() {
    poses_ = sim_.body_poses(state_);
    observe_from_poses();
  }
  void observe_from_poses() {
    obs_.resize(obs_dim());
    observer_.observe(state_, poses_, obs_);
  }

  EnvConfig cfg_;
  Simulator sim_;
  Observer observer_;
  std::mt19937_64 rng_;
  int variant_ = 0;
  SimState state_;
  std::vector<Pose> poses_;
  Eigen::VectorXd obs_;
  double initial_height_ = 0.0;
  int steps_ = 0;
  double return_ = 0.0;
  bool partial_ = false;
};

}  // namespace codesign
