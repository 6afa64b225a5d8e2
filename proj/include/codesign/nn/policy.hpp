#pragma once

#include <numbers>

#include "codesign/nn/mlp.hpp"

namespace codesign {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2 pi)

/// Diagonal Gaussian log density of a under mean mu and per-dimension log_sigma.
template <class A, class M, class S>
double gaussian_log_prob(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<M>& mu,
                         const Eigen::MatrixBase<S>& log_sigma) {
  double lp = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double z = (a[i] - mu[i]) * std::exp(-log_sigma[i]);
    lp += -0.5 * z * z - log_sigma[i] - 0.5 * kLog2Pi;
  }
  return lp;
}

inline double gaussian_entropy(const Eigen::VectorXd& log_sigma) {
  return log_sigma.sum() + 0.5 * static_cast<double>(log_sigma.size()) * (1.0 + kLog2Pi);
}

/// Mean network plus a state-independent log standard deviation.
struct GaussianPolicy {
  Mlp mean;
  Eigen::VectorXd log_sigma;
};

struct ActionSample {
  Eigen::VectorXd action;
  double log_prob = 0.0;
};

inline ActionSample sample_action(const GaussianPolicy& policy, const Eigen::VectorXd& obs,
                                  std::mt19937_64& rng) {
  const Eigen::VectorXd mu = policy.mean.forward(obs);
  std::normal_distribution<double> normal(0.0, 1.0);
  ActionSample out;
  out.action.resize(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    out.action[i] = mu[i] + std::exp(policy.log_sigma[i]) * normal(rng);
  }
  out.log_prob = gaussian_log_prob(out.action, mu, policy.log_sigma);
  return out;
}

struct NetworkConfig {
  std::vector<int> hidden{256, 128, 64};
  double hidden_gain = std::numbers::sqrt2;
  double policy_output_gain = 0.01;
  double value_output_gain = 1.0;
  double init_log_sigma = 0.0;
};

/// Actor and critic with a shared flat parameter view [actor, log_sigma, critic].
struct ActorCritic {
  GaussianPolicy actor;
  Mlp critic;

  ActorCritic() = default;
  ActorCritic(int obs_dim, int act_dim, const NetworkConfig& cfg, std::mt19937_64& rng) {
    actor.mean = Mlp(obs_dim, cfg.hidden, act_dim);
    actor.mean.init_orthogonal(rng, cfg.hidden_gain, cfg.policy_output_gain);
    actor.log_sigma = Eigen::VectorXd::Constant(act_dim, cfg.init_log_sigma);
    critic = Mlp(obs_dim, cfg.hidden, 1);
    critic.init_orthogonal(rng, cfg.hidden_gain, cfg.value_output_gain);
  }

  int obs_dim() const { return actor.mean.input_dim(); }
  int act_dim() const { return actor.mean.output_dim(); }

  Eigen::Index flat_size() const {
    return actor.mean.param_count() + actor.log_sigma.size() + critic.param_count();
  }
  Eigen::VectorXd flat() const {
    Eigen::VectorXd out(flat_size());
    out << actor.mean.params(), actor.log_sigma, critic.params();
    return out;
  }
  void set_flat(const Eigen::VectorXd& v) {
    if (v.size() != flat_size()) throw Error(ErrorCode::ShapeMismatch, "flat parameter length");
    const Eigen::Index a = actor.mean.param_count(), s = actor.log_sigma.size();
    actor.mean.params() = v.head(a);
    actor.log_sigma = v.segment(a, s);
    critic.params() = v.tail(critic.param_count());
  }
};

}  // namespace codesign
