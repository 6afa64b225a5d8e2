#pragma once

#include <cmath>
#include <limits>
#include <memory>

#include "codesign/parallel.hpp"
#include "codesign/ppo/env.hpp"
#include "codesign/ppo/gae.hpp"
#include "codesign/ppo/learner.hpp"

namespace codesign {

struct ExperienceTuple {
  Eigen::VectorXd obs;  // normalised, as seen by the policy
  Eigen::VectorXd action;
  double log_prob = 0.0;
  double reward = 0.0;
  double value = 0.0;
  bool done = false;
  int variant_id = 0;
};

/// Experience of E environments over T steps. Sample index i = env * T + t.
struct RolloutBuffer {
  int horizon = 0;
  int envs = 0;
  Eigen::MatrixXd obs;      // obs_dim x N
  Eigen::MatrixXd actions;  // act_dim x N
  Eigen::MatrixXd means;    // act_dim x N, policy mean at collection
  Eigen::VectorXd log_sigma;
  Eigen::VectorXd log_probs;
  Eigen::VectorXd rewards;
  Eigen::VectorXd values;
  std::vector<bool> dones;
  std::vector<int> variant;
  Eigen::VectorXd bootstrap;  // per env
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
  std::vector<double> episode_returns;  // episodes that ended during collection
  std::vector<int> episode_variants;

  Eigen::Index size() const { return static_cast<Eigen::Index>(horizon) * envs; }
  Eigen::Index index(int env, int t) const { return static_cast<Eigen::Index>(env) * horizon + t; }

  ExperienceTuple at(Eigen::Index i) const {
    return {obs.col(i), actions.col(i), log_probs[i], rewards[i], values[i], dones[i], variant[i]};
  }

  void clear() { *this = RolloutBuffer{}; }
};

/// Owns the environments of one training run. Environment e simulates
/// agents[e % agents.size()], so E environments are split evenly across
/// variants.
class EnvPool {
 public:
  EnvPool(const AgentGraph& tmpl, const std::vector<AgentGraph>& agents, const EnvConfig& cfg, int env_count,
          std::uint64_t seed) {
    if (agents.empty()) throw Error(ErrorCode::ConfigEmpty, "no agents for the environment pool");
    for (int e = 0; e < env_count; ++e) {
      const int v = e % static_cast<int>(agents.size());
      envs_.push_back(std::make_unique<Environment>(tmpl, agents[v], cfg, derive_seed(seed, e, 1), v));
      rngs_.emplace_back(derive_seed(seed, e, 2));
    }
    const int d = envs_.front()->obs_dim();
    for (const auto& env : envs_) {
      if (env->obs_dim() != d) throw Error(ErrorCode::LayoutMismatch, "variants have different observation sizes");
    }
  }

  int size() const { return static_cast<int>(envs_.size()); }
  Environment& env(int e) { return *envs_[e]; }
  std::mt19937_64& rng(int e) { return rngs_[e]; }
  int obs_dim() const { return envs_.front()->obs_dim(); }
  int morph_dim() const { return envs_.front()->observer().dims().morphology; }
  int act_dim() const { return envs_.front()->act_dim(); }

  Eigen::MatrixXd observations() const {
    Eigen::MatrixXd x(obs_dim(), size());
    for (int e = 0; e < size(); ++e) x.col(e) = envs_[e]->observation();
    return x;
  }

 private:
  std::vector<std::unique_ptr<Environment>> envs_;
  std::vector<std::mt19937_64> rngs_;
};

/// Advances every environment `horizon` control steps under the stochastic
/// policy. Observation statistics are updated with each step's raw
/// observations before they are normalised. Time-limit truncations are
/// bootstrapped by adding gamma * V(final observation) to the last reward.
inline RolloutBuffer collect_rollouts(Learner& learner, EnvPool& pool, int horizon, double gamma, int threads,
                                      bool update_stats = true) {
  const int E = pool.size(), A = pool.act_dim();
  RolloutBuffer buf;
  buf.horizon = horizon;
  buf.envs = E;
  const Eigen::Index N = buf.size();
  buf.obs.resize(pool.obs_dim(), N);
  buf.actions.resize(A, N);
  buf.means.resize(A, N);
  buf.log_sigma = learner.ac.actor.log_sigma;
  buf.log_probs.resize(N);
  buf.rewards.resize(N);
  buf.values.resize(N);
  buf.dones.assign(N, false);
  buf.variant.resize(N);
  const Eigen::VectorXd sigma = buf.log_sigma.array().exp();

  std::vector<StepResult> results(E);
  Eigen::MatrixXd act(A, E);
  for (int t = 0; t < horizon; ++t) {
    Eigen::MatrixXd x = pool.observations();
    if (update_stats) learner.obs_norm.update(x);
    learner.obs_norm.normalize_inplace(x);
    const Eigen::MatrixXd mu = learner.ac.actor.mean.forward(x);
    const Eigen::RowVectorXd v = learner.values(x);
    for (int e = 0; e < E; ++e) {
      std::normal_distribution<double> normal(0.0, 1.0);
      auto& rng = pool.rng(e);
      for (int a = 0; a < A; ++a) act(a, e) = mu(a, e) + sigma[a] * normal(rng);
      const Eigen::Index i = buf.index(e, t);
      buf.obs.col(i) = x.col(e);
      buf.actions.col(i) = act.col(e);
      buf.means.col(i) = mu.col(e);
      buf.log_probs[i] = gaussian_log_prob(act.col(e), mu.col(e), buf.log_sigma);
      buf.values[i] = v[e];
      buf.variant[i] = pool.env(e).variant();
    }
    parallel_for(E, threads, [&](int e) { results[e] = pool.env(e).step(act.col(e)); });

    std::vector<int> truncated;
    for (int e = 0; e < E; ++e) {
      const Eigen::Index i = buf.index(e, t);
      buf.rewards[i] = results[e].reward.total;
      buf.dones[i] = results[e].done;
      if (results[e].done && !results[e].partial) {
        buf.episode_returns.push_back(results[e].episode_return);
        buf.episode_variants.push_back(pool.env(e).variant());
      }
      if (results[e].truncated) truncated.push_back(e);
    }
    if (!truncated.empty()) {
      Eigen::MatrixXd fx(pool.obs_dim(), static_cast<Eigen::Index>(truncated.size()));
      for (size_t k = 0; k < truncated.size(); ++k) fx.col(k) = results[truncated[k]].final_obs;
      learner.obs_norm.normalize_inplace(fx);
      const Eigen::RowVectorXd fv = learner.values(fx);
      for (size_t k = 0; k < truncated.size(); ++k) buf.rewards[buf.index(truncated[k], t)] += gamma * fv[k];
    }
  }
  Eigen::MatrixXd x = pool.observations();
  learner.obs_norm.normalize_inplace(x);
  buf.bootstrap = learner.values(x).transpose();
  return buf;
}

/// Fills advantages and returns stream by stream.
inline void finish_buffer(RolloutBuffer& buf, double gamma, double lam) {
  buf.advantages.resize(buf.size());
  buf.returns.resize(buf.size());
  for (int e = 0; e < buf.envs; ++e) {
    const Eigen::Index off = buf.index(e, 0);
    std::vector<bool> d(buf.dones.begin() + off, buf.dones.begin() + off + buf.horizon);
    const GaeResult g = compute_gae(buf.rewards.segment(off, buf.horizon), buf.values.segment(off, buf.horizon), d,
                                    buf.bootstrap[e], gamma, lam);
    buf.advantages.segment(off, buf.horizon) = g.advantages;
    buf.returns.segment(off, buf.horizon) = g.returns;
  }
}

}  // namespace codesign
