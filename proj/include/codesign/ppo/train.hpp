#pragma once

#include <chrono>
#include <functional>
#include <limits>

#include "codesign/morphology/gene.hpp"
#include "codesign/ppo/update.hpp"

namespace codesign {

struct EpochStats {
  long epoch = 0;  // 1-based, counted over the learner's lifetime
  double mean_episode_return = std::numeric_limits<double>::quiet_NaN();  // episodes ended this epoch
  int episodes = 0;
  double mean_step_reward = 0.0;
  UpdateStats update;
  double seconds = 0.0;
};

/// Return false to stop training early.
using EpochCallback = std::function<bool(const EpochStats&, const Learner&)>;

struct TrainResult {
  Learner learner;
  std::vector<double> reward_curve;  // per epoch, carried forward when no episode ended
  std::vector<EpochStats> epochs;
};

inline Learner make_learner(const EnvPool& pool, const NetworkConfig& net, const TrainConfig& cfg,
                            std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0, 7));
  return Learner(pool.obs_dim(), pool.morph_dim(), pool.act_dim(), net, cfg, rng);
}

/// Alternating collect/update on an existing pool for `epochs` epochs.
inline void train_epochs(TrainResult& res, EnvPool& pool, const TrainConfig& cfg, int epochs, std::uint64_t seed,
                         const EpochCallback& on_epoch = {}) {
  Learner& l = res.learner;
  if (l.obs_dim() != pool.obs_dim() || l.act_dim() != pool.act_dim()) {
    throw Error(ErrorCode::LayoutMismatch, "policy and environment dimensions differ");
  }
  double carried = res.reward_curve.empty() ? std::numeric_limits<double>::quiet_NaN() : res.reward_curve.back();
  for (int k = 0; k < epochs; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(l.epochs_trained), 11));
    RolloutBuffer buf = collect_rollouts(l, pool, cfg.horizon, cfg.gamma, cfg.threads);
    EpochStats st;
    st.mean_step_reward = buf.rewards.mean();
    st.update = ppo_update(l, buf, cfg, rng);
    ++l.epochs_trained;
    st.epoch = l.epochs_trained;
    st.episodes = static_cast<int>(buf.episode_returns.size());
    if (st.episodes > 0) {
      double s = 0.0;
      for (double r : buf.episode_returns) s += r;
      st.mean_episode_return = s / st.episodes;
      carried = st.mean_episode_return;
    }
    st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.reward_curve.push_back(carried);
    res.epochs.push_back(st);
    if (on_epoch && !on_epoch(st, l)) break;
  }
}

/// Spreads the first episodes of a pool over the time limit.
inline void stagger_pool(EnvPool& pool, int max_episode_steps, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0, 5));
  std::uniform_int_distribution<int> offset(0, std::max(0, max_episode_steps - 1));
  for (int e = 0; e < pool.size(); ++e) pool.env(e).stagger(offset(rng));
}

/// Trains a fresh policy (or continues `resume`) on a single agent.
inline TrainResult train_single(const AgentGraph& agent, const EnvConfig& env, const TrainConfig& cfg,
                                const NetworkConfig& net, std::uint64_t seed, const EpochCallback& on_epoch = {},
                                const Learner* resume = nullptr) {
  cfg.validate();
  EnvPool pool(agent, {agent}, env, cfg.env_count, derive_seed(seed, 1));
  stagger_pool(pool, env.max_episode_steps, seed);
  TrainResult res{resume ? *resume : make_learner(pool, net, cfg, seed), {}, {}};
  train_epochs(res, pool, cfg, cfg.total_epochs, seed, on_epoch);
  return res;
}

struct EvalResult {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> returns;
};

/// Deterministic evaluation: actions are the policy mean under frozen
/// observation statistics, episodes run to termination or the time limit.
/// Episode k starts from an initial state seeded by (seed, k) only, so the
/// same (policy, agent, seed) always gives the same result.
inline EvalResult evaluate(const Learner& learner, const AgentGraph& tmpl, const AgentGraph& agent,
                           const EnvConfig& env, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw Error(ErrorCode::InvalidAttribute, "evaluate needs at least one episode");
  EvalResult out;
  for (int k = 0; k < episodes; ++k) {
    Environment e(tmpl, agent, env, derive_seed(seed, k, 3));
    if (e.obs_dim() != learner.obs_dim()) throw Error(ErrorCode::LayoutMismatch, "policy and agent dimensions");
    Eigen::MatrixXd x(e.obs_dim(), 1);
    for (;;) {
      x.col(0) = e.observation();
      learner.obs_norm.normalize_inplace(x);
      const StepResult r = e.step(learner.ac.actor.mean.forward(x).col(0));
      if (r.done) {
        out.returns.push_back(r.episode_return);
        break;
      }
    }
  }
  double s = 0.0;
  for (double r : out.returns) s += r;
  out.mean = s / episodes;
  double v = 0.0;
  for (double r : out.returns) v += (r - out.mean) * (r - out.mean);
  out.stddev = std::sqrt(v / episodes);
  return out;
}

/// Mean deterministic return of every agent (one task per agent).
inline std::vector<double> evaluate_population(const Learner& learner, const AgentGraph& tmpl,
                                               const std::vector<AgentGraph>& agents, const EnvConfig& env,
                                               int episodes, std::uint64_t seed, int threads = 1) {
  std::vector<double> fitness(agents.size());
  parallel_for(static_cast<int>(agents.size()), threads, [&](int i) {
    fitness[i] = evaluate(learner, tmpl, agents[i], env, episodes, seed).mean;
  });
  return fitness;
}

struct GenerationTraining {
  TrainResult train;
  std::vector<double> fitness;
};

inline std::vector<AgentGraph> agents_from_genes(const AgentGraph& tmpl, const std::vector<Gene>& genes) {
  std::vector<AgentGraph> agents;
  agents.reserve(genes.size());
  for (const Gene& g : genes) agents.push_back(apply_gene(tmpl, g));
  return agents;
}

/// One universal controller trained on every variant at once, starting from
/// `base` (transfer). Environments are split evenly across variants and their
/// experience is mixed in the same minibatches. Fitness is the deterministic
/// evaluation of each variant after training.
inline GenerationTraining train_generation(const std::vector<Gene>& genes, const AgentGraph& tmpl, const Learner& base,
                                           const EnvConfig& env, const TrainConfig& cfg, int epochs, int eval_episodes,
                                           std::uint64_t seed, std::uint64_t eval_seed,
                                           const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (genes.empty()) throw Error(ErrorCode::ConfigEmpty, "empty population");
  const std::vector<AgentGraph> agents = agents_from_genes(tmpl, genes);
  EnvPool pool(tmpl, agents, env, std::max<int>(cfg.env_count, static_cast<int>(agents.size())),
               derive_seed(seed, 1));
  stagger_pool(pool, env.max_episode_steps, seed);
  GenerationTraining out{{base, {}, {}}, {}};
  train_epochs(out.train, pool, cfg, epochs, seed, on_epoch);
  out.fitness = evaluate_population(out.train.learner, tmpl, agents, env, eval_episodes, eval_seed, cfg.threads);
  return out;
}

}  // namespace codesign
