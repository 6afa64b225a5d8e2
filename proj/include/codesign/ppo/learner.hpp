#pragma once

#include <json.hpp>

#include "codesign/nn/adam.hpp"
#include "codesign/nn/checkpoint.hpp"
#include "codesign/nn/policy.hpp"
#include "codesign/ppo/normalizer.hpp"

namespace codesign {

struct TrainConfig {
  double gamma = 0.99;
  double lam = 0.95;
  double clip_eps = 0.2;
  double desired_kl = 0.01;
  double lr = 3e-4;
  double lr_min = 1e-4;
  double lr_max = 1e-3;
  int epochs_per_buffer = 5;
  int minibatch_count = 4;
  int horizon = 32;
  int env_count = 64;
  int total_epochs = 200;
  double entropy_coef = 0.0;
  double value_coef = 1.0;
  double max_grad_norm = 1.0;
  bool normalize_advantages = true;
  double obs_clip = 5.0;
  int threads = 1;

  void validate() const {
    auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidAttribute, "train config: " + what); };
    if (!(gamma > 0.0 && gamma <= 1.0)) bad("gamma must lie in (0, 1]");
    if (!(lam >= 0.0 && lam <= 1.0)) bad("lam must lie in [0, 1]");
    if (!(clip_eps > 0.0 && clip_eps < 1.0)) bad("clip_eps must lie in (0, 1)");
    if (!(lr_min > 0.0 && lr_min <= lr_max)) bad("need 0 < lr_min <= lr_max");
    if (!(lr >= lr_min && lr <= lr_max)) bad("lr must lie in [lr_min, lr_max]");
    if (epochs_per_buffer < 1 || minibatch_count < 1 || horizon < 1 || env_count < 1 || total_epochs < 0) {
      bad("counts must be positive");
    }
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, gamma, lam, clip_eps, desired_kl, lr, lr_min, lr_max,
                                                epochs_per_buffer, minibatch_count, horizon, env_count,
                                                total_epochs, entropy_coef, value_coef, max_grad_norm,
                                                normalize_advantages, obs_clip, threads)

/// Everything that evolves during training: networks, optimiser state,
/// observation and value statistics, and the adaptive learning rate.
struct Learner {
  ActorCritic ac;
  Adam adam;
  RunningNormalizer obs_norm;
  ValueNormalizer value_norm;
  double lr = 3e-4;
  long epochs_trained = 0;

  Learner() = default;
  /// The first morph_dim observation entries (the morphology block) are
  /// excluded from normalisation.
  Learner(int obs_dim, int morph_dim, int act_dim, const NetworkConfig& net, const TrainConfig& cfg,
          std::mt19937_64& rng)
      : ac(obs_dim, act_dim, net, rng),
        adam(ac.flat_size()),
        obs_norm(obs_dim, morph_dim, cfg.obs_clip),
        lr(cfg.lr) {}

  int obs_dim() const { return ac.obs_dim(); }
  int act_dim() const { return ac.act_dim(); }

  /// Critic output mapped back to return units.
  Eigen::RowVectorXd values(const Eigen::MatrixXd& normalized_obs) const {
    Eigen::RowVectorXd v = ac.critic.forward(normalized_obs).row(0);
    return (v.array() * value_norm.scale() + value_norm.mean).matrix();
  }
};

inline Checkpoint learner_checkpoint(const Learner& l, const nlohmann::json& extra = {}) {
  Checkpoint ck;
  nlohmann::json meta = extra;
  meta["lr"] = l.lr;
  meta["epochs_trained"] = l.epochs_trained;
  meta["adam_steps"] = l.adam.steps;
  meta["obs_count"] = l.obs_norm.count;
  meta["obs_skip"] = l.obs_norm.skip;
  meta["obs_clip"] = l.obs_norm.clip;
  meta["value_mean"] = l.value_norm.mean;
  meta["value_var"] = l.value_norm.var;
  meta["value_count"] = l.value_norm.count;
  std::vector<int> hidden(l.ac.actor.mean.sizes().begin() + 1, l.ac.actor.mean.sizes().end() - 1);
  meta["hidden"] = hidden;
  meta["obs_dim"] = l.obs_dim();
  meta["act_dim"] = l.act_dim();
  ck.meta = meta.dump();
  ck.tensors.push_back(Tensor::from("actor", l.ac.actor.mean.params()));
  ck.tensors.push_back(Tensor::from("log_sigma", l.ac.actor.log_sigma));
  ck.tensors.push_back(Tensor::from("critic", l.ac.critic.params()));
  ck.tensors.push_back(Tensor::from("adam_m", l.adam.m));
  ck.tensors.push_back(Tensor::from("adam_v", l.adam.v));
  ck.tensors.push_back(Tensor::from("obs_mean", l.obs_norm.mean));
  ck.tensors.push_back(Tensor::from("obs_var", l.obs_norm.var));
  return ck;
}

inline Learner learner_from_checkpoint(const Checkpoint& ck) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(ck.meta);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CheckpointFormat, std::string("checkpoint metadata: ") + e.what());
  }
  Learner l;
  try {
    const int obs_dim = meta.at("obs_dim"), act_dim = meta.at("act_dim");
    const std::vector<int> hidden = meta.at("hidden");
    l.ac.actor.mean = Mlp(obs_dim, hidden, act_dim);
    l.ac.critic = Mlp(obs_dim, hidden, 1);
    l.lr = meta.at("lr");
    l.epochs_trained = meta.at("epochs_trained");
    l.adam.steps = meta.at("adam_steps");
    l.obs_norm.count = meta.at("obs_count");
    l.obs_norm.skip = meta.at("obs_skip");
    l.obs_norm.clip = meta.at("obs_clip");
    l.value_norm.mean = meta.at("value_mean");
    l.value_norm.var = meta.at("value_var");
    l.value_norm.count = meta.at("value_count");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CheckpointFormat, std::string("checkpoint metadata: ") + e.what());
  }
  auto load = [&](const char* name, Eigen::VectorXd& dst, Eigen::Index expected) {
    Eigen::VectorXd v = ck.at(name).vector();
    if (expected >= 0 && v.size() != expected) {
      throw Error(ErrorCode::CheckpointFormat, std::string("tensor '") + name + "' has the wrong length");
    }
    dst = std::move(v);
  };
  load("actor", l.ac.actor.mean.params(), l.ac.actor.mean.param_count());
  load("log_sigma", l.ac.actor.log_sigma, l.ac.act_dim());
  load("critic", l.ac.critic.params(), l.ac.critic.param_count());
  load("adam_m", l.adam.m, l.ac.flat_size());
  load("adam_v", l.adam.v, l.ac.flat_size());
  load("obs_mean", l.obs_norm.mean, l.ac.obs_dim());
  load("obs_var", l.obs_norm.var, l.ac.obs_dim());
  return l;
}

inline void save_learner(const std::filesystem::path& path, const Learner& l, const nlohmann::json& extra = {}) {
  write_checkpoint(path, learner_checkpoint(l, extra));
}

inline Learner load_learner(const std::filesystem::path& path) { return learner_from_checkpoint(read_checkpoint(path)); }

}  // namespace codesign
