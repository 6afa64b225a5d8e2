#pragma once

#include <algorithm>
#include <numeric>

#include "codesign/ppo/rollout.hpp"

namespace codesign {

/// KL-adaptive learning rate: shrink when the policy moved too far, grow when
/// it barely moved, always within [lr_min, lr_max].
inline double adapt_lr(double lr, double kl, double desired_kl, double lr_min, double lr_max) {
  if (kl > 2.0 * desired_kl) lr = std::max(lr / 1.5, lr_min);
  else if (kl < 0.5 * desired_kl) lr = std::min(lr * 1.5, lr_max);
  return std::clamp(lr, lr_min, lr_max);
}

/// Minibatch view into a finished buffer. Advantages are expected already
/// normalised; value targets and old values are in critic (normalised) units.
struct Minibatch {
  Eigen::MatrixXd obs;
  Eigen::MatrixXd actions;
  Eigen::MatrixXd old_means;
  Eigen::VectorXd old_log_sigma;
  Eigen::VectorXd old_log_probs;
  Eigen::VectorXd advantages;
  Eigen::VectorXd old_values;
  Eigen::VectorXd returns;
};

struct LossTerms {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double total = 0.0;
  double kl = 0.0;         // analytic KL(old || current), batch mean
  double clip_frac = 0.0;  // fraction of samples with |ratio - 1| > eps
  Eigen::VectorXd ratios;
  Eigen::VectorXd grad;  // flat, in ActorCritic::flat() order
};

/// Clipped-surrogate objective, clipped value loss and entropy bonus for one
/// minibatch, with the exact gradient of the total loss.
inline LossTerms ppo_loss(const ActorCritic& ac, const Minibatch& mb, const TrainConfig& cfg) {
  const Eigen::Index B = mb.obs.cols();
  const int A = ac.act_dim();
  const double eps = cfg.clip_eps;
  LossTerms out;

  GradTape actor_tape, critic_tape;
  const Eigen::MatrixXd mu = ac.actor.mean.forward(mb.obs, actor_tape);
  const Eigen::RowVectorXd v = ac.critic.forward(mb.obs, critic_tape).row(0);
  const Eigen::VectorXd& ls = ac.actor.log_sigma;
  const Eigen::ArrayXd inv_var = (-2.0 * ls.array()).exp();
  const Eigen::ArrayXd old_var = (2.0 * mb.old_log_sigma.array()).exp();

  Eigen::MatrixXd dmu = Eigen::MatrixXd::Zero(A, B);
  Eigen::VectorXd dls = Eigen::VectorXd::Zero(A);
  Eigen::RowVectorXd dv(B);
  out.ratios.resize(B);
  int clipped = 0;
  for (Eigen::Index b = 0; b < B; ++b) {
    const double logp = gaussian_log_prob(mb.actions.col(b), mu.col(b), ls);
    const double ratio = std::exp(logp - mb.old_log_probs[b]);
    out.ratios[b] = ratio;
    const double adv = mb.advantages[b];
    const double unclipped = ratio * adv;
    const double clamped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv;
    out.policy_loss -= std::min(unclipped, clamped);
    if (std::abs(ratio - 1.0) > eps) ++clipped;
    // d(-min)/dlogp is -ratio*adv while the unclipped branch is active (the
    // clamped branch has zero slope once the ratio is outside the band).
    if (unclipped <= clamped) {
      const double g = -unclipped / static_cast<double>(B);
      const Eigen::ArrayXd diff = (mb.actions.col(b) - mu.col(b)).array();
      dmu.col(b) = (g * diff * inv_var).matrix();
      dls += (g * (diff.square() * inv_var - 1.0)).matrix();
    }

    const double err = v[b] - mb.returns[b];
    const double vclip = mb.old_values[b] + std::clamp(v[b] - mb.old_values[b], -eps, eps);
    const double err_clip = vclip - mb.returns[b];
    const double scale = cfg.value_coef / static_cast<double>(B);
    if (err * err >= err_clip * err_clip) {
      out.value_loss += err * err;
      dv[b] = 2.0 * err * scale;
    } else {
      out.value_loss += err_clip * err_clip;
      const bool inside = std::abs(v[b] - mb.old_values[b]) < eps;
      dv[b] = inside ? 2.0 * err_clip * scale : 0.0;
    }

    for (int a = 0; a < A; ++a) {
      const double dm = mb.old_means(a, b) - mu(a, b);
      out.kl += ls[a] - mb.old_log_sigma[a] + (old_var[a] + dm * dm) * inv_var[a] * 0.5 - 0.5;
    }
  }
  out.policy_loss /= static_cast<double>(B);
  out.value_loss /= static_cast<double>(B);
  out.kl /= static_cast<double>(B);
  out.clip_frac = static_cast<double>(clipped) / static_cast<double>(B);
  out.entropy = gaussian_entropy(ls);
  out.total = out.policy_loss + cfg.value_coef * out.value_loss - cfg.entropy_coef * out.entropy;
  dls.array() -= cfg.entropy_coef;

  out.grad.resize(ac.flat_size());
  const Eigen::Index na = ac.actor.mean.param_count();
  out.grad.head(na) = ac.actor.mean.backward(actor_tape, dmu);
  out.grad.segment(na, A) = dls;
  out.grad.tail(ac.critic.param_count()) = ac.critic.backward(critic_tape, dv);
  return out;
}

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double kl = 0.0;
  double clip_frac = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;
  int minibatches = 0;
};

/// Several passes of shuffled-minibatch updates over a collected buffer.
/// Computes GAE, refreshes the value statistics, normalises advantages, then
/// steps Adam per minibatch with global gradient-norm clipping and adapts the
/// learning rate from each minibatch's KL.
inline UpdateStats ppo_update(Learner& learner, RolloutBuffer& buf, const TrainConfig& cfg, std::mt19937_64& rng) {
  finish_buffer(buf, cfg.gamma, cfg.lam);
  const Eigen::Index N = buf.size();
  learner.value_norm.update(buf.returns);

  Eigen::VectorXd adv = buf.advantages;
  if (cfg.normalize_advantages && N > 1) {
    const double m = adv.mean();
    const double s = std::sqrt((adv.array() - m).square().sum() / static_cast<double>(N - 1));
    adv = (adv.array() - m) / (s + 1e-8);
  }
  Eigen::VectorXd ret_n(N), old_v_n(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    ret_n[i] = learner.value_norm.normalize(buf.returns[i]);
    old_v_n[i] = learner.value_norm.normalize(buf.values[i]);
  }

  UpdateStats st;
  std::vector<Eigen::Index> order(N);
  const int mbs = std::max<int>(1, std::min<Eigen::Index>(cfg.minibatch_count, N));
  Minibatch mb;
  mb.old_log_sigma = buf.log_sigma;
  for (int pass = 0; pass < cfg.epochs_per_buffer; ++pass) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (int k = 0; k < mbs; ++k) {
      const Eigen::Index lo = N * k / mbs, hi = N * (k + 1) / mbs, B = hi - lo;
      mb.obs.resize(buf.obs.rows(), B);
      mb.actions.resize(buf.actions.rows(), B);
      mb.old_means.resize(buf.means.rows(), B);
      mb.old_log_probs.resize(B);
      mb.advantages.resize(B);
      mb.old_values.resize(B);
      mb.returns.resize(B);
      for (Eigen::Index b = 0; b < B; ++b) {
        const Eigen::Index i = order[lo + b];
        mb.obs.col(b) = buf.obs.col(i);
        mb.actions.col(b) = buf.actions.col(i);
        mb.old_means.col(b) = buf.means.col(i);
        mb.old_log_probs[b] = buf.log_probs[i];
        mb.advantages[b] = adv[i];
        mb.old_values[b] = old_v_n[i];
        mb.returns[b] = ret_n[i];
      }
      LossTerms loss = ppo_loss(learner.ac, mb, cfg);
      if (!std::isfinite(loss.total) || !loss.grad.allFinite()) {
        throw Error(ErrorCode::NonFiniteLoss, "non-finite PPO loss or gradient");
      }
      const double gn = loss.grad.norm();
      if (cfg.max_grad_norm > 0.0 && gn > cfg.max_grad_norm) loss.grad *= cfg.max_grad_norm / gn;
      Eigen::VectorXd flat = learner.ac.flat();
      learner.adam.step(flat, loss.grad, learner.lr);
      learner.ac.set_flat(flat);
      learner.lr = adapt_lr(learner.lr, loss.kl, cfg.desired_kl, cfg.lr_min, cfg.lr_max);

      st.policy_loss += loss.policy_loss;
      st.value_loss += loss.value_loss;
      st.entropy += loss.entropy;
      st.kl += loss.kl;
      st.clip_frac += loss.clip_frac;
      st.grad_norm += gn;
      ++st.minibatches;
    }
  }
  if (st.minibatches > 0) {
    const double n = st.minibatches;
    st.policy_loss /= n;
    st.value_loss /= n;
    st.entropy /= n;
    st.kl /= n;
    st.clip_frac /= n;
    st.grad_norm /= n;
  }
  st.lr = learner.lr;
  return st;
}

}  // namespace codesign
