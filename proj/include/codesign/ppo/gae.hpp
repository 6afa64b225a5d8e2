#pragma once

#include <Eigen/Core>
#include <vector>

#include "codesign/error.hpp"

namespace codesign {

struct GaeResult {
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
};

/// Generalised advantage estimation over one environment stream.
/// dones[t] marks that the episode ended at step t, so neither the value of
/// t+1 nor later advantages flow back across it. bootstrap_value is V of the
/// state following the last step.
inline GaeResult compute_gae(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
                             const std::vector<bool>& dones, double bootstrap_value, double gamma, double lam) {
  const Eigen::Index n = rewards.size();
  if (values.size() != n || static_cast<Eigen::Index>(dones.size()) != n) {
    throw Error(ErrorCode::LengthMismatch, "gae: rewards, values and dones must have equal length");
  }
  GaeResult out;
  out.advantages.resize(n);
  double next_value = bootstrap_value, next_adv = 0.0;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const double live = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * next_value * live - values[t];
    next_adv = delta + gamma * lam * live * next_adv;
    out.advantages[t] = next_adv;
    next_value = values[t];
  }
  out.returns = out.advantages + values;
  return out;
}

}  // namespace codesign
