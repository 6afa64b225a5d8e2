#pragma once

#include <Eigen/Core>
#include <cmath>

#include "codesign/error.hpp"

namespace codesign {

/// First/second-moment adaptive optimiser with bias correction.
struct Adam {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long steps = 0;

  Adam() = default;
  explicit Adam(Eigen::Index n) { reset(n); }

  void reset(Eigen::Index n) {
    m = Eigen::VectorXd::Zero(n);
    v = Eigen::VectorXd::Zero(n);
    steps = 0;
  }

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
    if (params.size() != grad.size() || params.size() != m.size()) {
      throw Error(ErrorCode::ShapeMismatch, "adam: parameter/gradient/state lengths differ");
    }
    ++steps;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(steps));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(steps));
    params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

inline void adam_update(Eigen::VectorXd& params, const Eigen::VectorXd& grads, double lr, Adam& state) {
  state.step(params, grads, lr);
}

}  // namespace codesign
