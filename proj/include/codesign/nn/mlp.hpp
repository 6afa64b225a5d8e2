#pragma once

// Dense multilayer perceptron with ELU hidden activations and a linear output
// layer. Parameters live in one flat vector (per layer: weights column-major,
// then biases) so optimisers and checkpoints can treat them as a single
// tensor. Inputs are batched column-wise: an (input_dim x B) matrix.

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "codesign/error.hpp"

namespace codesign {

inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
inline double elu_grad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }

/// Activations recorded by a forward pass; consumed by exactly one backward.
struct GradTape {
  std::vector<Eigen::MatrixXd> inputs;  // input to each layer
  std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer
  bool consumed = false;
  bool recorded = false;
};

class Mlp {
 public:
  Mlp() = default;
  Mlp(int input, std::vector<int> hidden, int output) {
    sizes_.push_back(input);
    for (int h : hidden) sizes_.push_back(h);
    sizes_.push_back(output);
    for (int s : sizes_) {
      if (s < 1) throw Error(ErrorCode::ShapeMismatch, "layer sizes must be positive");
    }
    Eigen::Index off = 0;
    for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offsets_.push_back(off);
      off += static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
    }
    params_ = Eigen::VectorXd::Zero(off);
  }

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int layer_count() const { return static_cast<int>(sizes_.size()) - 1; }
  const std::vector<int>& sizes() const { return sizes_; }
  Eigen::Index param_count() const { return params_.size(); }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  Eigen::Map<Eigen::MatrixXd> weight(int l) {
    return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
  }
  Eigen::Map<const Eigen::MatrixXd> weight(int l) const {
    return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
  }
  Eigen::Map<Eigen::VectorXd> bias(int l) {
    return {params_.data() + offsets_[l] + sizes_[l] * sizes_[l + 1], sizes_[l + 1]};
  }
  Eigen::Map<const Eigen::VectorXd> bias(int l) const {
    return {params_.data() + offsets_[l] + sizes_[l] * sizes_[l + 1], sizes_[l + 1]};
  }
  // Offset of layer l's weights inside params().
  Eigen::Index weight_offset(int l) const { return offsets_[l]; }
  Eigen::Index bias_offset(int l) const { return offsets_[l] + sizes_[l] * sizes_[l + 1]; }

  /// Orthogonal weights scaled by gain (hidden layers) and output_gain (last
  /// layer); zero biases.
  void init_orthogonal(std::mt19937_64& rng, double hidden_gain, double output_gain) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int l = 0; l < layer_count(); ++l) {
      const int rows = sizes_[l + 1], cols = sizes_[l];
      const int big = std::max(rows, cols), small = std::min(rows, cols);
      Eigen::MatrixXd g(big, small);
      for (Eigen::Index k = 0; k < g.size(); ++k) g.data()[k] = normal(rng);
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
      Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
      const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(small, small);
      for (int c = 0; c < small; ++c) {
        if (r(c, c) < 0.0) q.col(c) *= -1.0;
      }
      const double gain = l + 1 == layer_count() ? output_gain : hidden_gain;
      weight(l) = gain * (rows >= cols ? q : Eigen::MatrixXd(q.transpose()));
      bias(l).setZero();
    }
  }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const {
    check_input(x);
    Eigen::MatrixXd a = x;
    for (int l = 0; l < layer_count(); ++l) {
      Eigen::MatrixXd z = weight(l) * a;
      z.colwise() += bias(l);
      if (l + 1 < layer_count()) z = z.unaryExpr([](double v) { return elu(v); });
      a = std::move(z);
    }
    return a;
  }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const {
    return forward(Eigen::MatrixXd(x)).col(0);
  }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, GradTape& tape) const {
    check_input(x);
    tape = GradTape{};
    tape.recorded = true;
    Eigen::MatrixXd a = x;
    for (int l = 0; l < layer_count(); ++l) {
      Eigen::MatrixXd z = weight(l) * a;
      z.colwise() += bias(l);
      tape.inputs.push_back(std::move(a));
      if (l + 1 < layer_count()) {
        a = z.unaryExpr([](double v) { return elu(v); });
        tape.pre.push_back(std::move(z));
      } else {
        tape.pre.push_back(z);
        a = std::move(z);
      }
    }
    return a;
  }

  /// Gradient of sum(dy .* y) with respect to the parameters, summed over the
  /// batch. Optionally also the gradient with respect to the input.
  Eigen::VectorXd backward(GradTape& tape, const Eigen::MatrixXd& dy, Eigen::MatrixXd* dx = nullptr) const {
    if (!tape.recorded) throw Error(ErrorCode::TapeConsumed, "tape holds no forward pass");
    if (tape.consumed) throw Error(ErrorCode::TapeConsumed, "backward already ran on this tape");
    const Eigen::Index batch = tape.inputs.front().cols();
    if (dy.rows() != output_dim() || dy.cols() != batch) {
      throw Error(ErrorCode::ShapeMismatch, "output gradient shape");
    }
    tape.consumed = true;
    Eigen::VectorXd grad(param_count());
    Eigen::MatrixXd delta = dy;
    for (int l = layer_count() - 1; l >= 0; --l) {
      if (l + 1 < layer_count()) {
        delta.array() *= tape.pre[l].unaryExpr([](double v) { return elu_grad(v); }).array();
      }
      Eigen::Map<Eigen::MatrixXd>(grad.data() + weight_offset(l), sizes_[l + 1], sizes_[l]).noalias() =
          delta * tape.inputs[l].transpose();
      grad.segment(bias_offset(l), sizes_[l + 1]) = delta.rowwise().sum();
      if (l > 0 || dx) {
        Eigen::MatrixXd next = weight(l).transpose() * delta;
        delta = std::move(next);
      }
    }
    if (dx) *dx = std::move(delta);
    tape.inputs.clear();
    tape.pre.clear();
    return grad;
  }

 private:
  void check_input(const Eigen::MatrixXd& x) const {
    if (sizes_.empty() || x.rows() != input_dim()) {
      throw Error(ErrorCode::ShapeMismatch, "input has " + std::to_string(x.rows()) + " rows, expected " +
                                                std::to_string(sizes_.empty() ? 0 : input_dim()));
    }
  }

  std::vector<int> sizes_;
  std::vector<Eigen::Index> offsets_;
  Eigen::VectorXd params_;
};

}  // namespace codesign
