#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "codesign/error.hpp"

namespace codesign {

/// Running per-feature mean and variance (parallel-merge form). Features
/// before `skip` pass through untouched; the rest are standardised and
/// clipped to +-clip.
struct RunningNormalizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
  double count = 0.0;
  int skip = 0;
  double clip = 5.0;
  double eps = 1e-8;

  RunningNormalizer() = default;
  RunningNormalizer(int dim, int skip_prefix = 0, double clip_at = 5.0)
      : mean(Eigen::VectorXd::Zero(dim)), var(Eigen::VectorXd::Ones(dim)), skip(skip_prefix), clip(clip_at) {}

  int dim() const { return static_cast<int>(mean.size()); }

  /// Merges the statistics of the columns of x.
  void update(const Eigen::MatrixXd& x) {
    if (x.rows() != dim()) throw Error(ErrorCode::ShapeMismatch, "normalizer input rows");
    const double n = static_cast<double>(x.cols());
    if (n == 0) return;
    const Eigen::VectorXd bm = x.rowwise().mean();
    const Eigen::VectorXd bv = (x.colwise() - bm).array().square().rowwise().sum() / n;
    const double total = count + n;
    const Eigen::VectorXd delta = bm - mean;
    mean += delta * (n / total);
    var = (var * count + bv * n + delta.cwiseProduct(delta) * (count * n / total)) / total;
    count = total;
  }

  void normalize_inplace(Eigen::MatrixXd& x) const {
    if (x.rows() != dim()) throw Error(ErrorCode::ShapeMismatch, "normalizer input rows");
    const int n = dim() - skip;
    if (n <= 0) return;
    const Eigen::ArrayXd inv_std = (var.tail(n).array() + eps).rsqrt();
    auto block = x.bottomRows(n).array();
    block.colwise() -= mean.tail(n).array();
    block.colwise() *= inv_std;
    block = block.max(-clip).min(clip);
  }

  Eigen::MatrixXd normalize(Eigen::MatrixXd x) const {
    normalize_inplace(x);
    return x;
  }

  double std_dev(int i) const { return std::sqrt(var[i] + eps); }
};

/// Scalar running statistics used to standardise value targets.
struct ValueNormalizer {
  double mean = 0.0;
  double var = 1.0;
  double count = 0.0;
  double eps = 1e-8;

  void update(const Eigen::VectorXd& x) {
    const double n = static_cast<double>(x.size());
    if (n == 0) return;
    const double bm = x.mean();
    const double bv = (x.array() - bm).square().mean();
    const double total = count + n;
    const double delta = bm - mean;
    mean += delta * n / total;
    var = (var * count + bv * n + delta * delta * count * n / total) / total;
    count = total;
  }
  double scale() const { return std::sqrt(var + eps); }
  double normalize(double v) const { return (v - mean) / scale(); }
  double denormalize(double v) const { return v * scale() + mean; }
};

}  // namespace codesign
