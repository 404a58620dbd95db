#pragma once

#include <array>
#include <cmath>
#include <string>

#include <Eigen/Core>

#include "fesarm/errors.hpp"
#include "fesarm/rng.hpp"

namespace fesarm {

/// Fully connected network with exactly two rectified hidden layers and a
/// linear output. Parameters live in one flat vector (layer by layer: weight
/// matrix in column-major order, then bias) so that optimisers, Polyak
/// averaging and checkpoints operate on a single array.
///
/// Batches are column-major: one sample per column.
template <class S>
class Mlp {
public:
  using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;
  using Sizes = std::array<int, 4>;
  static constexpr int kLayers = 3;

  struct Cache {
    Matrix x;
    Matrix h1;
    Matrix h2;
  };

  Mlp() = default;
  explicit Mlp(const Sizes& sizes) : sizes_(sizes) {
    for (int s : sizes)
      if (s <= 0) throw InvalidInput("layer sizes must be positive");
    int n = 0;
    for (int l = 0; l < kLayers; ++l) {
      offset_[l] = n;
      n += sizes[l + 1] * sizes[l] + sizes[l + 1];
    }
    params_ = Vector::Zero(n);
  }

  const Sizes& sizes() const { return sizes_; }
  int input_dim() const { return sizes_[0]; }
  int output_dim() const { return sizes_[3]; }
  Eigen::Index parameter_count() const { return params_.size(); }
  Vector& params() { return params_; }
  const Vector& params() const { return params_; }

  Eigen::Map<Matrix> weight(int l) { return {params_.data() + offset_[l], sizes_[l + 1], sizes_[l]}; }
  Eigen::Map<const Matrix> weight(int l) const { return {params_.data() + offset_[l], sizes_[l + 1], sizes_[l]}; }
  Eigen::Map<Vector> bias(int l) { return {params_.data() + offset_[l] + sizes_[l + 1] * sizes_[l], sizes_[l + 1]}; }
  Eigen::Map<const Vector> bias(int l) const {
    return {params_.data() + offset_[l] + sizes_[l + 1] * sizes_[l], sizes_[l + 1]};
  }

  /// Uniform fan-in initialisation: every weight and bias of layer l is drawn
  /// from U(-1/sqrt(fan_in), 1/sqrt(fan_in)), layer by layer in storage order.
  void init(Pcg32& rng, double output_scale = 1.0) {
    for (int l = 0; l < kLayers; ++l) {
      const double bound = (l == kLayers - 1 ? output_scale : 1.0) / std::sqrt(static_cast<double>(sizes_[l]));
      const int n = sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
      for (int i = 0; i < n; ++i) params_[offset_[l] + i] = static_cast<S>(rng.uniform(-bound, bound));
    }
  }

  Matrix forward(const Matrix& x, Cache* cache = nullptr) const {
    if (x.rows() != sizes_[0]) throw InvalidInput("mlp input has " + std::to_string(x.rows()) + " rows, expected " + std::to_string(sizes_[0]));
    Matrix h1 = ((weight(0) * x).colwise() + bias(0)).cwiseMax(S(0));
    Matrix h2 = ((weight(1) * h1).colwise() + bias(1)).cwiseMax(S(0));
    Matrix y = (weight(2) * h2).colwise() + bias(2);
    if (cache) {
      cache->x = x;
      cache->h1 = std::move(h1);
      cache->h2 = std::move(h2);
    }
    return y;
  }

  /// Back-propagates dL/dy. Parameter gradients are accumulated into `grad`
  /// (same layout as params()); the input gradient is written to `dx` if given.
  void backward(const Cache& c, const Matrix& dy, Vector* grad, Matrix* dx = nullptr) const {
    if (dy.rows() != sizes_[3] || dy.cols() != c.x.cols()) throw InvalidInput("mlp backward: gradient shape mismatch");
    const auto accumulate = [&](int l, const Matrix& dz, const Matrix& in) {
      if (!grad) return;
      if (grad->size() != params_.size()) throw InvalidInput("mlp backward: gradient buffer has wrong size");
      Eigen::Map<Matrix>(grad->data() + offset_[l], sizes_[l + 1], sizes_[l]).noalias() += dz * in.transpose();
      Eigen::Map<Vector>(grad->data() + offset_[l] + sizes_[l + 1] * sizes_[l], sizes_[l + 1]) += dz.rowwise().sum();
    };
    accumulate(2, dy, c.h2);
    Matrix dz2 = (weight(2).transpose() * dy).cwiseProduct((c.h2.array() > S(0)).template cast<S>().matrix());
    accumulate(1, dz2, c.h1);
    Matrix dz1 = (weight(1).transpose() * dz2).cwiseProduct((c.h1.array() > S(0)).template cast<S>().matrix());
    accumulate(0, dz1, c.x);
    if (dx) *dx = weight(0).transpose() * dz1;
  }

private:
  Sizes sizes_{};
  std::array<int, kLayers> offset_{};
  Vector params_;
};

/// Adam: m <- b1 m + (1-b1) g, v <- b2 v + (1-b2) g^2,
/// p <- p - lr * m_hat / (sqrt(v_hat) + eps) with bias-corrected m_hat, v_hat.
template <class S>
struct Adam {
  using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Vector m;
  Vector v;
  long t = 0;

  Adam() = default;
  Adam(Eigen::Index n, double learning_rate) : lr(learning_rate), m(Vector::Zero(n)), v(Vector::Zero(n)) {}

  void step(Vector& params, const Vector& grad) {
    if (grad.size() != params.size() || m.size() != params.size()) throw InvalidInput("adam: size mismatch");
    ++t;
    m = S(beta1) * m + S(1 - beta1) * grad;
    v = S(beta2) * v + S(1 - beta2) * grad.cwiseAbs2();
    const S c1 = static_cast<S>(1.0 / (1.0 - std::pow(beta1, static_cast<double>(t))));
    const S c2 = static_cast<S>(1.0 / (1.0 - std::pow(beta2, static_cast<double>(t))));
    params.array() -= S(lr) * (m.array() * c1) / ((v.array() * c2).sqrt() + S(eps));
  }
};

/// target <- tau * online + (1 - tau) * target, parameter by parameter.
template <class S>
void soft_update(Mlp<S>& target, const Mlp<S>& online, double tau) {
  if (target.sizes() != online.sizes()) throw InvalidInput("soft_update: network shapes differ");
  if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidInput("soft_update: tau must lie in [0, 1]");
  if (tau == 1.0) {
    target.params() = online.params();
  } else if (tau > 0.0) {
    target.params() = S(tau) * online.params() + S(1.0 - tau) * target.params();
  }
}

}  // namespace fesarm
