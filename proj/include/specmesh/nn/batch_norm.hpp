#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "specmesh/autodiff/diff_op.hpp"

namespace specmesh {

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

/// Per-channel normalization over every axis but the last. Train mode uses
/// batch statistics and updates running_mean / running_var as
/// run = 0.9 * run + 0.1 * batch (unbiased variance); eval mode uses the
/// running statistics.
template <typename T>
class BatchNorm : public DiffOp<T> {
 public:
  BatchNorm(ParameterStore<T>& store, const std::string& name, std::size_t channels) : name_(name), c_(channels) {
    scale_ = &store.add(name + ".scale", Shape{c_});
    scale_->value.fill(T(1));
    shift_ = &store.add(name + ".shift", Shape{c_});
    mean_ = &store.add(name + ".running_mean", Shape{c_}, false);
    var_ = &store.add(name + ".running_var", Shape{c_}, false);
    var_->value.fill(T(1));
  }

  std::string name() const override { return name_; }
  std::vector<Parameter<T>*> parameters() override { return {scale_, shift_, mean_, var_}; }

 protected:
  Tensor<T> do_forward(const Tensor<T>& x) override {
    require(x.rank() >= 1 && x.shape().back() == c_,
            name_ + ": expected " + std::to_string(c_) + " channels, got shape " + x.shape().str());
    const std::size_t M = x.shape().leading();
    std::vector<double> mean(c_, 0.0), var(c_, 0.0);
    if (this->training()) {
      require(M >= 1, name_ + ": empty batch");
      for (std::size_t r = 0; r < M; ++r)
        for (std::size_t c = 0; c < c_; ++c) mean[c] += x[r * c_ + c];
      for (double& m : mean) m /= static_cast<double>(M);
      for (std::size_t r = 0; r < M; ++r)
        for (std::size_t c = 0; c < c_; ++c) {
          const double d = x[r * c_ + c] - mean[c];
          var[c] += d * d;
        }
      for (std::size_t c = 0; c < c_; ++c) {
        const double biased = var[c] / static_cast<double>(M);
        const double unbiased = M > 1 ? var[c] / static_cast<double>(M - 1) : biased;
        var[c] = biased;
        mean_->value[c] = static_cast<T>(kBatchNormMomentum * mean_->value[c] + (1 - kBatchNormMomentum) * mean[c]);
        var_->value[c] = static_cast<T>(kBatchNormMomentum * var_->value[c] + (1 - kBatchNormMomentum) * unbiased);
      }
    } else {
      for (std::size_t c = 0; c < c_; ++c) {
        mean[c] = mean_->value[c];
        var[c] = var_->value[c];
      }
    }
    inv_std_.assign(c_, T(0));
    for (std::size_t c = 0; c < c_; ++c) inv_std_[c] = static_cast<T>(1.0 / std::sqrt(var[c] + kBatchNormEps));
    xhat_ = Tensor<T>(x.shape());
    auto y = Tensor<T>::uninitialized(x.shape());
    for (std::size_t r = 0; r < M; ++r)
      for (std::size_t c = 0; c < c_; ++c) {
        const std::size_t i = r * c_ + c;
        xhat_[i] = static_cast<T>((x[i] - mean[c]) * inv_std_[c]);
        y[i] = scale_->value[c] * xhat_[i] + shift_->value[c];
      }
    batch_stats_ = this->training();
    return y;
  }

  Tensor<T> do_backward(const Tensor<T>& g) override {
    require(g.shape() == xhat_.shape(), name_ + ": gradient shape mismatch");
    const std::size_t M = g.shape().leading();
    std::vector<double> sum_g(c_, 0.0), sum_gx(c_, 0.0);
    for (std::size_t r = 0; r < M; ++r)
      for (std::size_t c = 0; c < c_; ++c) {
        const std::size_t i = r * c_ + c;
        sum_g[c] += g[i];
        sum_gx[c] += static_cast<double>(g[i]) * xhat_[i];
      }
    for (std::size_t c = 0; c < c_; ++c) {
      scale_->grad[c] += static_cast<T>(sum_gx[c]);
      shift_->grad[c] += static_cast<T>(sum_g[c]);
    }
    auto dx = Tensor<T>::uninitialized(g.shape());
    const double inv_m = 1.0 / static_cast<double>(M);
    for (std::size_t r = 0; r < M; ++r)
      for (std::size_t c = 0; c < c_; ++c) {
        const std::size_t i = r * c_ + c;
        const double k = static_cast<double>(scale_->value[c]) * inv_std_[c];
        if (batch_stats_)
          dx[i] = static_cast<T>(k * (g[i] - inv_m * sum_g[c] - xhat_[i] * inv_m * sum_gx[c]));
        else
          dx[i] = static_cast<T>(k * g[i]);
      }
    xhat_ = Tensor<T>();
    return dx;
  }

 private:
  std::string name_;
  std::size_t c_;
  Parameter<T>* scale_;
  Parameter<T>* shift_;
  Parameter<T>* mean_;
  Parameter<T>* var_;
  std::vector<T> inv_std_;
  Tensor<T> xhat_;
  bool batch_stats_ = true;
};

}  // namespace specmesh
