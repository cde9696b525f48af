#pragma once

#include <string>
#include <vector>

#include "specmesh/autodiff/diff_op.hpp"
#include "specmesh/nn/init.hpp"
#include "specmesh/nn/matrix_map.hpp"

namespace specmesh {

/// Fully connected layer over the last axis: y = x W + b with W stored as
/// {in, out}. Leading axes are batch (or vertex) axes.
template <typename T>
class Linear : public DiffOp<T> {
 public:
  Linear(ParameterStore<T>& store, const std::string& name, std::size_t in, std::size_t out, bool bias, Rng& rng)
      : name_(name), in_(in), out_(out) {
    require(in > 0 && out > 0, name + ": widths must be positive");
    weight_ = &store.add(name + ".weight", Shape{in, out});
    init_fan_in_uniform(weight_->value, in, rng);
    if (bias) bias_ = &store.add(name + ".bias", Shape{out});
  }

  std::string name() const override { return name_; }
  std::vector<Parameter<T>*> parameters() override {
    if (bias_) return {weight_, bias_};
    return {weight_};
  }
  Parameter<T>& weight() { return *weight_; }
  Parameter<T>* bias() { return bias_; }

 protected:
  Tensor<T> do_forward(const Tensor<T>& x) override {
    require(x.rank() >= 1 && x.shape().back() == in_, name_ + ": expected last extent " + std::to_string(in_) +
                                                           ", got shape " + x.shape().str());
    input_ = x;
    const std::size_t rows = x.shape().leading();
    Tensor<T> y(x.shape().with_back(out_));
    as_matrix(y.data(), rows, out_).noalias() = as_matrix(x.data(), rows, in_) * as_matrix(weight_->value.data(), in_, out_);
    if (bias_) as_matrix(y.data(), rows, out_).rowwise() += as_matrix(bias_->value.data(), 1, out_).row(0);
    return y;
  }

  Tensor<T> do_backward(const Tensor<T>& g) override {
    require(g.shape() == input_.shape().with_back(out_), name_ + ": gradient shape mismatch");
    const std::size_t rows = g.shape().leading();
    auto gm = as_matrix(g.data(), rows, out_);
    as_matrix(weight_->grad.data(), in_, out_).noalias() += as_matrix(input_.data(), rows, in_).transpose() * gm;
    if (bias_) as_matrix(bias_->grad.data(), 1, out_).row(0) += gm.colwise().sum();
    Tensor<T> dx(input_.shape());
    as_matrix(dx.data(), rows, in_).noalias() = gm * as_matrix(weight_->value.data(), in_, out_).transpose();
    input_ = Tensor<T>();
    return dx;
  }

 private:
  std::string name_;
  std::size_t in_, out_;
  Parameter<T>* weight_ = nullptr;
  Parameter<T>* bias_ = nullptr;
  Tensor<T> input_;
};

/// Flattens all axes after the first: B x ... -> B x prod(...).
template <typename T>
class Flatten : public DiffOp<T> {
 public:
  std::string name() const override { return "flatten"; }

 protected:
  Tensor<T> do_forward(const Tensor<T>& x) override {
    require(x.rank() >= 1, "flatten: rank-0 input");
    in_shape_ = x.shape();
    const std::size_t b = x.dim(0);
    return x.reshaped(Shape{b, b == 0 ? 0 : x.size() / b});
  }
  Tensor<T> do_backward(const Tensor<T>& g) override { return g.reshaped(in_shape_); }

 private:
  Shape in_shape_;
};

}  // namespace specmesh
