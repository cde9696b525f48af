#pragma once

#include <string>
#include <vector>

#include "specmesh/autodiff/diff_op.hpp"

namespace specmesh {

inline constexpr double kLeakySlope = 0.2;

/// y = x for x >= 0, slope * x otherwise. The kink at 0 is declared through
/// the sign pattern of the input.
template <typename T>
class LeakyRelu : public DiffOp<T> {
 public:
  explicit LeakyRelu(std::string name = "leaky_relu", double slope = kLeakySlope)
      : name_(std::move(name)), slope_(static_cast<T>(slope)) {}

  std::string name() const override { return name_; }

  std::uint64_t kink_signature() const override {
    KinkHasher h;
    for (std::size_t i = 0; i < input_.size(); ++i) h.add_bit(input_[i] < T(0));
    return h.value();
  }

 protected:
  Tensor<T> do_forward(const Tensor<T>& x) override {
    input_ = x;
    auto y = Tensor<T>::uninitialized(x.shape());
    const T* in = x.data();
    T* out = y.data();
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = in[i] < T(0) ? slope_ * in[i] : in[i];
    return y;
  }

  Tensor<T> do_backward(const Tensor<T>& g) override {
    require(g.size() == input_.size(), name_ + ": gradient shape mismatch");
    auto dx = Tensor<T>::uninitialized(g.shape());
    const T* in = input_.data();
    const T* gi = g.data();
    T* out = dx.data();
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = in[i] < T(0) ? slope_ * gi[i] : gi[i];
    return dx;
  }

 private:
  std::string name_;
  T slope_;
  Tensor<T> input_;
};

}  // namespace specmesh
