#pragma once

#include <memory>
#include <string>
#include <vector>

#include "specmesh/nn/activation.hpp"
#include "specmesh/nn/batch_norm.hpp"
#include "specmesh/nn/conv2d.hpp"
#include "specmesh/nn/sequential.hpp"

namespace specmesh {

/// conv3x3 -> BN -> leaky -> conv3x3 -> BN -> leaky -> conv3x3 -> BN, plus a
/// shortcut, then leaky. The stride sits in the first conv; the shortcut is
/// the identity unless the stride or width changes, in which case it is a
/// strided 1x1 conv followed by BN.
template <typename T>
class ResidualBlock : public DiffOp<T> {
 public:
  ResidualBlock(ParameterStore<T>& store, const std::string& name, std::size_t in, std::size_t out,
                std::size_t stride, Rng& rng)
      : name_(name), main_(name + ".main"), act_(name + ".act") {
    std::size_t width = in;
    for (int i = 0; i < 3; ++i) {
      const std::string n = name + ".conv" + std::to_string(i);
      main_.add(std::make_unique<Conv2d<T>>(store, n, width, out, 3, i == 0 ? stride : 1, false, rng));
      main_.add(std::make_unique<BatchNorm<T>>(store, name + ".bn" + std::to_string(i), out));
      if (i < 2) main_.add(std::make_unique<LeakyRelu<T>>(name + ".act" + std::to_string(i)));
      width = out;
    }
    if (stride != 1 || in != out) {
      shortcut_ = std::make_unique<Sequential<T>>(name + ".proj");
      shortcut_->add(std::make_unique<Conv2d<T>>(store, name + ".proj.conv", in, out, 1, stride, false, rng));
      shortcut_->add(std::make_unique<BatchNorm<T>>(store, name + ".proj.bn", out));
    }
  }

  std::string name() const override { return name_; }
  bool has_projection() const { return shortcut_ != nullptr; }

  std::vector<Parameter<T>*> parameters() override {
    auto out = main_.parameters();
    if (shortcut_)
      for (auto* p : shortcut_->parameters()) out.push_back(p);
    return out;
  }

  void set_training(bool training) override {
    DiffOp<T>::set_training(training);
    main_.set_training(training);
    if (shortcut_) shortcut_->set_training(training);
  }

  std::uint64_t kink_signature() const override {
    KinkHasher h;
    h.add(main_.kink_signature());
    h.add(act_.kink_signature());
    return h.value();
  }

 protected:
  Tensor<T> do_forward(const Tensor<T>& x) override {
    Tensor<T> sum = main_.forward(x);
    if (shortcut_)
      sum += shortcut_->forward(x);
    else
      sum += x;
    return act_.forward(sum);
  }

  Tensor<T> do_backward(const Tensor<T>& g) override {
    const Tensor<T> gs = act_.backward(g);
    Tensor<T> dx = main_.backward(gs);
    if (shortcut_)
      dx += shortcut_->backward(gs);
    else
      dx += gs;
    return dx;
  }

 private:
  std::string name_;
  Sequential<T> main_;
  std::unique_ptr<Sequential<T>> shortcut_;
  LeakyRelu<T> act_;
};

}  // namespace specmesh
