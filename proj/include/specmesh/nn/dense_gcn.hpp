#pragma once

#include <memory>
#include <string>
#include <vector>

#include "specmesh/nn/activation.hpp"
#include "specmesh/nn/batch_norm.hpp"
#include "specmesh/nn/graph_layers.hpp"
#include "specmesh/nn/linear.hpp"
#include "specmesh/nn/sequential.hpp"

namespace specmesh {

struct DenseGcnSpec {
  std::size_t in_channels = 0;
  std::size_t growth = 0;
  std::size_t fuse_out = 0;
  std::size_t order = 3;
  std::size_t layer_count = 4;
  bool fuse_bias = true;

  std::size_t layer_input(std::size_t t) const { return in_channels + t * growth; }
  std::size_t fusion_input() const { return in_channels + layer_count * growth; }
};

/// Densely connected graph block: layer t sees the block input concatenated
/// with the outputs of layers 0..t-1 and emits `growth` channels
/// (ChebConv -> BN -> leaky). A per-vertex linear map fuses the final
/// concatenation to fuse_out channels.
template <typename T>
class DenseGcnBlock : public DiffOp<T> {
 public:
  DenseGcnBlock(ParameterStore<T>& store, const std::string& name, const DenseGcnSpec& spec, Rng& rng)
      : name_(name), spec_(spec) {
    require(spec.in_channels > 0 && spec.growth > 0 && spec.fuse_out > 0 && spec.layer_count > 0,
            name + ": inconsistent DenseGCN spec");
    for (std::size_t t = 0; t < spec.layer_count; ++t) {
      const std::string ln = name + ".layer" + std::to_string(t);
      auto seq = std::make_unique<Sequential<T>>(ln);
      convs_.push_back(&seq->add(std::make_unique<ChebConv<T>>(store, ln + ".cheb", spec.layer_input(t), spec.growth,
                                                                spec.order, false, rng)));
      seq->add(std::make_unique<BatchNorm<T>>(store, ln + ".bn", spec.growth));
      seq->add(std::make_unique<LeakyRelu<T>>(ln + ".act"));
      layers_.push_back(std::move(seq));
    }
    fusion_ = std::make_unique<Linear<T>>(store, name + ".fuse", spec.fusion_input(), spec.fuse_out, spec.fuse_bias, rng);
  }

  void bind(std::shared_ptr<const GraphOperator<T>> lhat) {
    for (auto* c : convs_) c->bind(lhat);
  }

  std::string name() const override { return name_; }
  const DenseGcnSpec& spec() const { return spec_; }

  std::vector<Parameter<T>*> parameters() override {
    std::vector<Parameter<T>*> out;
    for (auto& l : layers_)
      for (auto* p : l->parameters()) out.push_back(p);
    for (auto* p : fusion_->parameters()) out.push_back(p);
    return out;
  }

  void set_training(bool training) override {
    DiffOp<T>::set_training(training);
    for (auto& l : layers_) l->set_training(training);
    fusion_->set_training(training);
  }

  std::uint64_t kink_signature() const override {
    KinkHasher h;
    for (const auto& l : layers_) h.add(l->kink_signature());
    return h.value();
  }

 protected:
  Tensor<T> do_forward(const Tensor<T>& x) override {
    std::vector<Tensor<T>> feats{x};
    for (auto& layer : layers_) feats.push_back(layer->forward(concat(feats, feats.size())));
    return fusion_->forward(concat(feats, feats.size()));
  }

  Tensor<T> do_backward(const Tensor<T>& g) override {
    const std::size_t L = spec_.layer_count;
    std::vector<std::size_t> widths{spec_.in_channels};
    for (std::size_t t = 0; t < L; ++t) widths.push_back(spec_.growth);
    std::vector<Tensor<T>> grads = split_last<T>(fusion_->backward(g), widths);
    for (std::size_t t = L; t-- > 0;) {
      const Tensor<T> gin = layers_[t]->backward(grads[t + 1]);
      const std::vector<std::size_t> w(widths.begin(), widths.begin() + static_cast<std::ptrdiff_t>(t + 1));
      auto parts = split_last<T>(gin, w);
      for (std::size_t p = 0; p <= t; ++p) grads[p] += parts[p];
    }
    return std::move(grads[0]);
  }

 private:
  static Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t n) {
    if (n == 1) return parts[0];
    std::vector<const Tensor<T>*> ptrs;
    for (std::size_t i = 0; i < n; ++i) ptrs.push_back(&parts[i]);
    return concat_last<T>(ptrs);
  }

  std::string name_;
  DenseGcnSpec spec_;
  std::vector<std::unique_ptr<Sequential<T>>> layers_;
  std::vector<ChebConv<T>*> convs_;
  std::unique_ptr<Linear<T>> fusion_;
};

}  // namespace specmesh
