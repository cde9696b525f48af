#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "specmesh/autodiff/diff_op.hpp"

namespace specmesh {

/// Chain of ops applied in order; backward runs them in reverse.
template <typename T>
class Sequential : public DiffOp<T> {
 public:
  explicit Sequential(std::string name) : name_(std::move(name)) {}

  template <typename Op>
  Op& add(std::unique_ptr<Op> op) {
    Op& ref = *op;
    ops_.push_back(std::move(op));
    return ref;
  }

  std::string name() const override { return name_; }
  std::size_t size() const { return ops_.size(); }
  DiffOp<T>& operator[](std::size_t i) { return *ops_[i]; }

  std::vector<Parameter<T>*> parameters() override {
    std::vector<Parameter<T>*> out;
    for (auto& op : ops_)
      for (auto* p : op->parameters()) out.push_back(p);
    return out;
  }

  void set_training(bool training) override {
    DiffOp<T>::set_training(training);
    for (auto& op : ops_) op->set_training(training);
  }

  std::uint64_t kink_signature() const override {
    KinkHasher h;
    for (const auto& op : ops_) h.add(op->kink_signature());
    return h.value();
  }

 protected:
  Tensor<T> do_forward(const Tensor<T>& x) override {
    Tensor<T> y = x;
    for (auto& op : ops_) y = op->forward(y);
    return y;
  }

  Tensor<T> do_backward(const Tensor<T>& g) override {
    Tensor<T> grad = g;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) grad = (*it)->backward(grad);
    return grad;
  }

 private:
  std::string name_;
  std::vector<std::unique_ptr<DiffOp<T>>> ops_;
};

}  // namespace specmesh
