#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "specmesh/core/error.hpp"
#include "specmesh/core/tensor.hpp"

namespace specmesh {

/// A named tensor with its gradient and momentum buffer. Non-trainable
/// entries (batch-norm running statistics) are stored and checkpointed but
/// never updated by the optimizer.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> velocity;
  bool trainable = true;
};

/// Insertion-ordered collection of parameters. Entries have stable addresses,
/// so layers can hold raw pointers to them.
template <typename T>
class ParameterStore {
 public:
  Parameter<T>& add(const std::string& name, Shape shape, bool trainable = true) {
    require(!index_.contains(name), "ParameterStore: duplicate parameter name '" + name + "'");
    auto p = std::make_unique<Parameter<T>>();
    p->name = name;
    p->value = Tensor<T>(shape);
    p->grad = Tensor<T>(shape);
    p->velocity = Tensor<T>(shape);
    p->trainable = trainable;
    index_.emplace(name, entries_.size());
    entries_.push_back(std::move(p));
    return *entries_.back();
  }

  Parameter<T>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : entries_[it->second].get();
  }
  const Parameter<T>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : entries_[it->second].get();
  }

  std::size_t size() const { return entries_.size(); }
  Parameter<T>& operator[](std::size_t i) { return *entries_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return *entries_[i]; }

  void zero_grad() {
    for (auto& p : entries_) p->grad.fill(T(0));
  }

  /// Number of trainable scalars.
  std::size_t trainable_count() const {
    std::size_t n = 0;
    for (const auto& p : entries_)
      if (p->trainable) n += p->value.size();
    return n;
  }

  /// Number of stored scalars, trainable or not.
  std::size_t total_count() const {
    std::size_t n = 0;
    for (const auto& p : entries_) n += p->value.size();
    return n;
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace specmesh
