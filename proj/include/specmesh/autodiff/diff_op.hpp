#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specmesh/autodiff/parameter_store.hpp"
#include "specmesh/core/error.hpp"
#include "specmesh/core/tensor.hpp"

namespace specmesh {

/// A differentiable single-input operation with explicit saved activations.
///
/// forward() stores whatever backward() needs; backward() consumes it, returns
/// the input gradient and adds parameter gradients into Parameter::grad. A
/// backward() without a preceding forward() is an error.
template <typename T>
class DiffOp {
 public:
  virtual ~DiffOp() = default;

  virtual std::string name() const = 0;

  Tensor<T> forward(const Tensor<T>& x) {
    Tensor<T> y = do_forward(x);
    ready_ = true;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad_output) {
    if (!ready_) throw ValidationError(name() + ": backward without a matching forward (stale activations)");
    ready_ = false;
    return do_backward(grad_output);
  }

  virtual std::vector<Parameter<T>*> parameters() { return {}; }

  /// Train/eval switch; only batch normalization behaves differently.
  virtual void set_training(bool training) { training_ = training; }
  bool training() const { return training_; }

  /// Fingerprint of the branch taken at every non-smooth point during the last
  /// forward (activation signs, loss regions). Finite differences whose
  /// perturbed evaluations change it straddle a kink and are excluded.
  virtual std::uint64_t kink_signature() const { return 0; }

 protected:
  virtual Tensor<T> do_forward(const Tensor<T>& x) = 0;
  virtual Tensor<T> do_backward(const Tensor<T>& grad_output) = 0;

 private:
  bool ready_ = false;
  bool training_ = true;
};

/// Incremental FNV-1a over branch decisions.
class KinkHasher {
 public:
  void add(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h_ ^= (v >> (8 * i)) & 0xFF;
      h_ *= 0x100000001B3ULL;
    }
  }
  void add_bit(bool b) {
    h_ ^= b ? 0x9E : 0x3C;
    h_ *= 0x100000001B3ULL;
  }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xCBF29CE484222325ULL;
};

}  // namespace specmesh
