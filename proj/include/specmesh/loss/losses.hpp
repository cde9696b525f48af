#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "specmesh/autodiff/diff_op.hpp"
#include "specmesh/core/error.hpp"

namespace specmesh {

enum class LossKind { paper, l1, l2, smooth_l1 };

inline LossKind parse_loss_kind(const std::string& s) {
  if (s == "paper" || s == "paper_eq3") return LossKind::paper;
  if (s == "l1") return LossKind::l1;
  if (s == "l2") return LossKind::l2;
  if (s == "smooth_l1") return LossKind::smooth_l1;
  throw ValidationError("unknown loss '" + s + "' (expected paper, l1, l2 or smooth_l1)");
}

inline std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::paper: return "paper";
    case LossKind::l1: return "l1";
    case LossKind::l2: return "l2";
    case LossKind::smooth_l1: return "smooth_l1";
  }
  return "?";
}

/// The exponential-then-linear loss uses w and epsilon; smooth_l1 uses beta.
struct LossSpec {
  LossKind kind = LossKind::paper;
  double w = 5.0;
  double epsilon = 4.0;
  double beta = 1.0;
  /// Errors are multiplied by this before the elementwise loss (1 for
  /// normalized coordinates, size / 2 for input-image pixels).
  double error_scale = 1.0;

  void validate() const {
    require(std::isfinite(error_scale) && error_scale > 0.0, "loss: error_scale must be positive");
    if (kind == LossKind::paper) {
      require(w > 0.0, "loss: W must be positive");
      require(epsilon > 0.0, "loss: epsilon must be positive");
    }
    if (kind == LossKind::smooth_l1) require(beta > 0.0, "loss: beta must be positive");
  }

  /// Offset joining the exponential and linear pieces: w - w (e^{w/eps} - 1).
  double c() const { return w - w * (std::exp(w / epsilon) - 1.0); }
};

inline double sign_of(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

/// Elementwise loss of a signed error.
inline double loss_element(double x, const LossSpec& s) {
  const double a = std::abs(x);
  switch (s.kind) {
    case LossKind::paper: return a < s.w ? s.w * (std::exp(a / s.epsilon) - 1.0) : a - s.c();
    case LossKind::l1: return a;
    case LossKind::l2: return x * x;
    case LossKind::smooth_l1: return a < s.beta ? 0.5 * x * x / s.beta : a - 0.5 * s.beta;
  }
  return 0.0;
}

/// Elementwise derivative. At |x| = w the exponential branch is used; at 0 the sign is 0.
inline double loss_element_derivative(double x, const LossSpec& s) {
  const double a = std::abs(x);
  switch (s.kind) {
    case LossKind::paper:
      return a <= s.w ? sign_of(x) * (s.w / s.epsilon) * std::exp(a / s.epsilon) : sign_of(x);
    case LossKind::l1: return sign_of(x);
    case LossKind::l2: return 2.0 * x;
    case LossKind::smooth_l1: return a < s.beta ? x / s.beta : sign_of(x);
  }
  return 0.0;
}

/// Branch taken at x, used to declare the non-smooth points.
inline int loss_region(double x, const LossSpec& s) {
  const double a = std::abs(x);
  const int sgn = static_cast<int>(sign_of(x));
  switch (s.kind) {
    case LossKind::paper: return sgn * (a < s.w ? 1 : (a == s.w ? 2 : 3));
    case LossKind::l1: return sgn;
    case LossKind::l2: return 0;
    case LossKind::smooth_l1: return sgn * (a < s.beta ? 1 : 2);
  }
  return 0;
}

/// Mean of the elementwise loss.
template <typename T>
double loss_value(const Tensor<T>& x, const LossSpec& s) {
  s.validate();
  require(x.size() > 0, "loss: empty error tensor");
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += loss_element(static_cast<double>(x[i]), s);
  return total / static_cast<double>(x.size());
}

/// Gradient of loss_value with respect to x.
template <typename T>
Tensor<T> loss_gradient(const Tensor<T>& x, const LossSpec& s) {
  s.validate();
  require(x.size() > 0, "loss: empty error tensor");
  Tensor<T> g(x.shape());
  const double inv = 1.0 / static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = static_cast<T>(loss_element_derivative(static_cast<double>(x[i]), s) * inv);
  return g;
}

/// Loss of (prediction - target) as a DiffOp with a scalar {1} output.
template <typename T>
class LossOp : public DiffOp<T> {
 public:
  explicit LossOp(LossSpec spec) : spec_(spec) { spec_.validate(); }

  void set_target(Tensor<T> target) { target_ = std::move(target); }
  std::string name() const override { return "loss_" + to_string(spec_.kind); }

  std::uint64_t kink_signature() const override {
    KinkHasher h;
    for (std::size_t i = 0; i < err_.size(); ++i) h.add(static_cast<std::uint64_t>(loss_region(err_[i], spec_) + 8));
    return h.value();
  }

 protected:
  Tensor<T> do_forward(const Tensor<T>& pred) override {
    require(pred.shape() == target_.shape(), name() + ": prediction " + pred.shape().str() + " vs target " +
                                                 target_.shape().str());
    err_ = pred;
    err_ -= target_;
    if (spec_.error_scale != 1.0) err_ *= static_cast<T>(spec_.error_scale);
    return Tensor<T>(Shape{1}, static_cast<T>(loss_value(err_, spec_)));
  }

  Tensor<T> do_backward(const Tensor<T>& g) override {
    require(g.size() == 1, name() + ": expected a scalar output gradient");
    Tensor<T> d = loss_gradient(err_, spec_);
    d *= static_cast<T>(static_cast<double>(g[0]) * spec_.error_scale);
    return d;
  }

 private:
  LossSpec spec_;
  Tensor<T> target_;
  Tensor<T> err_;
};

}  // namespace specmesh
