#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "specmesh/autodiff/diff_op.hpp"
#include "specmesh/graph/sparse_matrix.hpp"
#include "specmesh/nn/init.hpp"
#include "specmesh/nn/matrix_map.hpp"

namespace specmesh {

/// A sparse operator in the layer precision together with its transpose.
template <typename T>
struct GraphOperator {
  SparseMatrix<T> forward;
  SparseMatrix<T> adjoint;

  static std::shared_ptr<const GraphOperator> make(const SparseMatrix<double>& m) {
    auto op = std::make_shared<GraphOperator>();
    op->forward = m.cast<T>();
    op->adjoint = op->forward.transpose();
    return op;
  }
};

namespace detail {
/// Views B x N x F (or N x F) as (B, N, F).
inline std::array<std::size_t, 3> graph_dims(const Shape& s, const std::string& who) {
  require(s.rank() == 2 || s.rank() == 3, who + ": expected N x F or B x N x F input, got " + s.str());
  if (s.rank() == 2) return {1, s[0], s[1]};
  return {s[0], s[1], s[2]};
}

template <typename T>
void apply_per_sample(const SparseMatrix<T>& m, const T* x, std::size_t batch, std::size_t width, T* y) {
  for (std::size_t b = 0; b < batch; ++b) m.multiply(x + b * m.cols() * width, width, y + b * m.rows() * width);
}
}  // namespace detail

/// Chebyshev spectral graph convolution y = sum_{k=0}^{K-1} T_k(L_hat) x theta_k
/// (+ bias), with T_0 x = x, T_1 x = L_hat x, T_k x = 2 L_hat T_{k-1} x - T_{k-2} x.
/// theta is stored as {K, F_in, F_out}.
template <typename T>
class ChebConv : public DiffOp<T> {
 public:
  ChebConv(ParameterStore<T>& store, const std::string& name, std::size_t in, std::size_t out, std::size_t order,
           bool bias, Rng& rng)
      : name_(name), in_(in), out_(out), order_(order) {
    require(order >= 1, name + ": Chebyshev order K must be >= 1");
    require(in > 0 && out > 0, name + ": widths must be positive");
    theta_ = &store.add(name + ".theta", Shape{order, in, out});
    init_fan_in_uniform(theta_->value, order * in, rng);
    if (bias) bias_ = &store.add(name + ".bias", Shape{out});
  }

  void bind(std::shared_ptr<const GraphOperator<T>> lhat) {
    require(lhat && lhat->forward.rows() == lhat->forward.cols(), name_ + ": L_hat must be square");
    lhat_ = std::move(lhat);
  }

  std::string name() const override { return name_; }
  std::vector<Parameter<T>*> parameters() override {
    if (bias_) return {theta_, bias_};
    return {theta_};
  }
  Parameter<T>& theta() { return *theta_; }

 protected:
  Tensor<T> do_forward(const Tensor<T>& x) override {
    require(lhat_ != nullptr, name_ + ": no Laplacian bound");
    const auto [B, N, F] = detail::graph_dims(x.shape(), name_);
    require(N == lhat_->forward.rows(), name_ + ": vertex count " + std::to_string(N) + " does not match L_hat (" +
                                            std::to_string(lhat_->forward.rows()) + ")");
    require(F == in_, name_ + ": expected " + std::to_string(in_) + " input channels, got " + std::to_string(F));
    in_shape_ = x.shape();
    const std::size_t rows = B * N, KF = order_ * F;
    // Basis T_k x for all k side by side, one column block per order.
    basis_ = Tensor<T>::uninitialized(Shape{rows, KF});
    T* z = basis_.data();
    for (std::size_t r = 0; r < rows; ++r) std::copy(x.data() + r * F, x.data() + (r + 1) * F, z + r * KF);
    for (std::size_t k = 1; k < order_; ++k) {
      for (std::size_t b = 0; b < B; ++b) {
        T* zb = z + b * N * KF;
        lhat_->forward.multiply(zb + (k - 1) * F, F, zb + k * F, KF, KF);
      }
      if (k < 2) continue;
      for (std::size_t r = 0; r < rows; ++r) {
        T* t = z + r * KF + k * F;
        const T* prev2 = z + r * KF + (k - 2) * F;
        for (std::size_t f = 0; f < F; ++f) t[f] = T(2) * t[f] - prev2[f];
      }
    }
    auto y = Tensor<T>::uninitialized(x.shape().with_back(out_));
    auto ym = as_matrix(y.data(), rows, out_);
    ym.noalias() = as_matrix(z, rows, KF) * as_matrix(theta_->value.data(), KF, out_);
    if (bias_) ym.rowwise() += as_matrix(bias_->value.data(), 1, out_).row(0);
    return y;
  }

  Tensor<T> do_backward(const Tensor<T>& g) override {
    require(g.shape() == in_shape_.with_back(out_), name_ + ": gradient shape mismatch");
    const auto [B, N, F] = detail::graph_dims(in_shape_, name_);
    const std::size_t rows = B * N, KF = order_ * F;
    auto gm = as_matrix(g.data(), rows, out_);
    if (bias_) as_matrix(bias_->grad.data(), 1, out_).row(0) += gm.colwise().sum();
    as_matrix(theta_->grad.data(), KF, out_).noalias() += as_matrix(basis_.data(), rows, KF).transpose() * gm;
    auto dz = Tensor<T>::uninitialized(Shape{rows, KF});
    T* d = dz.data();
    as_matrix(d, rows, KF).noalias() = gm * as_matrix(theta_->value.data(), KF, out_).transpose();
    auto tmp = Tensor<T>::uninitialized(Shape{rows, F});
    for (std::size_t k = order_ - 1; k >= 1; --k) {
      for (std::size_t b = 0; b < B; ++b) lhat_->adjoint.multiply(d + b * N * KF + k * F, F, tmp.data() + b * N * F, KF, F);
      for (std::size_t r = 0; r < rows; ++r) {
        const T* t = tmp.data() + r * F;
        T* a = d + r * KF + (k - 1) * F;
        if (k >= 2) {
          T* c = d + r * KF + (k - 2) * F;
          const T* gk = d + r * KF + k * F;
          for (std::size_t f = 0; f < F; ++f) {
            a[f] += T(2) * t[f];
            c[f] -= gk[f];
          }
        } else {
          for (std::size_t f = 0; f < F; ++f) a[f] += t[f];
        }
      }
    }
    auto dx = Tensor<T>::uninitialized(in_shape_);
    for (std::size_t r = 0; r < rows; ++r) std::copy(d + r * KF, d + r * KF + F, dx.data() + r * F);
    basis_ = Tensor<T>();
    return dx;
  }

 private:
  std::string name_;
  std::size_t in_, out_, order_;
  Parameter<T>* theta_ = nullptr;
  Parameter<T>* bias_ = nullptr;
  std::shared_ptr<const GraphOperator<T>> lhat_;
  Shape in_shape_;
  Tensor<T> basis_;
};

/// y = Q_u x per sample; backward multiplies by Q_u^T.
template <typename T>
class GraphUpsample : public DiffOp<T> {
 public:
  explicit GraphUpsample(std::string name = "graph_upsample") : name_(std::move(name)) {}

  void bind(std::shared_ptr<const GraphOperator<T>> q_up) { q_ = std::move(q_up); }

  std::string name() const override { return name_; }

 protected:
  Tensor<T> do_forward(const Tensor<T>& x) override {
    require(q_ != nullptr, name_ + ": no up-sampling matrix bound");
    const auto [B, M, C] = detail::graph_dims(x.shape(), name_);
    require(M == q_->forward.cols(), name_ + ": input has " + std::to_string(M) + " vertices, Q_u expects " +
                                         std::to_string(q_->forward.cols()));
    in_shape_ = x.shape();
    const std::size_t n = q_->forward.rows();
    auto y = Tensor<T>::uninitialized(x.rank() == 2 ? Shape{n, C} : Shape{B, n, C});
    detail::apply_per_sample(q_->forward, x.data(), B, C, y.data());
    return y;
  }

  Tensor<T> do_backward(const Tensor<T>& g) override {
    const auto [B, M, C] = detail::graph_dims(in_shape_, name_);
    require(g.size() == B * q_->forward.rows() * C, name_ + ": gradient shape mismatch");
    Tensor<T> dx(in_shape_);
    detail::apply_per_sample(q_->adjoint, g.data(), B, C, dx.data());
    return dx;
  }

 private:
  std::string name_;
  std::shared_ptr<const GraphOperator<T>> q_;
  Shape in_shape_;
};

}  // namespace specmesh
