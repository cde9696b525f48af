#pragma once

#include <string>
#include <vector>

#include "specmesh/autodiff/diff_op.hpp"
#include "specmesh/core/parallel.hpp"
#include "specmesh/nn/init.hpp"
#include "specmesh/nn/matrix_map.hpp"

namespace specmesh {

/// Output extent of a "same" padded convolution: ceil(extent / stride).
inline std::size_t conv_output_extent(std::size_t extent, std::size_t stride) { return (extent + stride - 1) / stride; }

/// 2D cross-correlation over B x H x W x C tensors with zero padding
/// (kernel - 1) / 2. Weights are stored as {k, k, C_in, C_out}.
template <typename T>
class Conv2d : public DiffOp<T> {
 public:
  Conv2d(ParameterStore<T>& store, const std::string& name, std::size_t in_channels, std::size_t out_channels,
         std::size_t kernel, std::size_t stride, bool bias, Rng& rng)
      : name_(name), cin_(in_channels), cout_(out_channels), k_(kernel), stride_(stride) {
    require(kernel % 2 == 1, name + ": kernel size must be odd");
    require(stride == 1 || stride == 2, name + ": stride must be 1 or 2");
    require(in_channels > 0 && out_channels > 0, name + ": channel counts must be positive");
    weight_ = &store.add(name + ".weight", Shape{k_, k_, cin_, cout_});
    init_fan_in_uniform(weight_->value, k_ * k_ * cin_, rng);
    if (bias) bias_ = &store.add(name + ".bias", Shape{cout_});
  }

  std::string name() const override { return name_; }

  std::vector<Parameter<T>*> parameters() override {
    if (bias_) return {weight_, bias_};
    return {weight_};
  }

  Shape output_shape(const Shape& in) const {
    return Shape{in[0], conv_output_extent(in[1], stride_), conv_output_extent(in[2], stride_), cout_};
  }

 protected:
  Tensor<T> do_forward(const Tensor<T>& x) override {
    require(x.rank() == 4, name_ + ": expected B x H x W x C input, got " + x.shape().str());
    require(x.dim(3) == cin_, name_ + ": channel mismatch, expected " + std::to_string(cin_) + " got " +
                                  std::to_string(x.dim(3)));
    input_ = x;
    const Shape os = output_shape(x.shape());
    const std::size_t rows = os.leading(), width = k_ * k_ * cin_;
    const T* cols = im2col(x, cols_);
    auto y = Tensor<T>::uninitialized(os);
    as_matrix(y.data(), rows, cout_).noalias() = as_matrix(cols, rows, width) * as_matrix(weight_->value.data(), width, cout_);
    if (bias_) as_matrix(y.data(), rows, cout_).rowwise() += as_matrix(bias_->value.data(), 1, cout_).row(0);
    return y;
  }

  Tensor<T> do_backward(const Tensor<T>& g) override {
    const Shape os = output_shape(input_.shape());
    require(g.shape() == os, name_ + ": gradient shape " + g.shape().str() + " != output " + os.str());
    const std::size_t rows = os.leading(), width = k_ * k_ * cin_;
    const T* cols = im2col(input_, cols_);
    auto gm = as_matrix(g.data(), rows, cout_);
    as_matrix(weight_->grad.data(), width, cout_).noalias() += as_matrix(cols, rows, width).transpose() * gm;
    if (bias_) as_matrix(bias_->grad.data(), 1, cout_).row(0) += gm.colwise().sum();

    Tensor<T> dx;
    if (direct()) {
      dx = Tensor<T>::uninitialized(input_.shape());
      as_matrix(dx.data(), rows, cin_).noalias() = gm * as_matrix(weight_->value.data(), width, cout_).transpose();
    } else {
      dx = Tensor<T>(input_.shape());
      cols_.resize(rows * width);
      as_matrix(cols_.data(), rows, width).noalias() = gm * as_matrix(weight_->value.data(), width, cout_).transpose();
      col2im(cols_.data(), dx);
    }
    input_ = Tensor<T>();
    cols_ = AlignedVector<T>();
    return dx;
  }

 private:
  bool direct() const { return k_ == 1 && stride_ == 1; }

  /// Patch matrix with one row per output pixel, columns ordered (ky, kx, c).
  const T* im2col(const Tensor<T>& x, AlignedVector<T>& buf) const {
    if (direct()) return x.data();
    const std::size_t B = x.dim(0), H = x.dim(1), W = x.dim(2);
    const std::size_t Ho = conv_output_extent(H, stride_), Wo = conv_output_extent(W, stride_);
    const std::size_t width = k_ * k_ * cin_;
    const long pad = static_cast<long>(k_ / 2);
    buf.resize(B * Ho * Wo * width);
    parallel_for(B * Ho, [&](std::size_t bo) {
      const std::size_t b = bo / Ho, oy = bo % Ho;
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        T* row = buf.data() + (bo * Wo + ox) * width;
        for (std::size_t ky = 0; ky < k_; ++ky) {
          const long iy = static_cast<long>(oy * stride_ + ky) - pad;
          if (iy < 0 || iy >= static_cast<long>(H)) {
            std::fill(row + ky * k_ * cin_, row + (ky + 1) * k_ * cin_, T(0));
            continue;
          }
          for (std::size_t kx = 0; kx < k_; ++kx) {
            const long ix = static_cast<long>(ox * stride_ + kx) - pad;
            if (ix < 0 || ix >= static_cast<long>(W)) {
              std::fill(row + (ky * k_ + kx) * cin_, row + (ky * k_ + kx + 1) * cin_, T(0));
              continue;
            }
            const T* src = x.data() + ((b * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)) * cin_;
            std::copy(src, src + cin_, row + (ky * k_ + kx) * cin_);
          }
        }
      }
    });
    return buf.data();
  }

  void col2im(const T* dcols, Tensor<T>& dx) const {
    const std::size_t B = dx.dim(0), H = dx.dim(1), W = dx.dim(2);
    const std::size_t Ho = conv_output_extent(H, stride_), Wo = conv_output_extent(W, stride_);
    const std::size_t width = k_ * k_ * cin_;
    const long pad = static_cast<long>(k_ / 2);
    parallel_for(B, [&](std::size_t b) {
      for (std::size_t oy = 0; oy < Ho; ++oy)
        for (std::size_t ox = 0; ox < Wo; ++ox) {
          const T* row = dcols + ((b * Ho + oy) * Wo + ox) * width;
          for (std::size_t ky = 0; ky < k_; ++ky) {
            const long iy = static_cast<long>(oy * stride_ + ky) - pad;
            if (iy < 0 || iy >= static_cast<long>(H)) continue;
            for (std::size_t kx = 0; kx < k_; ++kx) {
              const long ix = static_cast<long>(ox * stride_ + kx) - pad;
              if (ix < 0 || ix >= static_cast<long>(W)) continue;
              T* dst = dx.data() + ((b * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)) * cin_;
              const T* src = row + (ky * k_ + kx) * cin_;
              for (std::size_t c = 0; c < cin_; ++c) dst[c] += src[c];
            }
          }
        }
    });
  }

  std::string name_;
  std::size_t cin_, cout_, k_, stride_;
  Parameter<T>* weight_ = nullptr;
  Parameter<T>* bias_ = nullptr;
  Tensor<T> input_;
  AlignedVector<T> cols_;
};

}  // namespace specmesh
