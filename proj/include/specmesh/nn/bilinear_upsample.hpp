#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "specmesh/autodiff/diff_op.hpp"
#include "specmesh/core/parallel.hpp"

namespace specmesh {

namespace detail {
struct LerpTap {
  std::size_t i0, i1;
  double w1;  // weight of i1; i0 gets 1 - w1
};

/// Source taps for factor-2 upsampling, sample centres at (o + 0.5) / 2 - 0.5, clamped at the edges.
inline std::vector<LerpTap> upsample_taps(std::size_t n) {
  std::vector<LerpTap> taps(2 * n);
  for (std::size_t o = 0; o < 2 * n; ++o) {
    const double src = std::max(0.0, (static_cast<double>(o) + 0.5) / 2.0 - 0.5);
    const auto i0 = std::min(static_cast<std::size_t>(std::floor(src)), n - 1);
    const std::size_t i1 = std::min(i0 + 1, n - 1);
    taps[o] = {i0, i1, src - static_cast<double>(i0)};
  }
  return taps;
}
}  // namespace detail

/// Factor-2 bilinear upsampling of B x H x W x C maps.
template <typename T>
class BilinearUpsample2x : public DiffOp<T> {
 public:
  explicit BilinearUpsample2x(std::string name = "upsample2x") : name_(std::move(name)) {}
  std::string name() const override { return name_; }

 protected:
  Tensor<T> do_forward(const Tensor<T>& x) override {
    require(x.rank() == 4 && x.dim(1) >= 1 && x.dim(2) >= 1, name_ + ": expected B x H x W x C input");
    in_shape_ = x.shape();
    const std::size_t B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
    const auto ty = detail::upsample_taps(H), tx = detail::upsample_taps(W);
    Tensor<T> y(Shape{B, 2 * H, 2 * W, C});
    parallel_for(B * 2 * H, [&](std::size_t row) {
      const std::size_t b = row / (2 * H), oy = row % (2 * H);
      const auto& a = ty[oy];
      for (std::size_t ox = 0; ox < 2 * W; ++ox) {
        const auto& t = tx[ox];
        const T w00 = static_cast<T>((1 - a.w1) * (1 - t.w1)), w01 = static_cast<T>((1 - a.w1) * t.w1);
        const T w10 = static_cast<T>(a.w1 * (1 - t.w1)), w11 = static_cast<T>(a.w1 * t.w1);
        const T* p00 = &x.at(b, a.i0, t.i0, 0);
        const T* p01 = &x.at(b, a.i0, t.i1, 0);
        const T* p10 = &x.at(b, a.i1, t.i0, 0);
        const T* p11 = &x.at(b, a.i1, t.i1, 0);
        T* out = &y.at(b, oy, ox, 0);
        for (std::size_t c = 0; c < C; ++c) out[c] = w00 * p00[c] + w01 * p01[c] + w10 * p10[c] + w11 * p11[c];
      }
    });
    return y;
  }

  Tensor<T> do_backward(const Tensor<T>& g) override {
    const std::size_t B = in_shape_[0], H = in_shape_[1], W = in_shape_[2], C = in_shape_[3];
    require(g.shape() == (Shape{B, 2 * H, 2 * W, C}), name_ + ": gradient shape mismatch");
    const auto ty = detail::upsample_taps(H), tx = detail::upsample_taps(W);
    Tensor<T> dx(in_shape_);
    parallel_for(B, [&](std::size_t b) {
      for (std::size_t oy = 0; oy < 2 * H; ++oy) {
        const auto& a = ty[oy];
        for (std::size_t ox = 0; ox < 2 * W; ++ox) {
          const auto& t = tx[ox];
          const T w00 = static_cast<T>((1 - a.w1) * (1 - t.w1)), w01 = static_cast<T>((1 - a.w1) * t.w1);
          const T w10 = static_cast<T>(a.w1 * (1 - t.w1)), w11 = static_cast<T>(a.w1 * t.w1);
          const T* gp = &g.at(b, oy, ox, 0);
          T* d00 = &dx.at(b, a.i0, t.i0, 0);
          T* d01 = &dx.at(b, a.i0, t.i1, 0);
          T* d10 = &dx.at(b, a.i1, t.i0, 0);
          T* d11 = &dx.at(b, a.i1, t.i1, 0);
          for (std::size_t c = 0; c < C; ++c) {
            d00[c] += w00 * gp[c];
            d01[c] += w01 * gp[c];
            d10[c] += w10 * gp[c];
            d11[c] += w11 * gp[c];
          }
        }
      }
    });
    return dx;
  }

 private:
  std::string name_;
  Shape in_shape_;
};

}  // namespace specmesh
