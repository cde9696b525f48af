#pragma once

#include <cmath>
#include <numbers>

#include "specmesh/core/rng.hpp"
#include "specmesh/core/tensor.hpp"
#include "specmesh/data/sample_io.hpp"

namespace specmesh {

inline constexpr double kAugmentMaxRotationDegrees = 45.0;
inline constexpr double kAugmentMaxShiftFraction = 0.1;
inline constexpr double kAugmentMinScale = 0.9;
inline constexpr double kAugmentMaxScale = 1.2;

/// 2D similarity about the image center: p' = s R(theta) p + t, with t in pixels.
struct Similarity2d {
  double theta_degrees = 0.0;
  double tx = 0.0;
  double ty = 0.0;
  double scale = 1.0;

  static Similarity2d draw(Rng& rng, std::size_t size) {
    Similarity2d t;
    t.theta_degrees = rng.uniform(-kAugmentMaxRotationDegrees, kAugmentMaxRotationDegrees);
    const double max_shift = kAugmentMaxShiftFraction * static_cast<double>(size);
    t.tx = rng.uniform(-max_shift, max_shift);
    t.ty = rng.uniform(-max_shift, max_shift);
    t.scale = rng.uniform(kAugmentMinScale, kAugmentMaxScale);
    return t;
  }

  double cos_theta() const { return theta_degrees == 0.0 ? 1.0 : std::cos(theta_degrees * std::numbers::pi / 180.0); }
  double sin_theta() const { return theta_degrees == 0.0 ? 0.0 : std::sin(theta_degrees * std::numbers::pi / 180.0); }
};

/// Resamples the image so content at p moves to s R p + t (bilinear, zero
/// outside). Coordinates are pixel offsets from the image center.
inline Tensor<float> transform_image(const Tensor<float>& image, const Similarity2d& t) {
  require(image.rank() == 3, "transform_image: expected H x W x C");
  const std::size_t H = image.dim(0), W = image.dim(1), C = image.dim(2);
  const double c = t.cos_theta(), s = t.sin_theta();
  const double hx = static_cast<double>(W) / 2.0, hy = static_cast<double>(H) / 2.0;
  Tensor<float> out(image.shape());
  auto pixel = [&](long r, long col, std::size_t ch) -> double {
    if (r < 0 || col < 0 || r >= static_cast<long>(H) || col >= static_cast<long>(W)) return 0.0;
    return image.at(static_cast<std::size_t>(r), static_cast<std::size_t>(col), ch);
  };
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t col = 0; col < W; ++col) {
      const double dx = (static_cast<double>(col) + 0.5 - hx) - t.tx;
      const double dy = (static_cast<double>(r) + 0.5 - hy) - t.ty;
      // Inverse map: R(-theta) (p' - t) / s.
      const double sx = (c * dx + s * dy) / t.scale + hx - 0.5;
      const double sy = (-s * dx + c * dy) / t.scale + hy - 0.5;
      const double fx = std::floor(sx), fy = std::floor(sy);
      const double ax = sx - fx, ay = sy - fy;
      const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
      for (std::size_t ch = 0; ch < C; ++ch) {
        const double v = (1 - ay) * ((1 - ax) * pixel(y0, x0, ch) + ax * pixel(y0, x0 + 1, ch)) +
                         ay * ((1 - ax) * pixel(y0 + 1, x0, ch) + ax * pixel(y0 + 1, x0 + 1, ch));
        out.at(r, col, ch) = static_cast<float>(v);
      }
    }
  return out;
}

/// Applies the image transform to normalized vertex coordinates: x, y follow
/// the pixels (translation rescaled by 2 / size), z is multiplied by s.
inline Tensor<float> transform_vertices(const Tensor<float>& v, const Similarity2d& t, std::size_t size) {
  require(v.rank() == 2 && v.dim(1) == 3, "transform_vertices: expected N x 3");
  const double c = t.cos_theta(), s = t.sin_theta();
  const double k = 2.0 / static_cast<double>(size);
  Tensor<float> out(v.shape());
  for (std::size_t i = 0; i < v.dim(0); ++i) {
    const double x = v.at(i, 0), y = v.at(i, 1), z = v.at(i, 2);
    out.at(i, 0) = static_cast<float>(t.scale * (c * x - s * y) + k * t.tx);
    out.at(i, 1) = static_cast<float>(t.scale * (s * x + c * y) + k * t.ty);
    out.at(i, 2) = static_cast<float>(t.scale * z);
  }
  return out;
}

inline SampleRecord augment(const SampleRecord& record, const Similarity2d& t) {
  validate_record(record);
  SampleRecord out = record;
  out.image = transform_image(record.image, t);
  out.gt_vertices = transform_vertices(record.gt_vertices, t, record.image.dim(0));
  return out;
}

inline SampleRecord augment(const SampleRecord& record, Rng& rng) {
  return augment(record, Similarity2d::draw(rng, record.image.dim(0)));
}

}  // namespace specmesh
