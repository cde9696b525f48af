#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include "specmesh/core/error.hpp"
#include "specmesh/core/vec3.hpp"
#include "specmesh/graph/mesh.hpp"
#include "specmesh/graph/sparse_matrix.hpp"

namespace specmesh {

struct ClosestPoint {
  double dist2;
  std::array<double, 3> bary;  // weights of (a, b, c), each in [0, 1], summing to 1
};

/// Closest point of triangle (a, b, c) to p, as clamped barycentric weights.
inline ClosestPoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  auto make = [&](double u, double v, double w) {
    const Vec3 q = u * a + v * b + w * c;
    const Vec3 d = p - q;
    return ClosestPoint{dot(d, d), {u, v, w}};
  };
  const double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0 && d2 <= 0) return make(1, 0, 0);
  const Vec3 bp = p - b;
  const double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0 && d4 <= d3) return make(0, 1, 0);
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) {
    const double v = d1 / (d1 - d3);
    return make(1 - v, v, 0);
  }
  const Vec3 cp = p - c;
  const double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0 && d5 <= d6) return make(0, 0, 1);
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) {
    const double w = d2 / (d2 - d6);
    return make(1 - w, 0, w);
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return make(0, 1 - w, w);
  }
  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return make(1 - v - w, v, w);
}

namespace detail {

/// Uniform grid over triangle bounding boxes. Queries return exactly what a
/// linear scan would: the minimum (distance^2, face index) pair.
class TriangleGrid {
 public:
  TriangleGrid(const Mesh& mesh, const std::vector<Vec3>& extra_points) : mesh_(mesh) {
    lo_ = {std::numeric_limits<double>::max(), std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
    hi_ = {-lo_[0], -lo_[1], -lo_[2]};
    auto grow = [&](const Vec3& p) {
      for (int k = 0; k < 3; ++k) {
        lo_[k] = std::min(lo_[k], p[k]);
        hi_[k] = std::max(hi_[k], p[k]);
      }
    };
    for (const Vec3& p : mesh.vertices()) grow(p);
    for (const Vec3& p : extra_points) grow(p);
    const double res = std::max(1.0, std::cbrt(static_cast<double>(mesh.face_count())));
    for (int k = 0; k < 3; ++k) {
      const double ext = std::max(hi_[k] - lo_[k], 1e-12);
      dims_[k] = static_cast<int>(std::max(1.0, std::ceil(res)));
      cell_[k] = ext / dims_[k];
    }
    cells_.resize(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2]);
    for (std::uint32_t f = 0; f < mesh.face_count(); ++f) {
      const Face& t = mesh.faces()[f];
      std::array<int, 3> a{}, b{};
      for (int k = 0; k < 3; ++k) {
        double mn = std::min({mesh.vertices()[t[0]][k], mesh.vertices()[t[1]][k], mesh.vertices()[t[2]][k]});
        double mx = std::max({mesh.vertices()[t[0]][k], mesh.vertices()[t[1]][k], mesh.vertices()[t[2]][k]});
        a[k] = coord(mn, k);
        b[k] = coord(mx, k);
      }
      for (int x = a[0]; x <= b[0]; ++x)
        for (int y = a[1]; y <= b[1]; ++y)
          for (int z = a[2]; z <= b[2]; ++z) cells_[index(x, y, z)].push_back(f);
    }
    stamp_.assign(mesh.face_count(), 0);
    min_cell_ = std::min({cell_[0], cell_[1], cell_[2]});
  }

  std::pair<std::uint32_t, ClosestPoint> nearest(const Vec3& p) {
    ++query_;
    const std::array<int, 3> c{coord(p[0], 0), coord(p[1], 1), coord(p[2], 2)};
    const int max_r = std::max({dims_[0], dims_[1], dims_[2]});
    std::uint32_t best_face = UINT32_MAX;
    ClosestPoint best{std::numeric_limits<double>::max(), {0, 0, 0}};
    for (int r = 0; r <= max_r; ++r) {
      if (r >= 1) {
        const double bound = (r - 1) * min_cell_;
        if (bound * bound > best.dist2) break;
      }
      for (int x = c[0] - r; x <= c[0] + r; ++x)
        for (int y = c[1] - r; y <= c[1] + r; ++y)
          for (int z = c[2] - r; z <= c[2] + r; ++z) {
            if (std::max({std::abs(x - c[0]), std::abs(y - c[1]), std::abs(z - c[2])}) != r) continue;
            if (x < 0 || y < 0 || z < 0 || x >= dims_[0] || y >= dims_[1] || z >= dims_[2]) continue;
            for (std::uint32_t f : cells_[index(x, y, z)]) {
              if (stamp_[f] == query_) continue;
              stamp_[f] = query_;
              const Face& t = mesh_.faces()[f];
              const ClosestPoint cp = closest_point_on_triangle(p, mesh_.vertices()[t[0]], mesh_.vertices()[t[1]],
                                                                mesh_.vertices()[t[2]]);
              if (cp.dist2 < best.dist2 || (cp.dist2 == best.dist2 && f < best_face)) {
                best = cp;
                best_face = f;
              }
            }
          }
    }
    return {best_face, best};
  }

 private:
  int coord(double v, int k) const {
    const int i = static_cast<int>(std::floor((v - lo_[k]) / cell_[k]));
    return std::clamp(i, 0, dims_[k] - 1);
  }
  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(x) * dims_[1] + y) * dims_[2] + z;
  }

  const Mesh& mesh_;
  Vec3 lo_{}, hi_{};
  std::array<int, 3> dims_{};
  std::array<double, 3> cell_{};
  double min_cell_ = 0;
  std::vector<std::vector<std::uint32_t>> cells_;
  std::vector<std::uint64_t> stamp_;
  std::uint64_t query_ = 0;
};

}  // namespace detail

/// Nearest coarse triangle by linear scan; ties go to the lowest face index.
inline std::pair<std::uint32_t, ClosestPoint> nearest_triangle_scan(const Mesh& coarse, const Vec3& p) {
  std::uint32_t best_face = UINT32_MAX;
  ClosestPoint best{std::numeric_limits<double>::max(), {0, 0, 0}};
  for (std::uint32_t f = 0; f < coarse.face_count(); ++f) {
    const Face& t = coarse.faces()[f];
    const ClosestPoint cp =
        closest_point_on_triangle(p, coarse.vertices()[t[0]], coarse.vertices()[t[1]], coarse.vertices()[t[2]]);
    if (cp.dist2 < best.dist2) {
      best = cp;
      best_face = f;
    }
  }
  return {best_face, best};
}

/// Up-sampling matrix (fine x coarse). Kept vertices map one-hot to their
/// coarse counterpart; every discarded vertex gets the barycentric weights of
/// its projection onto the nearest coarse triangle.
inline SparseMatrix<double> build_upsample(const Mesh& fine, const Mesh& coarse, const SparseMatrix<double>& q_down,
                                           std::size_t grid_threshold = 2048) {
  const std::size_t n = fine.vertex_count(), m = coarse.vertex_count();
  require(q_down.rows() == m && q_down.cols() == n, "build_upsample: q_down must be coarse x fine");
  require(coarse.face_count() > 0, "build_upsample: coarse mesh has no faces");
  std::vector<std::int64_t> coarse_of(n, -1);
  for (std::size_t r = 0; r < m; ++r) {
    require(q_down.row_end(r) - q_down.row_begin(r) == 1 && q_down.values()[q_down.row_begin(r)] == 1.0,
            "build_upsample: q_down row " + std::to_string(r) + " is not one-hot");
    const std::uint32_t c = q_down.col_idx()[q_down.row_begin(r)];
    require(coarse_of[c] < 0, "build_upsample: q_down selects fine vertex " + std::to_string(c) + " twice");
    coarse_of[c] = static_cast<std::int64_t>(r);
  }

  std::vector<Vec3> discarded;
  for (std::size_t j = 0; j < n; ++j)
    if (coarse_of[j] < 0) discarded.push_back(fine.vertices()[j]);
  const bool use_grid = coarse.face_count() > grid_threshold;
  std::unique_ptr<detail::TriangleGrid> grid;
  if (use_grid) grid = std::make_unique<detail::TriangleGrid>(coarse, discarded);

  std::vector<Triplet<double>> trip;
  trip.reserve(n * 3);
  for (std::size_t j = 0; j < n; ++j) {
    const auto row = static_cast<std::uint32_t>(j);
    if (coarse_of[j] >= 0) {
      trip.push_back({row, static_cast<std::uint32_t>(coarse_of[j]), 1.0});
      continue;
    }
    const auto [face, cp] = use_grid ? grid->nearest(fine.vertices()[j]) : nearest_triangle_scan(coarse, fine.vertices()[j]);
    const Face& t = coarse.faces()[face];
    const double total = cp.bary[0] + cp.bary[1] + cp.bary[2];
    std::array<std::pair<std::uint32_t, double>, 3> w{{{t[0], cp.bary[0] / total},
                                                       {t[1], cp.bary[1] / total},
                                                       {t[2], cp.bary[2] / total}}};
    std::sort(w.begin(), w.end());
    for (const auto& [col, val] : w)
      if (val > 0.0) trip.push_back({row, col, std::min(val, 1.0)});
  }
  return SparseMatrix<double>::from_triplets(n, m, std::move(trip));
}

}  // namespace specmesh
