#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <vector>

#include "specmesh/core/error.hpp"
#include "specmesh/graph/mesh.hpp"
#include "specmesh/sampling/decimate.hpp"

namespace specmesh {

/// Subdivided icosahedron on a sphere of the given radius: 10 * 4^k + 2 vertices.
inline Mesh icosphere(int subdivisions, double radius = 1.0) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  std::vector<Face> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                         {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                         {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (Vec3& p : v) p = (1.0 / norm(p)) * p;
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> mid;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      Vec3 p = 0.5 * (v[a] + v[b]);
      p = (1.0 / norm(p)) * p;
      v.push_back(p);
      const auto idx = static_cast<std::uint32_t>(v.size() - 1);
      mid.emplace(key, idx);
      return idx;
    };
    std::vector<Face> next;
    next.reserve(f.size() * 4);
    for (const Face& t : f) {
      const std::uint32_t a = midpoint(t[0], t[1]), b = midpoint(t[1], t[2]), c = midpoint(t[2], t[0]);
      next.push_back({t[0], a, c});
      next.push_back({t[1], b, a});
      next.push_back({t[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  for (Vec3& p : v) p = radius * p;
  return Mesh(std::move(v), std::move(f));
}

/// Latitude/longitude sphere: rings * segments + 2 vertices (two poles).
inline Mesh uv_sphere(std::uint32_t rings, std::uint32_t segments, double radius = 1.0) {
  require(rings >= 1 && segments >= 3, "uv_sphere: need rings >= 1 and segments >= 3");
  std::vector<Vec3> v;
  v.push_back({0, radius, 0});
  for (std::uint32_t r = 0; r < rings; ++r) {
    const double phi = std::numbers::pi * (r + 1) / (rings + 1);
    for (std::uint32_t s = 0; s < segments; ++s) {
      const double theta = 2.0 * std::numbers::pi * s / segments;
      v.push_back({radius * std::sin(phi) * std::cos(theta), radius * std::cos(phi), radius * std::sin(phi) * std::sin(theta)});
    }
  }
  v.push_back({0, -radius, 0});
  const std::uint32_t south = static_cast<std::uint32_t>(v.size() - 1);
  auto at = [&](std::uint32_t r, std::uint32_t s) { return 1 + r * segments + (s % segments); };
  std::vector<Face> f;
  for (std::uint32_t s = 0; s < segments; ++s) f.push_back({0, at(0, s + 1), at(0, s)});
  for (std::uint32_t r = 0; r + 1 < rings; ++r)
    for (std::uint32_t s = 0; s < segments; ++s) {
      f.push_back({at(r, s), at(r, s + 1), at(r + 1, s)});
      f.push_back({at(r, s + 1), at(r + 1, s + 1), at(r + 1, s)});
    }
  for (std::uint32_t s = 0; s < segments; ++s) f.push_back({south, at(rings - 1, s), at(rings - 1, s + 1)});
  return Mesh(std::move(v), std::move(f));
}

/// Sphere with exactly `vertex_count` vertices: an icosphere (the smallest
/// subdivision with at least that many vertices) decimated to the count, with
/// the survivors pushed back onto the sphere.
inline Mesh sphere_mesh(std::size_t vertex_count, double radius = 1.0) {
  require(vertex_count >= 12, "sphere_mesh: need at least 12 vertices");
  int k = 0;
  while (10 * (std::size_t{1} << (2 * k)) + 2 < vertex_count) ++k;
  Mesh ico = icosphere(k, radius);
  if (ico.vertex_count() == vertex_count) return ico;
  DecimationResult d = decimate(ico, vertex_count);
  std::vector<Vec3> v = d.coarse.vertices();
  for (Vec3& p : v) p = (radius / norm(p)) * p;
  return Mesh(std::move(v), d.coarse.faces());
}

}  // namespace specmesh
