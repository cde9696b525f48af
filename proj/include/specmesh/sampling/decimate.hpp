#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <queue>
#include <vector>

#include "specmesh/core/error.hpp"
#include "specmesh/core/vec3.hpp"
#include "specmesh/graph/mesh.hpp"
#include "specmesh/graph/sparse_matrix.hpp"

namespace specmesh {

/// Symmetric 4x4 plane quadric, upper triangle stored row by row:
/// [aa ab ac ad | bb bc bd | cc cd | dd].
struct Quadric {
  std::array<double, 10> q{};

  static Quadric from_plane(double a, double b, double c, double d) {
    return {{a * a, a * b, a * c, a * d, b * b, b * c, b * d, c * c, c * d, d * d}};
  }
  Quadric& operator+=(const Quadric& o) {
    for (int i = 0; i < 10; ++i) q[i] += o.q[i];
    return *this;
  }
  friend Quadric operator+(Quadric a, const Quadric& b) { return a += b; }

  double evaluate(const Vec3& v) const {
    const double x = v[0], y = v[1], z = v[2];
    return q[0] * x * x + 2 * q[1] * x * y + 2 * q[2] * x * z + 2 * q[3] * x + q[4] * y * y + 2 * q[5] * y * z +
           2 * q[6] * y + q[7] * z * z + 2 * q[8] * z + q[9];
  }

  /// Minimizer of the quadric, or nothing when the 3x3 block is singular.
  bool minimizer(Vec3& out, double det_threshold = 1e-12) const {
    const double a = q[0], b = q[1], c = q[2], d = q[4], e = q[5], f = q[7];
    const double det = a * (d * f - e * e) - b * (b * f - c * e) + c * (b * e - c * d);
    if (std::abs(det) < det_threshold) return false;
    const double r0 = -q[3], r1 = -q[6], r2 = -q[8];
    // Cramer's rule on the symmetric system.
    out[0] = (r0 * (d * f - e * e) - b * (r1 * f - e * r2) + c * (r1 * e - d * r2)) / det;
    out[1] = (a * (r1 * f - e * r2) - r0 * (b * f - c * e) + c * (b * r2 - r1 * c)) / det;
    out[2] = (a * (d * r2 - r1 * e) - b * (b * r2 - r1 * c) + r0 * (b * e - c * d)) / det;
    return true;
  }
};

struct Contraction {
  std::uint32_t survivor;
  std::uint32_t removed;
  double cost;
};

struct DecimationResult {
  Mesh coarse;
  SparseMatrix<double> q_down;           // m x n selection of surviving fine vertices
  std::vector<std::uint32_t> kept;       // fine index of each coarse vertex, ascending
  std::vector<Contraction> log;
};

namespace detail {

class EdgeCollapser {
 public:
  explicit EdgeCollapser(const Mesh& mesh)
      : pos_(mesh.vertices()),
        faces_(mesh.faces()),
        face_alive_(mesh.face_count(), 1),
        vertex_alive_(mesh.vertex_count(), 1),
        version_(mesh.vertex_count(), 0),
        quadric_(mesh.vertex_count()),
        vface_(mesh.vertex_count()) {
    for (std::uint32_t f = 0; f < faces_.size(); ++f) {
      const Face& t = faces_[f];
      for (std::uint32_t v : t) vface_[v].push_back(f);
      Vec3 n = cross(pos_[t[1]] - pos_[t[0]], pos_[t[2]] - pos_[t[0]]);
      const double len = norm(n);
      if (len <= 0.0) continue;
      n = (1.0 / len) * n;
      const Quadric k = Quadric::from_plane(n[0], n[1], n[2], -dot(n, pos_[t[0]]));
      for (std::uint32_t v : t) quadric_[v] += k;
    }
    remaining_ = mesh.vertex_count();
  }

  void run(std::size_t target) {
    rebuild_heap();
    std::size_t collapses_since_rebuild = 0;
    while (remaining_ > target) {
      if (heap_.empty()) {
        if (collapses_since_rebuild == 0) {
          if (!check_flips_)
            throw NumericError("decimate: no admissible edge collapse left at " + std::to_string(remaining_) +
                               " vertices");
          check_flips_ = false;
        }
        rebuild_heap();
        collapses_since_rebuild = 0;
        continue;
      }
      const Candidate c = heap_.top();
      heap_.pop();
      if (!vertex_alive_[c.u] || !vertex_alive_[c.v] || version_[c.u] != c.ver_u || version_[c.v] != c.ver_v) continue;
      if (!admissible(c.u, c.v, c.target)) continue;
      collapse(c);
      ++collapses_since_rebuild;
    }
  }

  DecimationResult result(std::size_t fine_count) const {
    DecimationResult r;
    std::vector<std::uint32_t> index(fine_count, UINT32_MAX);
    std::vector<Vec3> verts;
    for (std::uint32_t v = 0; v < fine_count; ++v) {
      if (!vertex_alive_[v]) continue;
      index[v] = static_cast<std::uint32_t>(r.kept.size());
      r.kept.push_back(v);
      verts.push_back(pos_[v]);
    }
    std::vector<Face> faces;
    for (std::uint32_t f = 0; f < faces_.size(); ++f) {
      if (!face_alive_[f]) continue;
      const Face& t = faces_[f];
      faces.push_back({index[t[0]], index[t[1]], index[t[2]]});
    }
    std::vector<Triplet<double>> sel;
    for (std::uint32_t i = 0; i < r.kept.size(); ++i) sel.push_back({i, r.kept[i], 1.0});
    r.q_down = SparseMatrix<double>::from_triplets(r.kept.size(), fine_count, std::move(sel));
    r.coarse = Mesh(std::move(verts), std::move(faces));
    r.log = log_;
    return r;
  }

 private:
  struct Candidate {
    double cost;
    std::uint32_t u, v;  // u < v; u survives
    std::uint64_t ver_u, ver_v;
    Vec3 target;
  };
  struct Later {
    bool operator()(const Candidate& a, const Candidate& b) const {
      if (a.cost != b.cost) return a.cost > b.cost;
      if (a.u != b.u) return a.u > b.u;
      return a.v > b.v;
    }
  };

  Candidate make_candidate(std::uint32_t a, std::uint32_t b) const {
    const std::uint32_t u = std::min(a, b), v = std::max(a, b);
    const Quadric q = quadric_[u] + quadric_[v];
    Vec3 target;
    if (!q.minimizer(target)) target = 0.5 * (pos_[u] + pos_[v]);
    return {q.evaluate(target), u, v, version_[u], version_[v], target};
  }

  std::vector<std::uint32_t> neighbors(std::uint32_t v) const {
    std::vector<std::uint32_t> out;
    for (std::uint32_t f : vface_[v])
      for (std::uint32_t w : faces_[f])
        if (w != v) out.push_back(w);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  std::size_t faces_on_edge(std::uint32_t a, std::uint32_t b) const {
    std::size_t n = 0;
    for (std::uint32_t f : vface_[a]) {
      const Face& t = faces_[f];
      if (t[0] == b || t[1] == b || t[2] == b) ++n;
    }
    return n;
  }

  bool on_boundary(std::uint32_t v) const {
    for (std::uint32_t w : neighbors(v))
      if (faces_on_edge(v, w) == 1) return true;
    return false;
  }

  void rebuild_heap() {
    heap_ = {};
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (std::uint32_t f = 0; f < faces_.size(); ++f) {
      if (!face_alive_[f]) continue;
      const Face& t = faces_[f];
      for (int e = 0; e < 3; ++e) edges.emplace_back(std::min(t[e], t[(e + 1) % 3]), std::max(t[e], t[(e + 1) % 3]));
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    for (const auto& [a, b] : edges) heap_.push(make_candidate(a, b));
  }

  bool admissible(std::uint32_t u, std::uint32_t v, const Vec3& target) const {
    // Link condition: common neighbours must be exactly the apexes of the edge's faces.
    std::vector<std::uint32_t> apex;
    for (std::uint32_t f : vface_[u]) {
      const Face& t = faces_[f];
      if (t[0] != v && t[1] != v && t[2] != v) continue;
      for (std::uint32_t w : t)
        if (w != u && w != v) apex.push_back(w);
    }
    std::sort(apex.begin(), apex.end());
    const auto nu = neighbors(u), nv = neighbors(v);
    std::vector<std::uint32_t> common;
    std::set_intersection(nu.begin(), nu.end(), nv.begin(), nv.end(), std::back_inserter(common));
    if (common != apex) return false;
    if (apex.size() >= 2 && on_boundary(u) && on_boundary(v)) return false;

    if (check_flips_) {
      for (std::uint32_t moved : {u, v}) {
        for (std::uint32_t f : vface_[moved]) {
          const Face& t = faces_[f];
          const bool has_u = t[0] == u || t[1] == u || t[2] == u;
          const bool has_v = t[0] == v || t[1] == v || t[2] == v;
          if (has_u && has_v) continue;
          std::array<Vec3, 3> p{pos_[t[0]], pos_[t[1]], pos_[t[2]]};
          const Vec3 before = cross(p[1] - p[0], p[2] - p[0]);
          for (int k = 0; k < 3; ++k)
            if (t[k] == moved) p[k] = target;
          const Vec3 after = cross(p[1] - p[0], p[2] - p[0]);
          if (dot(before, after) <= 0.0) return false;
        }
      }
    }
    return true;
  }

  void collapse(const Candidate& c) {
    const std::uint32_t s = c.u, r = c.v;
    pos_[s] = c.target;
    quadric_[s] += quadric_[r];
    for (std::uint32_t f : vface_[r]) {
      Face& t = faces_[f];
      const bool has_s = t[0] == s || t[1] == s || t[2] == s;
      if (has_s) {
        face_alive_[f] = 0;
        for (std::uint32_t w : t)
          if (w != r) std::erase(vface_[w], f);
      } else {
        for (auto& w : t)
          if (w == r) w = s;
        vface_[s].push_back(f);
      }
    }
    std::sort(vface_[s].begin(), vface_[s].end());
    vface_[r].clear();
    vertex_alive_[r] = 0;
    ++version_[s];
    ++version_[r];
    --remaining_;
    log_.push_back({s, r, c.cost});
    for (std::uint32_t w : neighbors(s)) heap_.push(make_candidate(s, w));
  }

  std::vector<Vec3> pos_;
  std::vector<Face> faces_;
  std::vector<char> face_alive_;
  std::vector<char> vertex_alive_;
  std::vector<std::uint64_t> version_;
  std::vector<Quadric> quadric_;
  std::vector<std::vector<std::uint32_t>> vface_;
  std::priority_queue<Candidate, std::vector<Candidate>, Later> heap_;
  std::vector<Contraction> log_;
  std::size_t remaining_ = 0;
  bool check_flips_ = true;
};

}  // namespace detail

/// Greedy quadric-error edge collapse down to exactly `target` vertices.
///
/// Candidates are existing edges, ordered by quadric cost with ties broken by
/// the smaller vertex index, then the larger. The smaller original index
/// survives each collapse and moves to the quadric minimizer (edge midpoint
/// when the 3x3 system is singular). Collapses must satisfy the link condition
/// and, while possible, must not flip any face normal.
inline DecimationResult decimate(const Mesh& mesh, std::size_t target) {
  const std::size_t n = mesh.vertex_count();
  require(target >= 4 && target <= n, "decimate: target " + std::to_string(target) + " outside [4, " +
                                          std::to_string(n) + "]");
  require(mesh.face_count() > 0, "decimate: mesh has no faces, quadrics are undefined");
  detail::EdgeCollapser collapser(mesh);
  collapser.run(target);
  return collapser.result(n);
}

}  // namespace specmesh
