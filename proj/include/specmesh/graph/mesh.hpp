#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "specmesh/core/error.hpp"
#include "specmesh/core/vec3.hpp"
#include "specmesh/graph/sparse_matrix.hpp"

namespace specmesh {

using Face = std::array<std::uint32_t, 3>;

/// Symmetric 0/1 adjacency with an entry for every edge of every face.
/// Shared edges appear once.
inline SparseMatrix<double> build_adjacency(const std::vector<Face>& faces, std::size_t n) {
  require(n >= 1, "build_adjacency: vertex count must be positive");
  std::vector<std::vector<std::uint32_t>> nbrs(n);
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const Face& t = faces[f];
    for (std::uint32_t v : t)
      require(v < n, "build_adjacency: face " + std::to_string(f) + " index " + std::to_string(v) +
                         " out of range [0," + std::to_string(n) + ")");
    require(t[0] != t[1] && t[1] != t[2] && t[0] != t[2],
            "build_adjacency: degenerate face " + std::to_string(f) + " repeats a vertex");
    for (int e = 0; e < 3; ++e) {
      const std::uint32_t a = t[e], b = t[(e + 1) % 3];
      nbrs[a].push_back(b);
      nbrs[b].push_back(a);
    }
  }
  std::vector<Triplet<double>> trip;
  for (std::size_t i = 0; i < n; ++i) {
    auto& row = nbrs[i];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    for (std::uint32_t j : row) trip.push_back({static_cast<std::uint32_t>(i), j, 1.0});
  }
  return SparseMatrix<double>::from_triplets(n, n, std::move(trip));
}

/// Triangle mesh: vertex positions, faces and the face-derived adjacency.
class Mesh {
 public:
  Mesh() = default;
  Mesh(std::vector<Vec3> vertices, std::vector<Face> faces)
      : vertices_(std::move(vertices)), faces_(std::move(faces)) {
    require(!vertices_.empty(), "Mesh: no vertices");
    for (std::size_t i = 0; i < vertices_.size(); ++i)
      for (double c : vertices_[i])
        if (!std::isfinite(c)) throw ValidationError("Mesh: vertex " + std::to_string(i) + " is not finite");
    adjacency_ = build_adjacency(faces_, vertices_.size());
  }

  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t face_count() const { return faces_.size(); }
  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }
  const SparseMatrix<double>& adjacency() const { return adjacency_; }

  /// True when every vertex is reachable from vertex 0 along edges.
  bool is_edge_connected() const {
    const std::size_t n = vertex_count();
    std::vector<char> seen(n, 0);
    std::queue<std::size_t> q;
    q.push(0);
    seen[0] = 1;
    std::size_t count = 1;
    while (!q.empty()) {
      const std::size_t v = q.front();
      q.pop();
      for (std::size_t k = adjacency_.row_begin(v); k < adjacency_.row_end(v); ++k) {
        const std::size_t w = adjacency_.col_idx()[k];
        if (!seen[w]) {
          seen[w] = 1;
          ++count;
          q.push(w);
        }
      }
    }
    return count == n;
  }

  /// Area-weighted vertex normals (unit length where defined, zero otherwise).
  std::vector<Vec3> vertex_normals() const {
    std::vector<Vec3> nrm(vertex_count(), Vec3{0, 0, 0});
    for (const Face& f : faces_) {
      const Vec3 n = cross(vertices_[f[1]] - vertices_[f[0]], vertices_[f[2]] - vertices_[f[0]]);
      for (std::uint32_t v : f) nrm[v] = nrm[v] + n;
    }
    for (Vec3& n : nrm) {
      const double len = norm(n);
      if (len > 0) n = (1.0 / len) * n;
    }
    return nrm;
  }

  friend bool operator==(const Mesh& a, const Mesh& b) {
    return a.vertices_ == b.vertices_ && a.faces_ == b.faces_;
  }

 private:
  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
  SparseMatrix<double> adjacency_;
};

/// ASCII OFF: "OFF", "N F 0", N lines "x y z", F lines "3 i j k".
inline void write_off(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path);
  out << "OFF\n" << mesh.vertex_count() << ' ' << mesh.face_count() << " 0\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const Vec3& v : mesh.vertices()) out << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
  for (const Face& f : mesh.faces()) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  if (!out) throw ValidationError("write failed: " + path);
}

inline Mesh read_off(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::string header;
  in >> header;
  if (header != "OFF") throw FormatError(path + ": missing OFF header");
  long long n = -1, f = -1, e = -1;
  in >> n >> f >> e;
  if (!in || n < 1 || f < 0) throw FormatError(path + ": bad OFF counts line");
  std::vector<Vec3> verts(static_cast<std::size_t>(n));
  for (auto& v : verts) {
    in >> v[0] >> v[1] >> v[2];
    if (!in) throw FormatError(path + ": truncated vertex list");
  }
  std::vector<Face> faces(static_cast<std::size_t>(f));
  for (auto& t : faces) {
    int k = 0;
    long long a, b, c;
    in >> k >> a >> b >> c;
    if (!in) throw FormatError(path + ": truncated face list");
    if (k != 3) throw FormatError(path + ": only triangle faces are supported");
    if (a < 0 || b < 0 || c < 0 || a >= n || b >= n || c >= n) throw FormatError(path + ": face index out of range");
    t = {static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(c)};
  }
  return Mesh(std::move(verts), std::move(faces));
}

}  // namespace specmesh
