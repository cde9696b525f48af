#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "specmesh/core/error.hpp"
#include "specmesh/core/parallel.hpp"
#include "specmesh/core/rng.hpp"
#include "specmesh/core/tensor.hpp"
#include "specmesh/data/sample_io.hpp"
#include "specmesh/graph/mesh.hpp"

namespace specmesh {

/// Orthographic depth image of a mesh inside [-1,1]^3 seen from +z.
///
/// Pixel (r, c) has its center at x = -1 + (2c + 1) / size, y = -1 + (2r + 1) / size.
/// A pixel is covered by a triangle when its center lies inside or on the
/// boundary; the largest interpolated z wins and is stored as (z + 1) / 2, so
/// the near plane maps to 1 and uncovered pixels stay 0. The depth is
/// replicated into all three channels.
inline Tensor<float> rasterize_depth(const Mesh& mesh, std::size_t size) {
  require(mesh.vertex_count() > 0 && mesh.face_count() > 0, "rasterize_depth: empty mesh");
  require(size > 0, "rasterize_depth: size must be positive");
  const double half = static_cast<double>(size) / 2.0;
  auto to_pixel = [&](double v) { return (v + 1.0) * half - 0.5; };
  std::vector<double> zbuf(size * size, -std::numeric_limits<double>::infinity());
  const auto& V = mesh.vertices();
  for (const Face& f : mesh.faces()) {
    double px[3], py[3], pz[3];
    for (int k = 0; k < 3; ++k) {
      px[k] = to_pixel(V[f[k]][0]);
      py[k] = to_pixel(V[f[k]][1]);
      pz[k] = V[f[k]][2];
    }
    const double area = (px[1] - px[0]) * (py[2] - py[0]) - (px[2] - px[0]) * (py[1] - py[0]);
    if (area == 0.0) continue;
    const double lo_x = std::max(0.0, std::ceil(std::min({px[0], px[1], px[2]})));
    const double hi_x = std::min(static_cast<double>(size) - 1.0, std::floor(std::max({px[0], px[1], px[2]})));
    const double lo_y = std::max(0.0, std::ceil(std::min({py[0], py[1], py[2]})));
    const double hi_y = std::min(static_cast<double>(size) - 1.0, std::floor(std::max({py[0], py[1], py[2]})));
    for (double y = lo_y; y <= hi_y; y += 1.0)
      for (double x = lo_x; x <= hi_x; x += 1.0) {
        const double e0 = (px[1] - x) * (py[2] - y) - (px[2] - x) * (py[1] - y);
        const double e1 = (px[2] - x) * (py[0] - y) - (px[0] - x) * (py[2] - y);
        const double e2 = (px[0] - x) * (py[1] - y) - (px[1] - x) * (py[0] - y);
        // Inside test on the unnormalized edge functions so that centers on a
        // shared edge are decided without division round-off.
        if (area > 0.0 ? (e0 < 0.0 || e1 < 0.0 || e2 < 0.0) : (e0 > 0.0 || e1 > 0.0 || e2 > 0.0)) continue;
        const double z = (e0 * pz[0] + e1 * pz[1] + e2 * pz[2]) / (e0 + e1 + e2);
        double& slot = zbuf[static_cast<std::size_t>(y) * size + static_cast<std::size_t>(x)];
        if (z > slot) slot = z;
      }
  }
  Tensor<float> image(Shape{size, size, 3});
  for (std::size_t i = 0; i < size * size; ++i) {
    if (!std::isfinite(zbuf[i])) continue;
    const float d = static_cast<float>(std::clamp((zbuf[i] + 1.0) / 2.0, 0.0, 1.0));
    for (std::size_t c = 0; c < 3; ++c) image[i * 3 + c] = d;
  }
  return image;
}

struct DeformSpec {
  std::size_t basis_count = 8;
  double coeff_range = 0.1;
  std::size_t image_size = 64;
  /// Half-width of a uniform rotation about the y axis applied after the
  /// deformation; 0 keeps every sample frontal.
  double yaw_range_degrees = 0.0;

  void validate() const {
    require(basis_count >= 1, "deform spec: basis_count must be >= 1");
    require(std::isfinite(coeff_range) && coeff_range >= 0.0, "deform spec: coeff_range must be >= 0");
    require(image_size >= 1, "deform spec: image_size must be positive");
    require(yaw_range_degrees >= 0.0 && yaw_range_degrees <= 90.0, "deform spec: yaw_range_degrees must lie in [0, 90]");
  }
};

inline nlohmann::json to_json(const DeformSpec& s) {
  return {{"basis_count", s.basis_count},
          {"coeff_range", s.coeff_range},
          {"image_size", s.image_size},
          {"yaw_range_degrees", s.yaw_range_degrees}};
}

inline DeformSpec deform_spec_from_json(const nlohmann::json& j) {
  DeformSpec s;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "basis_count") s.basis_count = value.get<std::size_t>();
      else if (key == "coeff_range") s.coeff_range = value.get<double>();
      else if (key == "image_size") s.image_size = value.get<std::size_t>();
      else if (key == "yaw_range_degrees") s.yaw_range_degrees = value.get<double>();
      else throw ValidationError("deform spec: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("deform spec: ") + e.what());
  }
  s.validate();
  return s;
}

/// Eigenvectors 1..d of the combinatorial Laplacian (the constant mode 0 is
/// skipped), as an N x d matrix. Each column is scaled to max |entry| = 1 with
/// its largest-magnitude entry positive.
inline Eigen::MatrixXd deformation_basis(const Mesh& mesh, std::size_t d) {
  const std::size_t n = mesh.vertex_count();
  require(mesh.is_edge_connected(), "deformation_basis: template is not edge-connected");
  require(d + 1 <= n, "deformation_basis: need more vertices than basis fields");
  require(n <= 8192, "deformation_basis: dense eigensolver limited to 8192 vertices");
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const auto& A = mesh.adjacency();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = A.row_begin(r); k < A.row_end(r); ++k) {
      const auto c = static_cast<Eigen::Index>(A.col_idx()[k]);
      L(static_cast<Eigen::Index>(r), c) -= A.values()[k];
      L(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r)) += A.values()[k];
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L);
  if (es.info() != Eigen::Success) throw NumericError("deformation_basis: eigensolver failed");
  Eigen::MatrixXd basis = es.eigenvectors().middleCols(1, static_cast<Eigen::Index>(d));
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    Eigen::Index arg = 0;
    basis.col(j).cwiseAbs().maxCoeff(&arg);
    basis.col(j) /= basis(arg, j);
  }
  return basis;
}

/// 68 well-spread vertex ids on the +z-facing side of the template: farthest
/// point sampling seeded at the vertex of largest z, ties to the smaller id.
/// Empty when fewer than 68 vertices face +z.
inline std::vector<std::uint32_t> select_landmarks(const Mesh& mesh, std::size_t count = 68) {
  const auto normals = mesh.vertex_normals();
  const auto& V = mesh.vertices();
  std::vector<std::uint32_t> cand;
  for (std::size_t i = 0; i < V.size(); ++i)
    if (normals[i][2] > 0.0) cand.push_back(static_cast<std::uint32_t>(i));
  if (cand.size() < count) return {};
  std::size_t first = 0;
  for (std::size_t i = 1; i < cand.size(); ++i)
    if (V[cand[i]][2] > V[cand[first]][2]) first = i;
  std::vector<double> dist(cand.size(), std::numeric_limits<double>::infinity());
  std::vector<std::uint32_t> out;
  std::size_t next = first;
  while (out.size() < count) {
    out.push_back(cand[next]);
    for (std::size_t i = 0; i < cand.size(); ++i) dist[i] = std::min(dist[i], norm(V[cand[i]] - V[cand[next]]));
    next = 0;
    for (std::size_t i = 1; i < cand.size(); ++i)
      if (dist[i] > dist[next]) next = i;
  }
  return out;
}

inline constexpr int kDeformRetries = 10;

/// Deformed copies of a template rendered as depth images.
///
/// Sample i draws from Rng(seed).split(i): basis_count coefficients uniform in
/// [-coeff_range, coeff_range], then a yaw when yaw_range_degrees > 0. Vertices
/// move along the template's vertex normals by sum_j c_j phi_j(v). A draw that
/// leaves [-1,1]^3 is redrawn up to 10 times before failing. Images are
/// quantized to 8-bit levels so they survive the PPM round trip unchanged.
inline std::vector<SampleRecord> synth_dataset(const Mesh& tmpl, const DeformSpec& spec, std::size_t count,
                                               std::uint64_t seed) {
  spec.validate();
  require(count >= 1, "synth_dataset: count must be >= 1");
  require(tmpl.is_edge_connected(), "synth_dataset: template is not edge-connected");
  for (const Vec3& v : tmpl.vertices())
    for (double c : v) require(std::abs(c) <= 1.0, "synth_dataset: template leaves the [-1,1]^3 viewing box");
  const Eigen::MatrixXd basis = deformation_basis(tmpl, spec.basis_count);
  const auto normals = tmpl.vertex_normals();
  const auto landmarks = select_landmarks(tmpl);
  const std::size_t n = tmpl.vertex_count();
  const Rng root(seed);
  std::vector<SampleRecord> out(count);
  parallel_for_each_or_throw(count, [&](std::size_t i) {
    Rng rng = root.split(i);
    for (int attempt = 0; attempt <= kDeformRetries; ++attempt) {
      Eigen::VectorXd coeff(static_cast<Eigen::Index>(spec.basis_count));
      for (Eigen::Index j = 0; j < coeff.size(); ++j) coeff(j) = rng.uniform(-spec.coeff_range, spec.coeff_range);
      const double yaw = spec.yaw_range_degrees > 0 ? rng.uniform(-spec.yaw_range_degrees, spec.yaw_range_degrees) : 0.0;
      const Eigen::VectorXd offset = basis * coeff;
      const double cy = std::cos(yaw * std::numbers::pi / 180.0), sy = std::sin(yaw * std::numbers::pi / 180.0);
      std::vector<Vec3> verts(n);
      bool inside = true;
      for (std::size_t v = 0; v < n; ++v) {
        const Vec3 p = tmpl.vertices()[v] + offset(static_cast<Eigen::Index>(v)) * normals[v];
        verts[v] = yaw == 0.0 ? p : Vec3{cy * p[0] + sy * p[2], p[1], -sy * p[0] + cy * p[2]};
        for (double c : verts[v]) inside = inside && std::abs(c) <= 1.0;
      }
      if (!inside) continue;
      const Mesh deformed(verts, tmpl.faces());
      SampleRecord r;
      r.image = rasterize_depth(deformed, spec.image_size);
      for (float& p : r.image.values()) p = static_cast<float>(to_byte(p)) / 255.0f;
      r.gt_vertices = Tensor<float>(Shape{n, 3});
      for (std::size_t v = 0; v < n; ++v)
        for (std::size_t c = 0; c < 3; ++c) r.gt_vertices.at(v, c) = static_cast<float>(verts[v][c]);
      r.landmark_indices = landmarks;
      r.yaw_degrees = yaw;
      out[i] = std::move(r);
      return;
    }
    throw ValidationError("synth_dataset: sample " + std::to_string(i) + " left the viewing box in " +
                          std::to_string(kDeformRetries + 1) + " draws; reduce coeff_range");
  });
  return out;
}

inline constexpr const char* kDatasetManifest = "dataset.json";

struct DatasetInfo {
  std::string template_path;
  DeformSpec spec;
  std::uint64_t seed = 0;
  std::size_t count = 0;
};

/// Writes samples/NNNNN.{ppm,vtx,json} and dataset.json under `dir`.
inline void save_dataset(const std::vector<SampleRecord>& samples, const DatasetInfo& info,
                         const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "samples");
  for (std::size_t i = 0; i < samples.size(); ++i) save_sample(samples[i], dir / "samples" / sample_id(i));
  const nlohmann::json j{{"template", info.template_path},
                         {"spec", to_json(info.spec)},
                         {"seed", info.seed},
                         {"count", samples.size()}};
  const std::string text = j.dump(2) + "\n";
  write_file_bytes((dir / kDatasetManifest).string(), std::vector<unsigned char>(text.begin(), text.end()));
}

inline DatasetInfo read_dataset_info(const std::filesystem::path& dir) {
  const auto path = dir / kDatasetManifest;
  if (!std::filesystem::exists(path)) throw ValidationError("no " + std::string(kDatasetManifest) + " in " + dir.string());
  const auto bytes = read_file_bytes(path.string());
  try {
    const auto j = nlohmann::json::parse(bytes.begin(), bytes.end());
    DatasetInfo info;
    info.template_path = j.at("template").get<std::string>();
    info.spec = deform_spec_from_json(j.at("spec"));
    info.seed = j.at("seed").get<std::uint64_t>();
    info.count = j.at("count").get<std::size_t>();
    return info;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline std::vector<SampleRecord> load_dataset(const std::filesystem::path& dir) {
  const DatasetInfo info = read_dataset_info(dir);
  require(info.count >= 1, dir.string() + ": dataset is empty");
  std::vector<SampleRecord> out;
  out.reserve(info.count);
  for (std::size_t i = 0; i < info.count; ++i) out.push_back(load_sample(dir / "samples" / sample_id(i)));
  for (const auto& r : out) {
    require(r.image.shape() == out.front().image.shape(), dir.string() + ": samples differ in image size");
    require(r.gt_vertices.shape() == out.front().gt_vertices.shape(), dir.string() + ": samples differ in vertex count");
  }
  return out;
}

}  // namespace specmesh
