#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "specmesh/core/error.hpp"
#include "specmesh/graph/laplacian.hpp"
#include "specmesh/graph/mesh.hpp"
#include "specmesh/graph/spm_io.hpp"
#include "specmesh/sampling/decimate.hpp"
#include "specmesh/sampling/upsample.hpp"

namespace specmesh {

/// Maps level i (fine, n vertices) and level i+1 (coarse, m vertices).
struct SamplingPair {
  SparseMatrix<double> q_down;  // m x n, one-hot rows
  SparseMatrix<double> q_up;    // n x m, convex rows
};

/// Meshes from finest to coarsest, with the sampling matrices between
/// neighbouring levels and a rescaled Laplacian per level.
struct MeshHierarchy {
  std::vector<Mesh> levels;
  std::vector<SamplingPair> pairs;
  std::vector<SparseMatrix<double>> laplacians;  // rescaled, one per level
  std::vector<double> lambda_max;

  std::size_t level_count() const { return levels.size(); }
  std::vector<std::size_t> schedule() const {
    std::vector<std::size_t> s;
    for (const Mesh& m : levels) s.push_back(m.vertex_count());
    return s;
  }
};

inline void check_schedule(const std::vector<std::size_t>& schedule) {
  require(!schedule.empty(), "hierarchy: empty schedule");
  for (std::size_t i = 1; i < schedule.size(); ++i)
    require(schedule[i] < schedule[i - 1], "hierarchy: schedule must be strictly decreasing (" +
                                               std::to_string(schedule[i - 1]) + " then " +
                                               std::to_string(schedule[i]) + ")");
}

inline MeshHierarchy build_hierarchy(const Mesh& mesh, const std::vector<std::size_t>& schedule) {
  check_schedule(schedule);
  require(schedule.front() == mesh.vertex_count(), "hierarchy: schedule starts at " + std::to_string(schedule.front()) +
                                                       " but the mesh has " + std::to_string(mesh.vertex_count()) +
                                                       " vertices");
  MeshHierarchy h;
  h.levels.push_back(mesh);
  for (std::size_t i = 1; i < schedule.size(); ++i) {
    DecimationResult d = decimate(h.levels.back(), schedule[i]);
    SamplingPair p;
    p.q_up = build_upsample(h.levels.back(), d.coarse, d.q_down);
    p.q_down = std::move(d.q_down);
    h.pairs.push_back(std::move(p));
    h.levels.push_back(std::move(d.coarse));
  }
  for (const Mesh& m : h.levels) {
    Laplacian lap = build_laplacian(m.adjacency());
    h.lambda_max.push_back(lap.lambda_max);
    h.laplacians.push_back(rescale_laplacian(lap));
  }
  return h;
}

inline constexpr const char* kHierarchyManifest = "hierarchy.json";

/// Writes level_<i>.off, q_down_<i>.spm, q_up_<i>.spm, laplacian_<i>.spm and a
/// JSON manifest into `dir`.
inline void write_hierarchy(const MeshHierarchy& h, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "specmesh-hierarchy-1";
  manifest["counts"] = h.schedule();
  nlohmann::json levels = nlohmann::json::array();
  for (std::size_t i = 0; i < h.levels.size(); ++i) {
    const std::string mesh_name = "level_" + std::to_string(i) + ".off";
    const std::string lap_name = "laplacian_" + std::to_string(i) + ".spm";
    write_off(h.levels[i], (fs::path(dir) / mesh_name).string());
    write_spm1(h.laplacians[i], (fs::path(dir) / lap_name).string());
    nlohmann::json lv = {{"vertices", h.levels[i].vertex_count()},
                         {"mesh", mesh_name},
                         {"laplacian", lap_name},
                         {"lambda_max", h.lambda_max[i]}};
    if (i + 1 < h.levels.size()) {
      lv["q_down"] = "q_down_" + std::to_string(i) + ".spm";
      lv["q_up"] = "q_up_" + std::to_string(i) + ".spm";
      write_spm1(h.pairs[i].q_down, (fs::path(dir) / lv["q_down"].get<std::string>()).string());
      write_spm1(h.pairs[i].q_up, (fs::path(dir) / lv["q_up"].get<std::string>()).string());
    }
    levels.push_back(lv);
  }
  manifest["levels"] = levels;
  std::ofstream out(fs::path(dir) / kHierarchyManifest, std::ios::trunc);
  out << manifest.dump(2) << '\n';
  if (!out) throw ValidationError("cannot write hierarchy manifest in " + dir);
}

inline MeshHierarchy read_hierarchy(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path mpath = fs::path(dir) / kHierarchyManifest;
  std::ifstream in(mpath);
  if (!in) throw ValidationError("no hierarchy manifest at " + mpath.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(mpath.string() + ": " + e.what());
  }
  MeshHierarchy h;
  try {
    const auto& levels = manifest.at("levels");
    for (std::size_t i = 0; i < levels.size(); ++i) {
      const auto& lv = levels[i];
      h.levels.push_back(read_off((fs::path(dir) / lv.at("mesh").get<std::string>()).string()));
      h.laplacians.push_back(read_spm1((fs::path(dir) / lv.at("laplacian").get<std::string>()).string()));
      h.lambda_max.push_back(lv.at("lambda_max").get<double>());
      if (i + 1 < levels.size()) {
        SamplingPair p;
        p.q_down = read_spm1((fs::path(dir) / lv.at("q_down").get<std::string>()).string());
        p.q_up = read_spm1((fs::path(dir) / lv.at("q_up").get<std::string>()).string());
        h.pairs.push_back(std::move(p));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(mpath.string() + ": " + e.what());
  }
  check_schedule(h.schedule());
  for (std::size_t i = 0; i < h.pairs.size(); ++i) {
    const std::size_t n = h.levels[i].vertex_count(), m = h.levels[i + 1].vertex_count();
    require(h.pairs[i].q_down.rows() == m && h.pairs[i].q_down.cols() == n, "hierarchy: q_down shape mismatch at level " + std::to_string(i));
    require(h.pairs[i].q_up.rows() == n && h.pairs[i].q_up.cols() == m, "hierarchy: q_up shape mismatch at level " + std::to_string(i));
  }
  for (std::size_t i = 0; i < h.levels.size(); ++i)
    require(h.laplacians[i].rows() == h.levels[i].vertex_count(), "hierarchy: laplacian shape mismatch at level " + std::to_string(i));
  return h;
}

}  // namespace specmesh
