#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "specmesh/core/binary_io.hpp"
#include "specmesh/core/error.hpp"
#include "specmesh/core/tensor.hpp"

namespace specmesh {

/// One supervision pair: an H x W x 3 image in [0,1] and N x 3 vertex targets.
struct SampleRecord {
  Tensor<float> image;
  Tensor<float> gt_vertices;
  std::vector<std::uint32_t> landmark_indices;
  std::optional<double> yaw_degrees;
};

inline void validate_record(const SampleRecord& r) {
  require(r.image.rank() == 3 && r.image.dim(2) == 3, "sample: image must be H x W x 3, got " + r.image.shape().str());
  require(r.image.dim(0) == r.image.dim(1), "sample: image must be square, got " + r.image.shape().str());
  require(r.gt_vertices.rank() == 2 && r.gt_vertices.dim(1) == 3,
          "sample: vertices must be N x 3, got " + r.gt_vertices.shape().str());
  for (float v : r.gt_vertices.values())
    if (!std::isfinite(v)) throw ValidationError("sample: non-finite vertex coordinate");
  for (std::uint32_t i : r.landmark_indices)
    require(i < r.gt_vertices.dim(0), "sample: landmark index " + std::to_string(i) + " out of range");
}

/// Nearest representable 8-bit level, i / 255.
inline std::uint8_t to_byte(float v) {
  if (!std::isfinite(v)) throw ValidationError("image: non-finite pixel value");
  const float c = std::min(1.0f, std::max(0.0f, v));
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

/// Binary PPM (P6, maxval 255).
inline std::vector<unsigned char> encode_ppm(const Tensor<float>& image) {
  require(image.rank() == 3 && image.dim(2) == 3, "ppm: image must be H x W x 3");
  const std::string header = "P6\n" + std::to_string(image.dim(1)) + " " + std::to_string(image.dim(0)) + "\n255\n";
  std::vector<unsigned char> bytes(header.begin(), header.end());
  bytes.reserve(header.size() + image.size());
  for (float v : image.values()) bytes.push_back(to_byte(v));
  return bytes;
}

inline Tensor<float> decode_ppm(const std::vector<unsigned char>& bytes, const std::string& what) {
  std::size_t pos = 0;
  // Header tokens are separated by whitespace; '#' starts a comment line.
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    if (t.empty()) throw FormatError(what + ": truncated PPM header");
    return t;
  };
  auto number = [&](const char* field) {
    const std::string t = token();
    if (t.find_first_not_of("0123456789") != std::string::npos || t.size() > 9)
      throw FormatError(what + ": bad PPM " + field + " '" + t + "'");
    return static_cast<std::size_t>(std::stoul(t));
  };
  if (token() != "P6") throw FormatError(what + ": not a binary PPM (P6)");
  const std::size_t w = number("width"), h = number("height"), maxval = number("maxval");
  if (maxval != 255) throw FormatError(what + ": PPM maxval must be 255, got " + std::to_string(maxval));
  if (w == 0 || h == 0) throw FormatError(what + ": empty PPM image");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError(what + ": malformed PPM header");
  ++pos;
  const std::size_t n = w * h * 3;
  if (bytes.size() - pos != n)
    throw FormatError(what + ": PPM payload has " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                      std::to_string(n));
  Tensor<float> image(Shape{h, w, 3});
  for (std::size_t i = 0; i < n; ++i) image[i] = static_cast<float>(bytes[pos + i]) / 255.0f;
  return image;
}

inline void write_ppm(const Tensor<float>& image, const std::string& path) { write_file_bytes(path, encode_ppm(image)); }
inline Tensor<float> read_ppm(const std::string& path) { return decode_ppm(read_file_bytes(path), path); }

/// "VTX1", u32 count, count x (f32 x, y, z), little-endian.
inline std::vector<unsigned char> encode_vtx(const Tensor<float>& vertices) {
  require(vertices.rank() == 2 && vertices.dim(1) == 3, "vtx: vertices must be N x 3");
  ByteWriter w;
  w.put_bytes("VTX1");
  w.put<std::uint32_t>(static_cast<std::uint32_t>(vertices.dim(0)));
  for (float v : vertices.values()) {
    if (!std::isfinite(v)) throw ValidationError("vtx: non-finite vertex coordinate");
    w.put<float>(v);
  }
  return std::move(w.bytes());
}

inline Tensor<float> decode_vtx(const std::vector<unsigned char>& bytes, const std::string& what) {
  ByteReader r(bytes.data(), bytes.size(), what);
  if (r.get_bytes(4) != "VTX1") throw FormatError(what + ": bad magic, expected VTX1");
  const std::size_t n = r.get<std::uint32_t>();
  if (r.remaining() != n * 12)
    throw FormatError(what + ": length mismatch, " + std::to_string(n) + " vertices need " + std::to_string(n * 12) +
                      " bytes, have " + std::to_string(r.remaining()));
  Tensor<float> out(Shape{n, 3});
  for (float& v : out.values()) {
    v = r.get<float>();
    if (!std::isfinite(v)) throw FormatError(what + ": non-finite vertex coordinate");
  }
  return out;
}

inline void write_vtx(const Tensor<float>& vertices, const std::string& path) {
  write_file_bytes(path, encode_vtx(vertices));
}
inline Tensor<float> read_vtx(const std::string& path) { return decode_vtx(read_file_bytes(path), path); }

inline std::string sample_id(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05zu", index);
  return buf;
}

/// Writes <stem>.ppm, <stem>.vtx and <stem>.json.
inline void save_sample(const SampleRecord& r, const std::filesystem::path& stem) {
  validate_record(r);
  write_ppm(r.image, stem.string() + ".ppm");
  write_vtx(r.gt_vertices, stem.string() + ".vtx");
  nlohmann::json side;
  side["landmark_indices"] = r.landmark_indices;
  side["yaw_degrees"] = r.yaw_degrees ? nlohmann::json(*r.yaw_degrees) : nlohmann::json(nullptr);
  const std::string text = side.dump(2) + "\n";
  write_file_bytes(stem.string() + ".json", std::vector<unsigned char>(text.begin(), text.end()));
}

inline SampleRecord load_sample(const std::filesystem::path& stem) {
  SampleRecord r;
  r.image = read_ppm(stem.string() + ".ppm");
  r.gt_vertices = read_vtx(stem.string() + ".vtx");
  const std::string side_path = stem.string() + ".json";
  if (std::filesystem::exists(side_path)) {
    nlohmann::json side;
    try {
      const auto bytes = read_file_bytes(side_path);
      side = nlohmann::json::parse(bytes.begin(), bytes.end());
      if (side.contains("landmark_indices"))
        r.landmark_indices = side.at("landmark_indices").get<std::vector<std::uint32_t>>();
      if (side.contains("yaw_degrees") && !side.at("yaw_degrees").is_null())
        r.yaw_degrees = side.at("yaw_degrees").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(side_path + ": " + e.what());
    }
  }
  validate_record(r);
  return r;
}

}  // namespace specmesh
