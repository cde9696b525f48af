#pragma once

#include <zlib.h>

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <set>
#include <string>
#include <vector>

#include "specmesh/autodiff/parameter_store.hpp"
#include "specmesh/core/binary_io.hpp"
#include "specmesh/core/error.hpp"

namespace specmesh {

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::uint32_t crc32_of(const unsigned char* data, std::size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for very large buffers.
  while (size > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

namespace detail {

template <typename T>
void put_tensor(ByteWriter& w, const std::string& name, const Tensor<T>& t) {
  require(name.size() <= 0xFFFF, "checkpoint: parameter name too long");
  w.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
  w.put_bytes(name);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(t.rank()));
  for (std::size_t d = 0; d < t.rank(); ++d) w.put<std::uint32_t>(static_cast<std::uint32_t>(t.dim(d)));
  for (std::size_t i = 0; i < t.size(); ++i) w.put<float>(static_cast<float>(t[i]));
}

struct RawTensor {
  std::string name;
  std::vector<std::size_t> dims;
  std::vector<float> data;
};

inline std::vector<RawTensor> get_section(ByteReader& r) {
  const std::uint32_t count = r.get<std::uint32_t>();
  std::vector<RawTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    RawTensor t;
    t.name = r.get_bytes(r.get<std::uint16_t>());
    const std::uint8_t rank = r.get<std::uint8_t>();
    if (rank > 4) throw FormatError("checkpoint: tensor '" + t.name + "' has rank " + std::to_string(rank));
    std::size_t n = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      t.dims.push_back(r.get<std::uint32_t>());
      n *= t.dims.back();
    }
    if (n * sizeof(float) > r.remaining()) throw FormatError("checkpoint: tensor '" + t.name + "' truncated");
    t.data.resize(n);
    for (std::size_t k = 0; k < n; ++k) t.data[k] = r.get<float>();
    out.push_back(std::move(t));
  }
  return out;
}

template <typename T>
void assign(const RawTensor& raw, Tensor<T>& dst) {
  const Shape expected = dst.shape();
  bool ok = raw.dims.size() == expected.rank();
  for (std::size_t d = 0; ok && d < raw.dims.size(); ++d) ok = raw.dims[d] == expected[d];
  if (!ok) {
    std::string got = "(";
    for (std::size_t d = 0; d < raw.dims.size(); ++d) got += (d ? "," : "") + std::to_string(raw.dims[d]);
    throw ValidationError("checkpoint: shape mismatch for '" + raw.name + "': file has " + got + "), config expects " +
                          expected.str());
  }
  for (std::size_t k = 0; k < raw.data.size(); ++k) dst[k] = static_cast<T>(raw.data[k]);
}

}  // namespace detail

/// Serializes values of every entry, then velocities of trainable entries,
/// as little-endian f32 with a trailing CRC32 over all preceding bytes.
template <typename T>
std::vector<unsigned char> encode_checkpoint(const ParameterStore<T>& store) {
  ByteWriter w;
  w.put_bytes("CKPT");
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(store.size()));
  for (std::size_t i = 0; i < store.size(); ++i) detail::put_tensor(w, store[i].name, store[i].value);
  std::uint32_t trainable = 0;
  for (std::size_t i = 0; i < store.size(); ++i) trainable += store[i].trainable ? 1 : 0;
  w.put<std::uint32_t>(trainable);
  for (std::size_t i = 0; i < store.size(); ++i)
    if (store[i].trainable) detail::put_tensor(w, store[i].name, store[i].velocity);
  w.put<std::uint32_t>(crc32_of(w.bytes().data(), w.bytes().size()));
  return std::move(w.bytes());
}

/// Loads a checkpoint into a store built from the matching config. Every
/// store entry must be present with the same shape and no extras are allowed.
template <typename T>
void decode_checkpoint(const std::vector<unsigned char>& bytes, ParameterStore<T>& store) {
  if (bytes.size() < 16) throw FormatError("checkpoint: file too short (" + std::to_string(bytes.size()) + " bytes)");
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
  if (crc32_of(bytes.data(), bytes.size() - 4) != stored_crc)
    throw FormatError("checkpoint: CRC mismatch (file corrupt or truncated)");
  ByteReader r(bytes.data(), bytes.size() - 4, "checkpoint");
  if (r.get_bytes(4) != "CKPT") throw FormatError("checkpoint: bad magic");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  const auto values = detail::get_section(r);
  const auto velocities = detail::get_section(r);
  if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes before CRC");

  auto apply = [&](const std::vector<detail::RawTensor>& section, bool velocity) {
    std::set<std::string> seen;
    std::size_t expected = 0;
    for (std::size_t i = 0; i < store.size(); ++i) expected += (!velocity || store[i].trainable) ? 1 : 0;
    for (const auto& raw : section) {
      Parameter<T>* p = store.find(raw.name);
      if (p == nullptr || (velocity && !p->trainable))
        throw ValidationError("checkpoint: unexpected tensor '" + raw.name + "' for this config");
      if (!seen.insert(raw.name).second) throw FormatError("checkpoint: duplicate tensor '" + raw.name + "'");
      detail::assign(raw, velocity ? p->velocity : p->value);
    }
    if (section.size() != expected)
      throw ValidationError("checkpoint: " + std::to_string(section.size()) + " tensors in file, config expects " +
                            std::to_string(expected));
  };
  apply(values, false);
  apply(velocities, true);
}

template <typename T>
void save_checkpoint(const ParameterStore<T>& store, const std::string& path) {
  write_file_bytes(path, encode_checkpoint(store));
}

template <typename T>
void load_checkpoint(ParameterStore<T>& store, const std::string& path) {
  decode_checkpoint(read_file_bytes(path), store);
}

}  // namespace specmesh
