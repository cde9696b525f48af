#pragma once

#include <string>

#include "specmesh/core/binary_io.hpp"
#include "specmesh/graph/sparse_matrix.hpp"

namespace specmesh {

// SPM1: "SPM1", u32 rows, u32 cols, u64 nnz, nnz x (u32 row, u32 col, f64 value), row-major.

inline std::vector<unsigned char> encode_spm1(const SparseMatrix<double>& m) {
  ByteWriter w;
  w.put_bytes("SPM1");
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.rows()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.cols()));
  w.put<std::uint64_t>(m.nnz());
  for (const auto& t : m.triplets()) {
    w.put<std::uint32_t>(t.row);
    w.put<std::uint32_t>(t.col);
    w.put<double>(t.value);
  }
  return std::move(w.bytes());
}

inline SparseMatrix<double> decode_spm1(const std::vector<unsigned char>& bytes, const std::string& what = "SPM1") {
  ByteReader r(bytes.data(), bytes.size(), what);
  if (r.get_bytes(4) != "SPM1") throw FormatError(what + ": bad magic");
  const auto rows = r.get<std::uint32_t>();
  const auto cols = r.get<std::uint32_t>();
  const auto nnz = r.get<std::uint64_t>();
  if (r.remaining() != nnz * 16) throw FormatError(what + ": payload length does not match nnz");
  std::vector<Triplet<double>> trip;
  trip.reserve(nnz);
  for (std::uint64_t i = 0; i < nnz; ++i) {
    Triplet<double> t{};
    t.row = r.get<std::uint32_t>();
    t.col = r.get<std::uint32_t>();
    t.value = r.get<double>();
    trip.push_back(t);
  }
  return SparseMatrix<double>::from_triplets(rows, cols, std::move(trip));
}

inline void write_spm1(const SparseMatrix<double>& m, const std::string& path) { write_file_bytes(path, encode_spm1(m)); }

inline SparseMatrix<double> read_spm1(const std::string& path) { return decode_spm1(read_file_bytes(path), path); }

}  // namespace specmesh
