#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "specmesh/core/error.hpp"
#include "specmesh/core/parallel.hpp"

namespace specmesh {

template <typename T>
struct Triplet {
  std::uint32_t row;
  std::uint32_t col;
  T value;
};

/// Compressed sparse row matrix. Entries are unique per (row, col) and
/// stored row-major with ascending columns, so iteration order is fixed.
template <typename T = double>
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

  /// Builds from triplets in any order. Duplicate (row, col) pairs are an error.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet<T>> triplets) {
    for (const auto& t : triplets)
      require(t.row < rows && t.col < cols, "SparseMatrix: entry (" + std::to_string(t.row) + "," +
                                                std::to_string(t.col) + ") out of range");
    std::sort(triplets.begin(), triplets.end(), [](const Triplet<T>& a, const Triplet<T>& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    SparseMatrix m(rows, cols);
    m.col_idx_.reserve(triplets.size());
    m.values_.reserve(triplets.size());
    for (std::size_t i = 0; i < triplets.size(); ++i) {
      if (i > 0 && triplets[i].row == triplets[i - 1].row && triplets[i].col == triplets[i - 1].col)
        throw ValidationError("SparseMatrix: duplicate entry (" + std::to_string(triplets[i].row) + "," +
                              std::to_string(triplets[i].col) + ")");
      m.row_ptr_[triplets[i].row + 1]++;
      m.col_idx_.push_back(triplets[i].col);
      m.values_.push_back(triplets[i].value);
    }
    for (std::size_t r = 0; r < rows; ++r) m.row_ptr_[r + 1] += m.row_ptr_[r];
    return m;
  }

  static SparseMatrix identity(std::size_t n) {
    std::vector<Triplet<T>> t;
    t.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      t.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i), T(1)});
    return from_triplets(n, n, std::move(t));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
  const std::vector<std::uint32_t>& col_idx() const { return col_idx_; }
  const std::vector<T>& values() const { return values_; }

  std::size_t row_begin(std::size_t r) const { return row_ptr_[r]; }
  std::size_t row_end(std::size_t r) const { return row_ptr_[r + 1]; }

  /// Value at (r, c), zero when absent.
  T at(std::size_t r, std::size_t c) const {
    auto first = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]);
    auto last = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]);
    auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(c));
    if (it == last || *it != c) return T(0);
    return values_[static_cast<std::size_t>(it - col_idx_.begin())];
  }

  std::vector<Triplet<T>> triplets() const {
    std::vector<Triplet<T>> out;
    out.reserve(nnz());
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
        out.push_back({static_cast<std::uint32_t>(r), col_idx_[k], values_[k]});
    return out;
  }

  SparseMatrix transpose() const {
    std::vector<Triplet<T>> t;
    t.reserve(nnz());
    for (const auto& e : triplets()) t.push_back({e.col, e.row, e.value});
    return from_triplets(cols_, rows_, std::move(t));
  }

  template <typename U>
  SparseMatrix<U> cast() const {
    std::vector<Triplet<U>> t;
    t.reserve(nnz());
    for (const auto& e : triplets()) t.push_back({e.row, e.col, static_cast<U>(e.value)});
    return SparseMatrix<U>::from_triplets(rows_, cols_, std::move(t));
  }

  /// y = A x for row-major dense blocks x (cols x width) and y (rows x width).
  /// Row strides default to width; larger strides address a column block of a
  /// wider matrix.
  template <typename V>
  void multiply(const V* x, std::size_t width, V* y, std::size_t x_stride = 0, std::size_t y_stride = 0) const {
    if (x_stride == 0) x_stride = width;
    if (y_stride == 0) y_stride = width;
    parallel_for(rows_, [&](std::size_t r) {
      V* yr = y + r * y_stride;
      std::fill(yr, yr + width, V(0));
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
        const V a = static_cast<V>(values_[k]);
        const V* xr = x + static_cast<std::size_t>(col_idx_[k]) * x_stride;
        for (std::size_t f = 0; f < width; ++f) yr[f] += a * xr[f];
      }
    });
  }

  /// y += A^T x, with x (rows x width) and y (cols x width). Sequential so the
  /// accumulation order is fixed.
  template <typename V>
  void transpose_multiply_add(const V* x, std::size_t width, V* y, std::size_t x_stride = 0,
                              std::size_t y_stride = 0) const {
    if (x_stride == 0) x_stride = width;
    if (y_stride == 0) y_stride = width;
    for (std::size_t r = 0; r < rows_; ++r) {
      const V* xr = x + r * x_stride;
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
        const V a = static_cast<V>(values_[k]);
        V* yc = y + static_cast<std::size_t>(col_idx_[k]) * y_stride;
        for (std::size_t f = 0; f < width; ++f) yc[f] += a * xr[f];
      }
    }
  }

  std::vector<T> row_sums() const {
    std::vector<T> s(rows_, T(0));
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s[r] += values_[k];
    return s;
  }

  bool is_symmetric(T tol = T(0)) const {
    if (rows_ != cols_) return false;
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
        if (std::abs(values_[k] - at(col_idx_[k], r)) > tol) return false;
    return true;
  }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](T v) { return std::isfinite(v); });
  }

  /// Row-major dense copy; intended for small matrices in tests and oracles.
  std::vector<T> to_dense() const {
    std::vector<T> d(rows_ * cols_, T(0));
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) d[r * cols_ + col_idx_[k]] = values_[k];
    return d;
  }

  friend bool operator==(const SparseMatrix& a, const SparseMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.row_ptr_ == b.row_ptr_ && a.col_idx_ == b.col_idx_ &&
           a.values_ == b.values_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::uint32_t> col_idx_;
  std::vector<T> values_;
};

}  // namespace specmesh
