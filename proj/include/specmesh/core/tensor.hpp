#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <new>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "specmesh/core/error.hpp"

namespace specmesh {

/// Extents of a tensor of rank 0..4. Rank 0 is a scalar holding one value.
class Shape {
 public:
  static constexpr std::size_t kMaxRank = 4;

  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims) {
    require(dims.size() <= kMaxRank, "Shape: rank exceeds 4");
    for (std::size_t d : dims) dims_[rank_++] = d;
  }
  explicit Shape(std::span<const std::size_t> dims) {
    require(dims.size() <= kMaxRank, "Shape: rank exceeds 4");
    for (std::size_t d : dims) dims_[rank_++] = d;
  }

  std::size_t rank() const { return rank_; }
  std::size_t operator[](std::size_t i) const { return dims_[i]; }
  std::size_t back() const { return rank_ == 0 ? 1 : dims_[rank_ - 1]; }

  std::size_t numel() const {
    std::size_t n = 1;
    for (std::size_t i = 0; i < rank_; ++i) n *= dims_[i];
    return n;
  }

  /// Product of all extents but the last; the row count when the tensor is
  /// viewed as a (rows x channels) matrix.
  std::size_t leading() const { return rank_ == 0 ? 1 : numel() / dims_[rank_ - 1]; }

  std::span<const std::size_t> dims() const { return {dims_.data(), rank_}; }

  Shape with_back(std::size_t last) const {
    Shape s = *this;
    if (s.rank_ == 0) s.rank_ = 1;
    s.dims_[s.rank_ - 1] = last;
    return s;
  }

  friend bool operator==(const Shape& a, const Shape& b) {
    if (a.rank_ != b.rank_) return false;
    for (std::size_t i = 0; i < a.rank_; ++i)
      if (a.dims_[i] != b.dims_[i]) return false;
    return true;
  }

  std::string str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < rank_; ++i) os << (i ? "x" : "") << dims_[i];
    os << ']';
    return os.str();
  }

 private:
  std::array<std::size_t, kMaxRank> dims_{};
  std::size_t rank_ = 0;
};

/// Storage aligned to a cache line so vectorized kernels take the same code path
/// regardless of where the heap places a buffer.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }

  // Default-initialize on resize so buffers about to be overwritten skip a fill.
  template <typename U>
  void construct(U* p) noexcept {
    ::new (static_cast<void*>(p)) U;
  }
  template <typename U, typename... Args>
  void construct(U* p, Args&&... args) {
    ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Dense row-major array of reals. The value type of every network layer.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(shape), data_(shape.numel(), fill) {}
  Tensor(Shape shape, std::initializer_list<T> data) : Tensor(shape, AlignedVector<T>(data)) {}
  Tensor(Shape shape, const std::vector<T>& data) : Tensor(shape, AlignedVector<T>(data.begin(), data.end())) {}
  Tensor(Shape shape, AlignedVector<T> data) : shape_(shape), data_(std::move(data)) {
    require(data_.size() == shape_.numel(), "Tensor: data length " + std::to_string(data_.size()) +
                                                " does not match shape " + shape_.str());
  }

  static Tensor zeros(Shape shape) { return Tensor(shape); }
  /// Contents unspecified; for outputs every element of which is written.
  static Tensor uninitialized(Shape shape) { return Tensor(shape, AlignedVector<T>(shape.numel())); }
  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.rank(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  AlignedVector<T>& values() { return data_; }
  const AlignedVector<T>& values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const T& at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  T& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const T& at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  T& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  const T& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  /// Same data under new extents; element count must match.
  Tensor reshaped(Shape shape) const& {
    require(shape.numel() == size(), "reshape " + shape_.str() + " -> " + shape.str());
    return Tensor(shape, data_);
  }
  Tensor reshaped(Shape shape) && {
    require(shape.numel() == size(), "reshape " + shape_.str() + " -> " + shape.str());
    return Tensor(shape, std::move(data_));
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor& operator+=(const Tensor& o) {
    require(shape_ == o.shape_, "Tensor +=: shape mismatch " + shape_.str() + " vs " + o.shape_.str());
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Tensor& operator-=(const Tensor& o) {
    require(shape_ == o.shape_, "Tensor -=: shape mismatch " + shape_.str() + " vs " + o.shape_.str());
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Tensor& operator*=(T s) {
    for (T& v : data_) v *= s;
    return *this;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  AlignedVector<T> data_;
};

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "max_abs_diff: shape mismatch");
  T m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Concatenates tensors with equal leading extents along the last axis.
template <typename T>
Tensor<T> concat_last(std::span<const Tensor<T>* const> parts) {
  require(!parts.empty(), "concat_last: no inputs");
  const Shape& ref = parts.front()->shape();
  std::size_t rows = ref.leading();
  std::size_t width = 0;
  for (const Tensor<T>* p : parts) {
    require(p->shape().rank() == ref.rank() && p->shape().leading() == rows,
            "concat_last: leading extents differ (" + ref.str() + " vs " + p->shape().str() + ")");
    width += p->shape().back();
  }
  Tensor<T> out(ref.with_back(width));
  std::size_t offset = 0;
  for (const Tensor<T>* p : parts) {
    const std::size_t w = p->shape().back();
    const T* src = p->data();
    T* dst = out.data();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(src + r * w, w, dst + r * width + offset);
    offset += w;
  }
  return out;
}

/// Inverse of concat_last: slices `whole` into pieces of the given widths.
template <typename T>
std::vector<Tensor<T>> split_last(const Tensor<T>& whole, std::span<const std::size_t> widths) {
  const std::size_t rows = whole.shape().leading();
  const std::size_t width = whole.shape().back();
  std::size_t total = std::accumulate(widths.begin(), widths.end(), std::size_t{0});
  require(total == width, "split_last: widths do not sum to last extent");
  std::vector<Tensor<T>> out;
  out.reserve(widths.size());
  std::size_t offset = 0;
  for (std::size_t w : widths) {
    Tensor<T> part(whole.shape().with_back(w));
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(whole.data() + r * width + offset, w, part.data() + r * w);
    out.push_back(std::move(part));
    offset += w;
  }
  return out;
}

}  // namespace specmesh
