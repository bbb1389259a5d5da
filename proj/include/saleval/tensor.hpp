#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <new>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "saleval/error.hpp"

namespace saleval {

using Shape = std::vector<std::size_t>;

/// Cache-line aligned allocator. Vectorized Eigen kernels split work by pointer
/// alignment, so buffers with varying alignment give run-to-run rounding noise.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  friend bool operator==(const AlignedAllocator&, const AlignedAllocator&) { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

/// Dense row-major tensor. The leading dimension is the batch for all network
/// activations.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
  Tensor(Shape shape, AlignedVector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_length();
  }
  Tensor(Shape shape, const std::vector<T>& data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    check_length();
  }
  Tensor(Shape shape, std::initializer_list<T> data) : shape_(std::move(shape)), data_(data) { check_length(); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  AlignedVector<T>& storage() noexcept { return data_; }
  const AlignedVector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  /// Elements per leading-dimension entry.
  std::size_t stride0() const { return shape_.empty() || shape_[0] == 0 ? 0 : data_.size() / shape_[0]; }

  std::span<T> row(std::size_t n) { return std::span<T>(data_).subspan(n * stride0(), stride0()); }
  std::span<const T> row(std::size_t n) const {
    return std::span<const T>(data_).subspan(n * stride0(), stride0());
  }

  Tensor reshaped(Shape shape) const& {
    require(shape_size(shape) == data_.size(), ErrorKind::ShapeMismatch,
            "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    return Tensor(std::move(shape), data_);
  }
  Tensor reshaped(Shape shape) && {
    require(shape_size(shape) == data_.size(), ErrorKind::ShapeMismatch,
            "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    return Tensor(std::move(shape), std::move(data_));
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (const T& v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, AlignedVector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

 private:
  void check_length() const {
    require(data_.size() == shape_size(shape_), ErrorKind::ShapeMismatch,
            "data length " + std::to_string(data_.size()) + " does not match shape " + shape_str(shape_));
  }

  Shape shape_;
  AlignedVector<T> data_;
};

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  require(a.shape() == b.shape(), ErrorKind::ShapeMismatch,
          std::string(what) + ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

/// Stacks equally-shaped samples along a new leading dimension.
template <typename T, typename Range>
Tensor<T> stack(const Range& samples, const Shape& sample_shape) {
  const std::size_t per = shape_size(sample_shape);
  Shape shape{static_cast<std::size_t>(std::size(samples))};
  shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
  Tensor<T> out(shape);
  std::size_t n = 0;
  for (const auto& s : samples) {
    require(std::size(s) == per, ErrorKind::ShapeMismatch, "stack: sample size mismatch");
    std::copy(std::begin(s), std::end(s), out.data() + n * per);
    ++n;
  }
  return out;
}

}  // namespace saleval
