#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pmn/errors.hpp"

namespace pmn {

using Shape = std::vector<std::size_t>;

/// Allocator returning 64-byte aligned blocks. SIMD kernels peel a different
/// number of leading elements depending on the address, which changes the
/// summation order; fixed alignment keeps results bitwise reproducible.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t alignment{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_product(const Shape& shape);

/// Dense row-major array with shape metadata.
///
/// Element (i0, i1, ..., ir) lives at flat index
/// ((i0 * d1 + i1) * d2 + i2) ... ; `at()` is bounds-checked against the
/// shape, `values()` exposes the flat storage for kernels.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, const std::vector<T>& data);
  Tensor(Shape shape, AlignedVector<T> data);

  static Tensor vector(std::initializer_list<T> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<T>> rows);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const;
  bool empty() const { return data_.empty(); }

  T& at(std::initializer_list<std::size_t> index);
  const T& at(std::initializer_list<std::size_t> index) const;
  std::size_t flat_index(std::initializer_list<std::size_t> index) const;

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  const AlignedVector<T>& storage() const { return data_; }

  // Row view of a rank-2 tensor.
  std::span<T> row(std::size_t i);
  std::span<const T> row(std::size_t i) const;

  Tensor reshaped(Shape shape) const;
  void fill(T value);

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(T scale);

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  AlignedVector<T> data_;
};

enum class ReduceOp { sum, mean, min, max, argmin };

/// Standard matrix product of an m x k and a k x n tensor.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// a * b^T for a: m x k, b: n x k.
template <typename T>
Tensor<T> matmul_transposed(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> transpose(const Tensor<T>& a);

/// Reduction over one axis (removed from the result shape) or over all
/// elements (result shape {1}). argmin yields indices stored as T and breaks
/// ties towards the lowest index.
template <typename T>
Tensor<T> reduce(const Tensor<T>& a, ReduceOp op, std::optional<std::size_t> axis = std::nullopt);

/// Lowest index of the minimum; throws DomainError on empty input.
template <typename T>
std::size_t argmin(std::span<const T> values);

template <typename T>
std::size_t argmax(std::span<const T> values);

template <typename T>
std::size_t argmin(const std::vector<T>& values) {
  return argmin(std::span<const T>(values));
}

template <typename T>
std::size_t argmax(const std::vector<T>& values) {
  return argmax(std::span<const T>(values));
}

template <typename T>
T max_abs_difference(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace pmn
