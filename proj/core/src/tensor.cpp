#include "pmn/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace pmn {

namespace {

template <typename T>
using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_matrix(const Shape& shape, const char* what) {
  if (shape.size() != 2) {
    throw DimensionError(std::string(what) + ": expected a rank-2 tensor, got " + shape_to_string(shape));
  }
}

}  // namespace

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_product(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)), data_(shape_product(shape_), fill) {
  for (auto d : shape_) {
    if (d == 0) throw DimensionError("Tensor: zero-sized dimension in " + shape_to_string(shape_));
  }
}

template <typename T>
Tensor<T>::Tensor(Shape shape, const std::vector<T>& data)
    : Tensor(std::move(shape), AlignedVector<T>(data.begin(), data.end())) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, AlignedVector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_) {
    if (d == 0) throw DimensionError("Tensor: zero-sized dimension in " + shape_to_string(shape_));
  }
  if (shape_product(shape_) != data_.size()) {
    throw DimensionError("Tensor: shape " + shape_to_string(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
  }
}

template <typename T>
Tensor<T> Tensor<T>::vector(std::initializer_list<T> values) {
  return Tensor(Shape{values.size()}, std::vector<T>(values));
}

template <typename T>
Tensor<T> Tensor<T>::matrix(std::initializer_list<std::initializer_list<T>> rows) {
  const std::size_t m = rows.size();
  const std::size_t n = m ? rows.begin()->size() : 0;
  std::vector<T> data;
  data.reserve(m * n);
  for (const auto& r : rows) {
    if (r.size() != n) throw DimensionError("Tensor::matrix: ragged rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor(Shape{m, n}, std::move(data));
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("Tensor::dim: axis " + std::to_string(axis) + " out of range for " + shape_to_string(shape_));
  }
  return shape_[axis];
}

template <typename T>
std::size_t Tensor<T>::flat_index(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw DimensionError("Tensor::at: index rank " + std::to_string(index.size()) + " vs shape " +
                         shape_to_string(shape_));
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= shape_[axis]) {
      throw std::out_of_range("Tensor::at: index " + std::to_string(i) + " out of range on axis " +
                              std::to_string(axis) + " of " + shape_to_string(shape_));
    }
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return flat;
}

template <typename T>
T& Tensor<T>::at(std::initializer_list<std::size_t> index) {
  return data_[flat_index(index)];
}

template <typename T>
const T& Tensor<T>::at(std::initializer_list<std::size_t> index) const {
  return data_[flat_index(index)];
}

template <typename T>
std::span<T> Tensor<T>::row(std::size_t i) {
  require_matrix(shape_, "Tensor::row");
  if (i >= shape_[0]) throw std::out_of_range("Tensor::row: row index out of range");
  return std::span<T>(data_).subspan(i * shape_[1], shape_[1]);
}

template <typename T>
std::span<const T> Tensor<T>::row(std::size_t i) const {
  require_matrix(shape_, "Tensor::row");
  if (i >= shape_[0]) throw std::out_of_range("Tensor::row: row index out of range");
  return std::span<const T>(data_).subspan(i * shape_[1], shape_[1]);
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const {
  if (shape_product(shape) != data_.size()) {
    throw DimensionError("Tensor::reshaped: cannot view " + shape_to_string(shape_) + " as " + shape_to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

template <typename T>
void Tensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
Tensor<T>& Tensor<T>::operator+=(const Tensor& other) {
  if (other.shape_ != shape_) {
    throw DimensionError("Tensor::operator+=: " + shape_to_string(shape_) + " vs " + shape_to_string(other.shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

template <typename T>
Tensor<T>& Tensor<T>::operator*=(T scale) {
  for (auto& v : data_) v *= scale;
  return *this;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix(a.shape(), "matmul");
  require_matrix(b.shape(), "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()));
  }
  Tensor<T> out(Shape{a.dim(0), b.dim(1)});
  Eigen::Map<const RowMajor<T>> ma(a.data(), a.dim(0), a.dim(1));
  Eigen::Map<const RowMajor<T>> mb(b.data(), b.dim(0), b.dim(1));
  Eigen::Map<RowMajor<T>> mo(out.data(), a.dim(0), b.dim(1));
  mo.noalias() = ma * mb;
  return out;
}

template <typename T>
Tensor<T> matmul_transposed(const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix(a.shape(), "matmul_transposed");
  require_matrix(b.shape(), "matmul_transposed");
  if (a.dim(1) != b.dim(1)) {
    throw DimensionError("matmul_transposed: inner dimensions differ, " + shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()) + "^T");
  }
  Tensor<T> out(Shape{a.dim(0), b.dim(0)});
  Eigen::Map<const RowMajor<T>> ma(a.data(), a.dim(0), a.dim(1));
  Eigen::Map<const RowMajor<T>> mb(b.data(), b.dim(0), b.dim(1));
  Eigen::Map<RowMajor<T>> mo(out.data(), a.dim(0), b.dim(0));
  mo.noalias() = ma * mb.transpose();
  return out;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_matrix(a.shape(), "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor<T> out(Shape{n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.data()[j * m + i] = a.data()[i * n + j];
  return out;
}

template <typename T>
std::size_t argmin(std::span<const T> values) {
  if (values.empty()) throw DomainError("argmin: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] < values[best]) best = i;
  }
  return best;
}

template <typename T>
std::size_t argmax(std::span<const T> values) {
  if (values.empty()) throw DomainError("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

namespace {

template <typename T>
T reduce_strided(const T* base, std::size_t count, std::size_t stride, ReduceOp op) {
  switch (op) {
    case ReduceOp::sum:
    case ReduceOp::mean: {
      T acc = 0;
      for (std::size_t i = 0; i < count; ++i) acc += base[i * stride];
      return op == ReduceOp::mean ? acc / static_cast<T>(count) : acc;
    }
    case ReduceOp::min:
    case ReduceOp::max: {
      T best = base[0];
      for (std::size_t i = 1; i < count; ++i) {
        const T v = base[i * stride];
        if (op == ReduceOp::min ? v < best : v > best) best = v;
      }
      return best;
    }
    case ReduceOp::argmin: {
      std::size_t best = 0;
      for (std::size_t i = 1; i < count; ++i) {
        if (base[i * stride] < base[best * stride]) best = i;
      }
      return static_cast<T>(best);
    }
  }
  return T(0);
}

}  // namespace

template <typename T>
Tensor<T> reduce(const Tensor<T>& a, ReduceOp op, std::optional<std::size_t> axis) {
  if (a.empty()) throw DomainError("reduce: empty tensor");
  if (!axis) {
    return Tensor<T>(Shape{1}, std::vector<T>{reduce_strided(a.data(), a.size(), 1, op)});
  }
  if (*axis >= a.rank()) {
    throw DimensionError("reduce: axis " + std::to_string(*axis) + " out of range for " + shape_to_string(a.shape()));
  }
  const Shape& s = a.shape();
  std::size_t outer = 1;
  std::size_t inner = 1;
  for (std::size_t i = 0; i < *axis; ++i) outer *= s[i];
  for (std::size_t i = *axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t count = s[*axis];

  Shape out_shape;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i != *axis) out_shape.push_back(s[i]);
  }
  if (out_shape.empty()) out_shape.push_back(1);

  std::vector<T> out(outer * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      out[o * inner + in] = reduce_strided(a.data() + o * count * inner + in, count, inner, op);
    }
  }
  return Tensor<T>(std::move(out_shape), std::move(out));
}

template <typename T>
T max_abs_difference(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("max_abs_difference: " + shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
  }
  T worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, static_cast<T>(std::abs(a.data()[i] - b.data()[i])));
  return worst;
}

#define PMN_INSTANTIATE(T)                                                                   \
  template class Tensor<T>;                                                                  \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> matmul_transposed<T>(const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> transpose<T>(const Tensor<T>&);                                          \
  template Tensor<T> reduce<T>(const Tensor<T>&, ReduceOp, std::optional<std::size_t>);      \
  template std::size_t argmin<T>(std::span<const T>);                                        \
  template std::size_t argmax<T>(std::span<const T>);                                        \
  template T max_abs_difference<T>(const Tensor<T>&, const Tensor<T>&);

PMN_INSTANTIATE(float)
PMN_INSTANTIATE(double)

#undef PMN_INSTANTIATE

}  // namespace pmn
