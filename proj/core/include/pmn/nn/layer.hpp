#pragma once

#include <memory>
#include <string>
#include <vector>

#include "pmn/rng.hpp"
#include "pmn/tensor.hpp"

namespace pmn::nn {

enum class Mode { train, eval };

enum class LayerKind { conv1d, deconv1d, batch_norm1d, linear, relu, flatten, reshape, sequential };

const char* to_string(LayerKind kind);

template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value;
  Tensor<T>* grad;
};

template <typename T>
struct BufferRef {
  std::string name;
  Tensor<T>* value;
};

/// One differentiable stage with explicit backward rule.
///
/// `infer` is the const eval-mode path and never touches the cache, so a
/// frozen layer can be shared between threads. `forward` records what
/// `backward` needs; in train mode it also updates running statistics.
/// Parameter gradients accumulate until `zero_grad`.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;
  virtual std::string describe() const = 0;

  // Throws DimensionError when `input` does not fit the layer geometry.
  virtual Shape output_shape(const Shape& input) const = 0;

  virtual Tensor<T> infer(const Tensor<T>& x) const = 0;
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_output) = 0;

  // Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases zero.
  virtual void initialize(Rng& /*rng*/) {}
  virtual void collect_params(const std::string& /*prefix*/, std::vector<ParamRef<T>>& /*out*/) {}
  virtual void collect_buffers(const std::string& /*prefix*/, std::vector<BufferRef<T>>& /*out*/) {}
  virtual void clear_cache() {}

  std::vector<ParamRef<T>> params(const std::string& prefix = "") {
    std::vector<ParamRef<T>> out;
    collect_params(prefix, out);
    return out;
  }

  void zero_grad() {
    for (auto& p : params()) p.grad->fill(T(0));
  }
};

inline std::string join_name(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

}  // namespace pmn::nn
