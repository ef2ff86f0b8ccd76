#pragma once

#include <utility>

#include "pmn/nn/layer.hpp"

namespace pmn::nn {

/// Ordered chain of named layers; itself a layer.
template <typename T>
class Sequential final : public Layer<T> {
 public:
  Sequential() = default;
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  Sequential& add(std::string name, std::unique_ptr<Layer<T>> layer);

  template <typename L, typename... Args>
  Sequential& emplace(std::string name, Args&&... args) {
    return add(std::move(name), std::make_unique<L>(std::forward<Args>(args)...));
  }

  std::size_t size() const { return layers_.size(); }
  Layer<T>& at(std::size_t i) { return *layers_.at(i).second; }
  const Layer<T>& at(std::size_t i) const { return *layers_.at(i).second; }
  const std::string& name_at(std::size_t i) const { return layers_.at(i).first; }

  LayerKind kind() const override { return LayerKind::sequential; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Sequential>(*this); }
  std::string describe() const override;
  Shape output_shape(const Shape& input) const override;

  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;

  void initialize(Rng& rng) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override;
  void collect_buffers(const std::string& prefix, std::vector<BufferRef<T>>& out) override;
  void clear_cache() override;

 private:
  std::vector<std::pair<std::string, std::unique_ptr<Layer<T>>>> layers_;
};

}  // namespace pmn::nn
