#pragma once

#include <optional>

#include "pmn/nn/layer.hpp"

namespace pmn::nn {

/// Geometry shared by the 1-D convolution and its transpose.
struct ConvGeometry {
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// floor((L + 2p - k) / s) + 1
std::size_t conv_output_length(std::size_t input_length, const ConvGeometry& g);
// (L - 1) s - 2p + k
std::size_t deconv_output_length(std::size_t input_length, const ConvGeometry& g);

/// Cross-correlation over [N, C_in, L] with weight [C_out, C_in, k].
template <typename T>
class Conv1d final : public Layer<T> {
 public:
  Conv1d(std::size_t in_channels, std::size_t out_channels, ConvGeometry geometry);

  LayerKind kind() const override { return LayerKind::conv1d; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv1d>(*this); }
  std::string describe() const override;
  Shape output_shape(const Shape& input) const override;

  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;

  void initialize(Rng& rng) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override;
  void clear_cache() override { cols_.reset(); }

  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }
  const ConvGeometry& geometry() const { return geometry_; }

 private:
  Tensor<T> apply(const Tensor<T>& x, Tensor<T>& cols) const;

  std::size_t in_channels_;
  std::size_t out_channels_;
  ConvGeometry geometry_;
  Tensor<T> weight_;
  Tensor<T> bias_;
  Tensor<T> grad_weight_;
  Tensor<T> grad_bias_;
  std::optional<Tensor<T>> cols_;
  Shape input_shape_;
};

/// Transposed convolution over [N, C_in, L] with weight [C_in, C_out, k]; the
/// adjoint of Conv1d with the same geometry.
template <typename T>
class Deconv1d final : public Layer<T> {
 public:
  Deconv1d(std::size_t in_channels, std::size_t out_channels, ConvGeometry geometry);

  LayerKind kind() const override { return LayerKind::deconv1d; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Deconv1d>(*this); }
  std::string describe() const override;
  Shape output_shape(const Shape& input) const override;

  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;

  void initialize(Rng& rng) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override;
  void clear_cache() override { input_cm_.reset(); }

  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }

 private:
  Tensor<T> apply(const Tensor<T>& x, Tensor<T>& input_cm) const;

  std::size_t in_channels_;
  std::size_t out_channels_;
  ConvGeometry geometry_;
  Tensor<T> weight_;
  Tensor<T> bias_;
  Tensor<T> grad_weight_;
  Tensor<T> grad_bias_;
  std::optional<Tensor<T>> input_cm_;  // input as [C_in, N * L]
  Shape input_shape_;
};

/// Per-channel normalization over [N, C] or [N, C, L].
template <typename T>
class BatchNorm1d final : public Layer<T> {
 public:
  static constexpr double kDefaultEps = 1e-5;
  static constexpr double kDefaultMomentum = 0.1;

  explicit BatchNorm1d(std::size_t channels, double eps = kDefaultEps, double momentum = kDefaultMomentum);

  LayerKind kind() const override { return LayerKind::batch_norm1d; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<BatchNorm1d>(*this); }
  std::string describe() const override;
  Shape output_shape(const Shape& input) const override;

  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;

  void initialize(Rng& rng) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override;
  void collect_buffers(const std::string& prefix, std::vector<BufferRef<T>>& out) override;
  void clear_cache() override { xhat_.reset(); }

  Tensor<T>& gamma() { return gamma_; }
  Tensor<T>& beta() { return beta_; }
  const Tensor<T>& running_mean() const { return running_mean_; }
  const Tensor<T>& running_var() const { return running_var_; }

 private:
  std::size_t channels_;
  double eps_;
  double momentum_;
  Tensor<T> gamma_;
  Tensor<T> beta_;
  Tensor<T> grad_gamma_;
  Tensor<T> grad_beta_;
  Tensor<T> running_mean_;
  Tensor<T> running_var_;

  std::optional<Tensor<T>> xhat_;
  std::vector<T> inv_std_;
  Mode cached_mode_ = Mode::eval;
};

/// y = x W^T + b over [N, in].
template <typename T>
class Linear final : public Layer<T> {
 public:
  Linear(std::size_t in_features, std::size_t out_features);

  LayerKind kind() const override { return LayerKind::linear; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Linear>(*this); }
  std::string describe() const override;
  Shape output_shape(const Shape& input) const override;

  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;

  void initialize(Rng& rng) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override;
  void clear_cache() override { input_.reset(); }

  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }

 private:
  std::size_t in_features_;
  std::size_t out_features_;
  Tensor<T> weight_;
  Tensor<T> bias_;
  Tensor<T> grad_weight_;
  Tensor<T> grad_bias_;
  std::optional<Tensor<T>> input_;
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::relu; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ReLU>(*this); }
  std::string describe() const override { return "ReLU"; }
  Shape output_shape(const Shape& input) const override { return input; }

  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;
  void clear_cache() override { output_.reset(); }

 private:
  std::optional<Tensor<T>> output_;
};

/// [N, d1, d2, ...] -> [N, d1 * d2 * ...]
template <typename T>
class Flatten final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::flatten; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Flatten>(*this); }
  std::string describe() const override { return "Flatten"; }
  Shape output_shape(const Shape& input) const override;

  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;
  void clear_cache() override { input_shape_.reset(); }

 private:
  std::optional<Shape> input_shape_;
};

/// [N, prod(item_shape)] -> [N, item_shape...]
template <typename T>
class Reshape final : public Layer<T> {
 public:
  explicit Reshape(Shape item_shape);

  LayerKind kind() const override { return LayerKind::reshape; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Reshape>(*this); }
  std::string describe() const override;
  Shape output_shape(const Shape& input) const override;

  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;
  void clear_cache() override { input_shape_.reset(); }

 private:
  Shape item_shape_;
  std::optional<Shape> input_shape_;
};

}  // namespace pmn::nn
