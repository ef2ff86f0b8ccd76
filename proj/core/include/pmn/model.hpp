#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pmn/distance.hpp"
#include "pmn/nn/layers.hpp"
#include "pmn/nn/sequential.hpp"

namespace pmn {

struct ConvStageSpec {
  std::size_t out_channels;
  nn::ConvGeometry geometry;
};

/// Autoencoder backbone geometry.
///
/// Encoder: conv stages (Conv-BN-ReLU), Flatten, Linear(hidden)-ReLU-Linear(latent).
/// Decoder: Linear(hidden)-ReLU-Linear(flat)-Reshape, deconv stages
/// (Deconv-BN-ReLU) and a final bare Deconv to one channel, flattened.
struct ArchSpec {
  std::size_t input_length = 1024;
  std::vector<ConvStageSpec> encoder_stages;
  std::size_t encoder_hidden = 128;
  std::size_t latent_dim = 64;
  std::size_t decoder_hidden = 128;
  std::vector<ConvStageSpec> decoder_stages;

  // The 1024-bin spectrum network (8x512 ... 128x4 -> 64 -> ... -> 1024).
  static ArchSpec standard();
  // Small geometry for finite-difference checks: 32 bins, latent 4.
  static ArchSpec tiny();

  std::size_t feature_channels() const;
  std::size_t feature_length() const;
  // Throws ConfigError when the chain does not close back on input_length.
  void validate() const;
};

enum class Variant { pmn, ae_mlp };

const char* to_string(Variant variant);
Variant variant_from_string(std::string_view name);

struct ModelConfig {
  ArchSpec arch = ArchSpec::standard();
  std::size_t classes = 4;
  std::size_t prototypes = 0;  // 0 means one per class
  Metric metric = Metric::sq_l2;
  Variant variant = Variant::pmn;
  std::size_t mlp_hidden = 32;
  double prototype_init_std = 0.1;
  std::uint64_t seed = 0;

  std::size_t prototype_count() const { return prototypes == 0 ? classes : prototypes; }
};

/// W[i][j] = -1 if j mod K == i else 0 (zero-based), i.e. -I when m == K.
template <typename T>
Tensor<T> init_fc_weight(std::size_t classes, std::size_t prototypes);

/// Class served by prototype j under the fc-weight initialization.
inline std::size_t prototype_class(std::size_t prototype, std::size_t classes) { return prototype % classes; }

/// Row-wise softmax, evaluated with the max-shift.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits);

template <typename T>
struct Classification {
  Tensor<T> latent;         // [N, q]
  Tensor<T> distances;      // [N, m]; empty for the MLP baseline
  Tensor<T> logits;         // [N, K]
  Tensor<T> probabilities;  // [N, K]
  std::vector<std::size_t> predictions;
};

template <typename T>
struct ForwardPass {
  Tensor<T> latent;
  Tensor<T> reconstruction;
  Tensor<T> distances;
  Tensor<T> logits;
};

/// Upstream gradients entering the model at its three outputs plus direct
/// prototype terms.
template <typename T>
struct BackwardSeeds {
  Tensor<T> d_logits;
  std::optional<Tensor<T>> d_reconstruction;
  std::optional<Tensor<T>> d_latent;
  std::optional<Tensor<T>> d_prototypes;
};

/// PM-layer followed by the bias-free FC map: v = W p(z).
template <typename T>
class PrototypeClassifier {
 public:
  PrototypeClassifier(std::size_t classes, std::size_t prototypes, std::size_t latent_dim, Metric metric);

  void initialize(Rng& rng, double init_std);
  Tensor<T> logits(const Tensor<T>& distances) const;
  Tensor<T> forward(const Tensor<T>& z, Tensor<T>* distances_out);
  Tensor<T> backward(const Tensor<T>& d_logits);
  void collect_params(const std::string& prefix, std::vector<nn::ParamRef<T>>& out);

  Metric metric() const { return metric_; }
  Tensor<T>& prototypes() { return prototypes_; }
  const Tensor<T>& prototypes() const { return prototypes_; }
  Tensor<T>& prototype_grad() { return grad_prototypes_; }
  Tensor<T>& fc_weight() { return fc_weight_; }
  const Tensor<T>& fc_weight() const { return fc_weight_; }

 private:
  Metric metric_;
  Tensor<T> prototypes_;  // [m, q]
  Tensor<T> fc_weight_;   // [K, m]
  Tensor<T> grad_prototypes_;
  Tensor<T> grad_fc_weight_;
  std::optional<Tensor<T>> z_;
  std::optional<Tensor<T>> distances_;
};

struct ShapeRow {
  std::string part;  // "Enc.", "Dec.", "Cla."
  std::size_t number;
  Shape item_shape;  // per-sample output (batch axis dropped)
};

/// Prototype matching network: encoder f, decoder g and classifier h, or the
/// autoencoder + MLP baseline with the same backbone.
///
/// The const members run the eval-mode path and are safe to call
/// concurrently on a frozen model. `forward`/`backward` record caches and need
/// exclusive access.
template <typename T>
class PmnModel {
 public:
  explicit PmnModel(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  std::size_t classes() const { return config_.classes; }
  std::size_t input_length() const { return config_.arch.input_length; }
  std::size_t latent_dim() const { return config_.arch.latent_dim; }
  bool has_prototypes() const { return prototype_head_.has_value(); }
  std::size_t prototype_count() const { return has_prototypes() ? config_.prototype_count() : 0; }

  Tensor<T> encode(const Tensor<T>& x) const;
  Tensor<T> decode(const Tensor<T>& z) const;
  Tensor<T> reconstruct(const Tensor<T>& x) const;
  Tensor<T> distances(const Tensor<T>& z) const;
  Tensor<T> logits_from_latent(const Tensor<T>& z) const;
  Classification<T> classify(const Tensor<T>& x) const;
  Classification<T> classify_latent(const Tensor<T>& z) const;

  // Output of the last encoder conv stage, [N, C, L_f].
  Tensor<T> feature_maps(const Tensor<T>& x) const;
  Tensor<T> logits_from_feature_maps(const Tensor<T>& maps) const;

  /// v'_k = 2 p_k^T z - p_k^T p_k. Only defined for sqL2 with W == -I, where it
  /// differs from W p(z) by the class-constant -|z|^2.
  Tensor<T> linear_equivalent_logits(const Tensor<T>& z) const;

  std::vector<ShapeRow> shape_trace() const;

  ForwardPass<T> forward(const Tensor<T>& x, nn::Mode mode);
  void backward(const BackwardSeeds<T>& seeds);

  /// d(scale * v_k)/d(maps), evaluated in eval mode. Leaves parameter
  /// gradients zeroed.
  Tensor<T> feature_map_gradient(const Tensor<T>& maps, std::size_t target_class, T scale = T(1));

  void zero_grad();
  void clear_cache();
  std::vector<nn::ParamRef<T>> params();
  std::vector<nn::BufferRef<T>> buffers();

  PrototypeClassifier<T>& prototype_head();
  const PrototypeClassifier<T>& prototype_head() const;

 private:
  Tensor<T> as_signal(const Tensor<T>& x) const;
  Tensor<T> head_logits(const Tensor<T>& z) const;

  ModelConfig config_;
  nn::Sequential<T> encoder_conv_;
  nn::Sequential<T> encoder_fc_;
  nn::Sequential<T> decoder_fc_;
  nn::Sequential<T> decoder_conv_;
  std::optional<PrototypeClassifier<T>> prototype_head_;
  std::optional<nn::Sequential<T>> mlp_head_;
  std::size_t cached_batch_ = 0;
};

}  // namespace pmn
