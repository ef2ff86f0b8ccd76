#include "pmn/model.hpp"

#include <cmath>
#include <utility>

namespace pmn {

constexpr double kOutputInitScale = 0.1;

using nn::ConvGeometry;
using nn::Mode;

ArchSpec ArchSpec::standard() {
  ArchSpec a;
  a.input_length = 1024;
  a.encoder_stages = {
      {8, {9, 2, 4}}, {16, {9, 2, 4}}, {32, {11, 4, 5}}, {64, {11, 4, 5}}, {128, {11, 4, 5}},
  };
  a.encoder_hidden = 128;
  a.latent_dim = 64;
  a.decoder_hidden = 128;
  // The third stage upsamples 64 -> 256, which needs stride 4; the
  // remaining stride-2 stages finish 256 -> 512 -> 1024.
  a.decoder_stages = {
      {64, {10, 4, 3}}, {32, {10, 4, 3}}, {16, {10, 4, 3}}, {8, {8, 2, 3}}, {1, {8, 2, 3}},
  };
  return a;
}

ArchSpec ArchSpec::tiny() {
  ArchSpec a;
  a.input_length = 32;
  a.encoder_stages = {{2, {3, 2, 1}}, {4, {3, 2, 1}}};
  a.encoder_hidden = 6;
  a.latent_dim = 4;
  a.decoder_hidden = 6;
  a.decoder_stages = {{2, {4, 2, 1}}, {1, {4, 2, 1}}};
  return a;
}

std::size_t ArchSpec::feature_channels() const {
  if (encoder_stages.empty()) throw ConfigError("ArchSpec: no encoder stages");
  return encoder_stages.back().out_channels;
}

std::size_t ArchSpec::feature_length() const {
  std::size_t len = input_length;
  for (const auto& s : encoder_stages) len = nn::conv_output_length(len, s.geometry);
  return len;
}

void ArchSpec::validate() const {
  if (encoder_stages.empty() || decoder_stages.empty()) throw ConfigError("ArchSpec: empty encoder or decoder");
  if (latent_dim == 0 || encoder_hidden == 0 || decoder_hidden == 0) throw ConfigError("ArchSpec: zero width");
  if (decoder_stages.back().out_channels != 1) throw ConfigError("ArchSpec: decoder must end with one channel");
  std::size_t len = feature_length();
  for (const auto& s : decoder_stages) len = nn::deconv_output_length(len, s.geometry);
  if (len != input_length) {
    throw ConfigError("ArchSpec: decoder emits " + std::to_string(len) + " bins, input has " +
                      std::to_string(input_length));
  }
}

const char* to_string(Variant variant) {
  return variant == Variant::pmn ? "pmn" : "ae-mlp-baseline";
}

Variant variant_from_string(std::string_view name) {
  if (name == "pmn") return Variant::pmn;
  if (name == "ae-mlp-baseline" || name == "ae-mlp" || name == "ae_mlp") return Variant::ae_mlp;
  throw ConfigError("unknown model variant '" + std::string(name) + "' (expected pmn or ae-mlp-baseline)");
}

template <typename T>
Tensor<T> init_fc_weight(std::size_t classes, std::size_t prototypes) {
  if (classes == 0) throw ConfigError("init_fc_weight: class count must be positive");
  if (prototypes < classes) {
    throw ConfigError("init_fc_weight: prototype count " + std::to_string(prototypes) + " below class count " +
                      std::to_string(classes));
  }
  Tensor<T> w(Shape{classes, prototypes});
  for (std::size_t j = 0; j < prototypes; ++j) w.at({j % classes, j}) = T(-1);
  return w;
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
  if (logits.rank() != 2) throw DimensionError("softmax_rows: expected [N, K], got " + shape_to_string(logits.shape()));
  Tensor<T> out(logits.shape());
  const std::size_t k = logits.dim(1);
  for (std::size_t i = 0; i < logits.dim(0); ++i) {
    auto in = logits.row(i);
    auto o = out.row(i);
    double top = in[0];
    for (auto v : in) top = std::max(top, static_cast<double>(v));
    double total = 0.0;
    std::vector<double> e(k);
    for (std::size_t j = 0; j < k; ++j) total += e[j] = std::exp(static_cast<double>(in[j]) - top);
    for (std::size_t j = 0; j < k; ++j) o[j] = static_cast<T>(e[j] / total);
  }
  return out;
}

// ------------------------------------------------------ PrototypeClassifier

template <typename T>
PrototypeClassifier<T>::PrototypeClassifier(std::size_t classes, std::size_t prototypes, std::size_t latent_dim,
                                            Metric metric)
    : metric_(metric),
      prototypes_(Shape{prototypes, latent_dim}),
      fc_weight_(init_fc_weight<T>(classes, prototypes)),
      grad_prototypes_(Shape{prototypes, latent_dim}),
      grad_fc_weight_(Shape{classes, prototypes}) {}

template <typename T>
void PrototypeClassifier<T>::initialize(Rng& rng, double init_std) {
  for (auto& v : prototypes_.values()) v = static_cast<T>(rng.gaussian(0.0, init_std));
  fc_weight_ = init_fc_weight<T>(fc_weight_.dim(0), fc_weight_.dim(1));
}

template <typename T>
Tensor<T> PrototypeClassifier<T>::logits(const Tensor<T>& distances) const {
  return matmul_transposed(distances, fc_weight_);
}

template <typename T>
Tensor<T> PrototypeClassifier<T>::forward(const Tensor<T>& z, Tensor<T>* distances_out) {
  Tensor<T> d = pm_layer(z, prototypes_, metric_);
  Tensor<T> v = logits(d);
  z_ = z;
  distances_ = d;
  if (distances_out) *distances_out = std::move(d);
  return v;
}

template <typename T>
Tensor<T> PrototypeClassifier<T>::backward(const Tensor<T>& d_logits) {
  if (!z_ || !distances_) throw UsageError("PrototypeClassifier: backward called without a recorded forward pass");
  const std::size_t n = z_->dim(0), m = prototypes_.dim(0);
  if (d_logits.shape() != Shape{n, fc_weight_.dim(0)}) {
    throw DimensionError("PrototypeClassifier: logit gradient " + shape_to_string(d_logits.shape()));
  }
  // v = D W^T  =>  dW = dV^T D,  dD = dV W
  grad_fc_weight_ += matmul(transpose(d_logits), *distances_);
  const Tensor<T> d_dist = matmul(d_logits, fc_weight_);
  Tensor<T> dz(z_->shape());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      distance_backward<T>(z_->row(i), prototypes_.row(j), metric_, d_dist.data()[i * m + j], dz.row(i),
                           grad_prototypes_.row(j));
    }
  return dz;
}

template <typename T>
void PrototypeClassifier<T>::collect_params(const std::string& prefix, std::vector<nn::ParamRef<T>>& out) {
  out.push_back({nn::join_name(prefix, "prototypes"), &prototypes_, &grad_prototypes_});
  out.push_back({nn::join_name(prefix, "fc_weight"), &fc_weight_, &grad_fc_weight_});
}

// ------------------------------------------------------------- PmnModel

template <typename T>
PmnModel<T>::PmnModel(ModelConfig config) : config_(std::move(config)) {
  const ArchSpec& a = config_.arch;
  a.validate();
  if (config_.classes < 2) throw ConfigError("PmnModel: at least two classes required");

  std::size_t channels = 1;
  for (std::size_t s = 0; s < a.encoder_stages.size(); ++s) {
    const auto& spec = a.encoder_stages[s];
    nn::Sequential<T> stage;
    stage.template emplace<nn::Conv1d<T>>("conv", channels, spec.out_channels, spec.geometry);
    stage.template emplace<nn::BatchNorm1d<T>>("bn", spec.out_channels);
    stage.template emplace<nn::ReLU<T>>("relu");
    encoder_conv_.add("stage" + std::to_string(s + 1), std::make_unique<nn::Sequential<T>>(std::move(stage)));
    channels = spec.out_channels;
  }
  const std::size_t flat = a.feature_channels() * a.feature_length();
  encoder_fc_.template emplace<nn::Flatten<T>>("flatten");
  encoder_fc_.template emplace<nn::Linear<T>>("fc1", flat, a.encoder_hidden);
  encoder_fc_.template emplace<nn::ReLU<T>>("relu");
  encoder_fc_.template emplace<nn::Linear<T>>("fc2", a.encoder_hidden, a.latent_dim);

  decoder_fc_.template emplace<nn::Linear<T>>("fc1", a.latent_dim, a.decoder_hidden);
  decoder_fc_.template emplace<nn::ReLU<T>>("relu");
  decoder_fc_.template emplace<nn::Linear<T>>("fc2", a.decoder_hidden, flat);
  decoder_fc_.template emplace<nn::Reshape<T>>("reshape", Shape{a.feature_channels(), a.feature_length()});

  channels = a.feature_channels();
  for (std::size_t s = 0; s < a.decoder_stages.size(); ++s) {
    const auto& spec = a.decoder_stages[s];
    nn::Sequential<T> stage;
    stage.template emplace<nn::Deconv1d<T>>("deconv", channels, spec.out_channels, spec.geometry);
    if (s + 1 < a.decoder_stages.size()) {
      stage.template emplace<nn::BatchNorm1d<T>>("bn", spec.out_channels);
      stage.template emplace<nn::ReLU<T>>("relu");
    }
    decoder_conv_.add("stage" + std::to_string(s + 1), std::make_unique<nn::Sequential<T>>(std::move(stage)));
    channels = spec.out_channels;
  }
  decoder_conv_.template emplace<nn::Flatten<T>>("flatten");

  Rng rng(config_.seed);
  encoder_conv_.initialize(rng);
  encoder_fc_.initialize(rng);
  decoder_fc_.initialize(rng);
  decoder_conv_.initialize(rng);
  // Output deconv starts at a tenth of the default init scale.
  auto& out_stage = static_cast<nn::Sequential<T>&>(decoder_conv_.at(a.decoder_stages.size() - 1));
  static_cast<nn::Deconv1d<T>&>(out_stage.at(0)).weight() *= T(kOutputInitScale);

  if (config_.variant == Variant::pmn) {
    prototype_head_.emplace(config_.classes, config_.prototype_count(), a.latent_dim, config_.metric);
    prototype_head_->initialize(rng, config_.prototype_init_std);
  } else {
    nn::Sequential<T> head;
    head.template emplace<nn::Linear<T>>("fc1", a.latent_dim, config_.mlp_hidden);
    head.template emplace<nn::ReLU<T>>("relu");
    head.template emplace<nn::Linear<T>>("fc2", config_.mlp_hidden, config_.classes);
    head.initialize(rng);
    mlp_head_ = std::move(head);
  }
}

template <typename T>
Tensor<T> PmnModel<T>::as_signal(const Tensor<T>& x) const {
  const std::size_t len = config_.arch.input_length;
  if (x.rank() == 1 && x.size() == len) return x.reshaped(Shape{1, 1, len});
  if (x.rank() == 2 && x.dim(1) == len) return x.reshaped(Shape{x.dim(0), 1, len});
  throw DimensionError("PmnModel: expected [N, " + std::to_string(len) + "] spectra, got " +
                       shape_to_string(x.shape()));
}

template <typename T>
Tensor<T> PmnModel<T>::encode(const Tensor<T>& x) const {
  return encoder_fc_.infer(encoder_conv_.infer(as_signal(x)));
}

template <typename T>
Tensor<T> PmnModel<T>::decode(const Tensor<T>& z) const {
  const Tensor<T> zz = z.rank() == 1 ? z.reshaped(Shape{1, z.size()}) : z;
  return decoder_conv_.infer(decoder_fc_.infer(zz));
}

template <typename T>
Tensor<T> PmnModel<T>::reconstruct(const Tensor<T>& x) const {
  return decode(encode(x));
}

template <typename T>
PrototypeClassifier<T>& PmnModel<T>::prototype_head() {
  if (!prototype_head_) throw ConfigError("PmnModel: the MLP baseline has no prototypes");
  return *prototype_head_;
}

template <typename T>
const PrototypeClassifier<T>& PmnModel<T>::prototype_head() const {
  if (!prototype_head_) throw ConfigError("PmnModel: the MLP baseline has no prototypes");
  return *prototype_head_;
}

template <typename T>
Tensor<T> PmnModel<T>::distances(const Tensor<T>& z) const {
  const auto& head = prototype_head();
  return pm_layer(z, head.prototypes(), head.metric());
}

template <typename T>
Tensor<T> PmnModel<T>::head_logits(const Tensor<T>& z) const {
  if (prototype_head_) return prototype_head_->logits(pm_layer(z, prototype_head_->prototypes(), config_.metric));
  return mlp_head_->infer(z);
}

template <typename T>
Tensor<T> PmnModel<T>::logits_from_latent(const Tensor<T>& z) const {
  return head_logits(z.rank() == 1 ? z.reshaped(Shape{1, z.size()}) : z);
}

namespace {

template <typename T>
void require_finite(const Tensor<T>& t, const std::string& where) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(static_cast<double>(t.data()[i]))) {
      throw NumericError("non-finite value in " + where + " at flat index " + std::to_string(i) + " (shape " +
                         shape_to_string(t.shape()) + ")");
    }
  }
}

}  // namespace

template <typename T>
Classification<T> PmnModel<T>::classify_latent(const Tensor<T>& z) const {
  Classification<T> c;
  c.latent = z.rank() == 1 ? z.reshaped(Shape{1, z.size()}) : z;
  require_finite(c.latent, "encoder output (latent)");
  if (prototype_head_) {
    c.distances = pm_layer(c.latent, prototype_head_->prototypes(), config_.metric);
    c.logits = prototype_head_->logits(c.distances);
  } else {
    c.logits = mlp_head_->infer(c.latent);
  }
  c.probabilities = softmax_rows(c.logits);
  for (std::size_t i = 0; i < c.probabilities.dim(0); ++i) c.predictions.push_back(argmax(std::as_const(c.probabilities).row(i)));
  return c;
}

template <typename T>
Classification<T> PmnModel<T>::classify(const Tensor<T>& x) const {
  require_finite(x, "input spectrum");
  return classify_latent(encode(x));
}

template <typename T>
Tensor<T> PmnModel<T>::feature_maps(const Tensor<T>& x) const {
  return encoder_conv_.infer(as_signal(x));
}

template <typename T>
Tensor<T> PmnModel<T>::logits_from_feature_maps(const Tensor<T>& maps) const {
  return head_logits(encoder_fc_.infer(maps));
}

template <typename T>
Tensor<T> PmnModel<T>::linear_equivalent_logits(const Tensor<T>& z) const {
  const auto& head = prototype_head();
  if (head.metric() != Metric::sq_l2) throw ConfigError("linear_equivalent_logits: requires the sqL2 metric");
  const Tensor<T>& w = head.fc_weight();
  if (w.dim(0) != w.dim(1) || !(w == init_fc_weight<T>(w.dim(0), w.dim(1)))) {
    throw ConfigError("linear_equivalent_logits: requires fc_weight == -I");
  }
  const Tensor<T> zz = z.rank() == 1 ? z.reshaped(Shape{1, z.size()}) : z;
  const Tensor<T>& p = head.prototypes();
  Tensor<T> v = matmul_transposed(zz, p);  // [N, K] of p_k^T z
  for (std::size_t i = 0; i < v.dim(0); ++i)
    for (std::size_t k = 0; k < v.dim(1); ++k) {
      T pp = 0;
      for (auto e : p.row(k)) pp += e * e;
      v.data()[i * v.dim(1) + k] = T(2) * v.data()[i * v.dim(1) + k] - pp;
    }
  return v;
}

template <typename T>
std::vector<ShapeRow> PmnModel<T>::shape_trace() const {
  std::vector<ShapeRow> rows;
  auto item = [](const Shape& s) { return Shape(s.begin() + 1, s.end()); };
  Tensor<T> h = as_signal(Tensor<T>(Shape{1, config_.arch.input_length}));
  for (std::size_t s = 0; s < encoder_conv_.size(); ++s) {
    h = encoder_conv_.at(s).infer(h);
    rows.push_back({"Enc.", s + 1, item(h.shape())});
  }
  Tensor<T> z = encoder_fc_.infer(h);
  rows.push_back({"Enc.", encoder_conv_.size() + 1, item(z.shape())});
  h = decoder_fc_.infer(z);
  rows.push_back({"Dec.", 1, item(h.shape())});
  for (std::size_t s = 0; s < decoder_conv_.size(); ++s) {
    h = decoder_conv_.at(s).infer(h);
    if (decoder_conv_.at(s).kind() == nn::LayerKind::flatten) {
      rows.back().item_shape = item(h.shape());  // final stage is reported flattened
    } else {
      rows.push_back({"Dec.", s + 2, item(h.shape())});
    }
  }
  rows.push_back({"Cla.", 1, item(head_logits(z).shape())});
  return rows;
}

template <typename T>
ForwardPass<T> PmnModel<T>::forward(const Tensor<T>& x, Mode mode) {
  ForwardPass<T> out;
  const Tensor<T> maps = encoder_conv_.forward(as_signal(x), mode);
  out.latent = encoder_fc_.forward(maps, mode);
  out.reconstruction = decoder_conv_.forward(decoder_fc_.forward(out.latent, mode), mode);
  if (prototype_head_) {
    out.logits = prototype_head_->forward(out.latent, &out.distances);
  } else {
    out.logits = mlp_head_->forward(out.latent, mode);
  }
  cached_batch_ = out.latent.dim(0);
  return out;
}

template <typename T>
void PmnModel<T>::backward(const BackwardSeeds<T>& seeds) {
  if (cached_batch_ == 0) throw UsageError("PmnModel: backward called without a recorded forward pass");
  Tensor<T> dz = prototype_head_ ? prototype_head_->backward(seeds.d_logits) : mlp_head_->backward(seeds.d_logits);
  if (seeds.d_reconstruction) dz += decoder_fc_.backward(decoder_conv_.backward(*seeds.d_reconstruction));
  if (seeds.d_latent) dz += *seeds.d_latent;
  if (seeds.d_prototypes) prototype_head().prototype_grad() += *seeds.d_prototypes;
  encoder_conv_.backward(encoder_fc_.backward(dz));
}

template <typename T>
Tensor<T> PmnModel<T>::feature_map_gradient(const Tensor<T>& maps, std::size_t target_class, T scale) {
  if (target_class >= config_.classes) throw UsageError("feature_map_gradient: target class out of range");
  const Tensor<T> z = encoder_fc_.forward(maps, Mode::eval);
  Tensor<T> logits = prototype_head_ ? prototype_head_->forward(z, nullptr) : mlp_head_->forward(z, Mode::eval);
  Tensor<T> seed(logits.shape());
  for (std::size_t i = 0; i < seed.dim(0); ++i) seed.at({i, target_class}) = scale;
  Tensor<T> dz = prototype_head_ ? prototype_head_->backward(seed) : mlp_head_->backward(seed);
  Tensor<T> d_maps = encoder_fc_.backward(dz);
  zero_grad();
  return d_maps;
}

template <typename T>
void PmnModel<T>::zero_grad() {
  for (auto& p : params()) p.grad->fill(T(0));
}

template <typename T>
void PmnModel<T>::clear_cache() {
  encoder_conv_.clear_cache();
  encoder_fc_.clear_cache();
  decoder_fc_.clear_cache();
  decoder_conv_.clear_cache();
  if (mlp_head_) mlp_head_->clear_cache();
  cached_batch_ = 0;
}

template <typename T>
std::vector<nn::ParamRef<T>> PmnModel<T>::params() {
  std::vector<nn::ParamRef<T>> out;
  encoder_conv_.collect_params("encoder", out);
  encoder_fc_.collect_params("encoder.head", out);
  decoder_fc_.collect_params("decoder.head", out);
  decoder_conv_.collect_params("decoder", out);
  if (prototype_head_) prototype_head_->collect_params("classifier", out);
  if (mlp_head_) mlp_head_->collect_params("classifier", out);
  return out;
}

template <typename T>
std::vector<nn::BufferRef<T>> PmnModel<T>::buffers() {
  std::vector<nn::BufferRef<T>> out;
  encoder_conv_.collect_buffers("encoder", out);
  decoder_conv_.collect_buffers("decoder", out);
  return out;
}

template Tensor<float> init_fc_weight<float>(std::size_t, std::size_t);
template Tensor<double> init_fc_weight<double>(std::size_t, std::size_t);
template Tensor<float> softmax_rows<float>(const Tensor<float>&);
template Tensor<double> softmax_rows<double>(const Tensor<double>&);
template class PrototypeClassifier<float>;
template class PrototypeClassifier<double>;
template class PmnModel<float>;
template class PmnModel<double>;

}  // namespace pmn
