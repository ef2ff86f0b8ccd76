#include "pmn/nn/layers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pmn::nn {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv1d: return "Conv1d";
    case LayerKind::deconv1d: return "Deconv1d";
    case LayerKind::batch_norm1d: return "BatchNorm1d";
    case LayerKind::linear: return "Linear";
    case LayerKind::relu: return "ReLU";
    case LayerKind::flatten: return "Flatten";
    case LayerKind::reshape: return "Reshape";
    case LayerKind::sequential: return "Sequential";
  }
  return "?";
}

std::size_t conv_output_length(std::size_t input_length, const ConvGeometry& g) {
  if (g.kernel == 0 || g.stride == 0) throw ConfigError("conv geometry: kernel and stride must be positive");
  if (input_length + 2 * g.padding < g.kernel) {
    throw DimensionError("conv: input length " + std::to_string(input_length) + " shorter than kernel " +
                         std::to_string(g.kernel));
  }
  return (input_length + 2 * g.padding - g.kernel) / g.stride + 1;
}

std::size_t deconv_output_length(std::size_t input_length, const ConvGeometry& g) {
  if (g.kernel == 0 || g.stride == 0) throw ConfigError("deconv geometry: kernel and stride must be positive");
  if (input_length == 0) throw DimensionError("deconv: empty input");
  const std::size_t full = (input_length - 1) * g.stride + g.kernel;
  if (full <= 2 * g.padding) throw DimensionError("deconv: padding consumes the whole output");
  return full - 2 * g.padding;
}

namespace {

template <typename T>
using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<RowMajor<T>>;
template <typename T>
using MapCM = Eigen::Map<const RowMajor<T>>;

// Window gather: cols[c*k + j][n*out_len + t] = x[n][c][t*s + j - p] (zero
// outside [0, len)).
template <typename T>
void im2col(const T* x, std::size_t batch, std::size_t channels, std::size_t len, const ConvGeometry& g,
            std::size_t out_len, T* cols) {
  const std::size_t width = batch * out_len;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t j = 0; j < g.kernel; ++j) {
      T* row = cols + (c * g.kernel + j) * width;
      for (std::size_t n = 0; n < batch; ++n) {
        const T* src = x + (n * channels + c) * len;
        T* dst = row + n * out_len;
        for (std::size_t t = 0; t < out_len; ++t) {
          const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * g.stride + j) - static_cast<std::ptrdiff_t>(g.padding);
          dst[t] = (pos >= 0 && pos < static_cast<std::ptrdiff_t>(len)) ? src[pos] : T(0);
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add columns back into x.
template <typename T>
void col2im(const T* cols, std::size_t batch, std::size_t channels, std::size_t len, const ConvGeometry& g,
            std::size_t out_len, T* x) {
  const std::size_t width = batch * out_len;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t j = 0; j < g.kernel; ++j) {
      const T* row = cols + (c * g.kernel + j) * width;
      for (std::size_t n = 0; n < batch; ++n) {
        T* dst = x + (n * channels + c) * len;
        const T* src = row + n * out_len;
        for (std::size_t t = 0; t < out_len; ++t) {
          const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * g.stride + j) - static_cast<std::ptrdiff_t>(g.padding);
          if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(len)) dst[pos] += src[t];
        }
      }
    }
  }
}

// [N, C, L] -> [C, N*L]
template <typename T>
Tensor<T> to_channel_major(const Tensor<T>& x) {
  const std::size_t n = x.dim(0), c = x.dim(1), l = x.dim(2);
  Tensor<T> out(Shape{c, n * l});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T* src = x.data() + (i * c + ch) * l;
      std::copy(src, src + l, out.data() + ch * n * l + i * l);
    }
  return out;
}

// [C, N*L] -> [N, C, L]
template <typename T>
Tensor<T> from_channel_major(const T* cm, std::size_t n, std::size_t c, std::size_t l) {
  Tensor<T> out(Shape{n, c, l});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T* src = cm + ch * n * l + i * l;
      std::copy(src, src + l, out.data() + (i * c + ch) * l);
    }
  return out;
}

template <typename T>
void fill_uniform(Tensor<T>& t, Rng& rng, double bound) {
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-bound, bound));
}

void require_rank3(const Shape& s, std::size_t channels, const char* who) {
  if (s.size() != 3 || s[1] != channels) {
    throw DimensionError(std::string(who) + ": expected [N, " + std::to_string(channels) + ", L], got " +
                         shape_to_string(s));
  }
}

template <typename T>
void require_cache(const std::optional<T>& cache, const char* who) {
  if (!cache) throw UsageError(std::string(who) + ": backward called without a recorded forward pass");
}

void require_grad_shape(const Shape& got, const Shape& expected, const char* who) {
  if (got != expected) {
    throw DimensionError(std::string(who) + ": gradient shape " + shape_to_string(got) + " vs output " +
                         shape_to_string(expected));
  }
}

}  // namespace

// ---------------------------------------------------------------- Conv1d

template <typename T>
Conv1d<T>::Conv1d(std::size_t in_channels, std::size_t out_channels, ConvGeometry geometry)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      geometry_(geometry),
      weight_(Shape{out_channels, in_channels, geometry.kernel}),
      bias_(Shape{out_channels}),
      grad_weight_(Shape{out_channels, in_channels, geometry.kernel}),
      grad_bias_(Shape{out_channels}) {}

template <typename T>
std::string Conv1d<T>::describe() const {
  std::ostringstream os;
  os << "Conv1d(" << in_channels_ << "->" << out_channels_ << ", " << geometry_.kernel << "@" << geometry_.stride
     << "@" << geometry_.padding << ")";
  return os.str();
}

template <typename T>
Shape Conv1d<T>::output_shape(const Shape& input) const {
  require_rank3(input, in_channels_, "Conv1d");
  return {input[0], out_channels_, conv_output_length(input[2], geometry_)};
}

template <typename T>
Tensor<T> Conv1d<T>::apply(const Tensor<T>& x, Tensor<T>& cols) const {
  const Shape out_shape = output_shape(x.shape());
  const std::size_t n = x.dim(0), len = x.dim(2), out_len = out_shape[2];
  const std::size_t ck = in_channels_ * geometry_.kernel;
  cols = Tensor<T>(Shape{ck, n * out_len});
  im2col(x.data(), n, in_channels_, len, geometry_, out_len, cols.data());

  AlignedVector<T> y(out_channels_ * n * out_len);
  MapM<T> my(y.data(), out_channels_, n * out_len);
  my.noalias() = MapCM<T>(weight_.data(), out_channels_, ck) * MapCM<T>(cols.data(), ck, n * out_len);
  Tensor<T> out = from_channel_major(y.data(), n, out_channels_, out_len);
  T* o = out.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < out_channels_; ++c) {
      const T b = bias_.data()[c];
      T* row = o + (i * out_channels_ + c) * out_len;
      for (std::size_t t = 0; t < out_len; ++t) row[t] += b;
    }
  return out;
}

template <typename T>
Tensor<T> Conv1d<T>::infer(const Tensor<T>& x) const {
  Tensor<T> cols;
  return apply(x, cols);
}

template <typename T>
Tensor<T> Conv1d<T>::forward(const Tensor<T>& x, Mode) {
  Tensor<T> cols;
  Tensor<T> out = apply(x, cols);
  cols_ = std::move(cols);
  input_shape_ = x.shape();
  return out;
}

template <typename T>
Tensor<T> Conv1d<T>::backward(const Tensor<T>& grad_output) {
  require_cache(cols_, "Conv1d");
  const Shape out_shape = output_shape(input_shape_);
  require_grad_shape(grad_output.shape(), out_shape, "Conv1d");
  const std::size_t n = input_shape_[0], len = input_shape_[2], out_len = out_shape[2];
  const std::size_t ck = in_channels_ * geometry_.kernel;

  Tensor<T> dy = to_channel_major(grad_output);  // [O, N*out_len]
  MapCM<T> mdy(dy.data(), out_channels_, n * out_len);
  MapCM<T> mcols(cols_->data(), ck, n * out_len);

  MapM<T>(grad_weight_.data(), out_channels_, ck).noalias() += mdy * mcols.transpose();
  for (std::size_t c = 0; c < out_channels_; ++c) grad_bias_.data()[c] += mdy.row(c).sum();

  Tensor<T> dcols(Shape{ck, n * out_len});
  MapM<T>(dcols.data(), ck, n * out_len).noalias() = MapCM<T>(weight_.data(), out_channels_, ck).transpose() * mdy;
  Tensor<T> dx(input_shape_);
  col2im(dcols.data(), n, in_channels_, len, geometry_, out_len, dx.data());
  return dx;
}

template <typename T>
void Conv1d<T>::initialize(Rng& rng) {
  fill_uniform(weight_, rng, std::sqrt(1.0 / static_cast<double>(in_channels_ * geometry_.kernel)));
  bias_.fill(T(0));
}

template <typename T>
void Conv1d<T>::collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
  out.push_back({join_name(prefix, "weight"), &weight_, &grad_weight_});
  out.push_back({join_name(prefix, "bias"), &bias_, &grad_bias_});
}

// -------------------------------------------------------------- Deconv1d

template <typename T>
Deconv1d<T>::Deconv1d(std::size_t in_channels, std::size_t out_channels, ConvGeometry geometry)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      geometry_(geometry),
      weight_(Shape{in_channels, out_channels, geometry.kernel}),
      bias_(Shape{out_channels}),
      grad_weight_(Shape{in_channels, out_channels, geometry.kernel}),
      grad_bias_(Shape{out_channels}) {}

template <typename T>
std::string Deconv1d<T>::describe() const {
  std::ostringstream os;
  os << "Deconv1d(" << in_channels_ << "->" << out_channels_ << ", " << geometry_.kernel << "@" << geometry_.stride
     << "@" << geometry_.padding << ")";
  return os.str();
}

template <typename T>
Shape Deconv1d<T>::output_shape(const Shape& input) const {
  require_rank3(input, in_channels_, "Deconv1d");
  return {input[0], out_channels_, deconv_output_length(input[2], geometry_)};
}

template <typename T>
Tensor<T> Deconv1d<T>::apply(const Tensor<T>& x, Tensor<T>& input_cm) const {
  const Shape out_shape = output_shape(x.shape());
  const std::size_t n = x.dim(0), len = x.dim(2), out_len = out_shape[2];
  const std::size_t ok = out_channels_ * geometry_.kernel;
  input_cm = to_channel_major(x);  // [C_in, N*len]

  Tensor<T> cols(Shape{ok, n * len});
  MapM<T>(cols.data(), ok, n * len).noalias() =
      MapCM<T>(weight_.data(), in_channels_, ok).transpose() * MapCM<T>(input_cm.data(), in_channels_, n * len);

  // The transposed convolution scatters each input position through the
  // kernel: exactly col2im with the roles of the two lengths swapped.
  Tensor<T> out(out_shape);
  col2im(cols.data(), n, out_channels_, out_len, geometry_, len, out.data());
  T* o = out.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < out_channels_; ++c) {
      const T b = bias_.data()[c];
      T* row = o + (i * out_channels_ + c) * out_len;
      for (std::size_t t = 0; t < out_len; ++t) row[t] += b;
    }
  return out;
}

template <typename T>
Tensor<T> Deconv1d<T>::infer(const Tensor<T>& x) const {
  Tensor<T> input_cm;
  return apply(x, input_cm);
}

template <typename T>
Tensor<T> Deconv1d<T>::forward(const Tensor<T>& x, Mode) {
  Tensor<T> input_cm;
  Tensor<T> out = apply(x, input_cm);
  input_cm_ = std::move(input_cm);
  input_shape_ = x.shape();
  return out;
}

template <typename T>
Tensor<T> Deconv1d<T>::backward(const Tensor<T>& grad_output) {
  require_cache(input_cm_, "Deconv1d");
  const Shape out_shape = output_shape(input_shape_);
  require_grad_shape(grad_output.shape(), out_shape, "Deconv1d");
  const std::size_t n = input_shape_[0], len = input_shape_[2], out_len = out_shape[2];
  const std::size_t ok = out_channels_ * geometry_.kernel;

  Tensor<T> dcols(Shape{ok, n * len});
  im2col(grad_output.data(), n, out_channels_, out_len, geometry_, len, dcols.data());
  MapCM<T> mdcols(dcols.data(), ok, n * len);

  MapM<T>(grad_weight_.data(), in_channels_, ok).noalias() +=
      MapCM<T>(input_cm_->data(), in_channels_, n * len) * mdcols.transpose();
  const T* g = grad_output.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < out_channels_; ++c) {
      const T* row = g + (i * out_channels_ + c) * out_len;
      T acc = 0;
      for (std::size_t t = 0; t < out_len; ++t) acc += row[t];
      grad_bias_.data()[c] += acc;
    }

  AlignedVector<T> dx_cm(in_channels_ * n * len);
  MapM<T>(dx_cm.data(), in_channels_, n * len).noalias() = MapCM<T>(weight_.data(), in_channels_, ok) * mdcols;
  return from_channel_major(dx_cm.data(), n, in_channels_, len);
}

template <typename T>
void Deconv1d<T>::initialize(Rng& rng) {
  // Each output position receives about in_channels * kernel / stride terms.
  const double fan_in =
      std::max(1.0, static_cast<double>(in_channels_ * geometry_.kernel) / static_cast<double>(geometry_.stride));
  fill_uniform(weight_, rng, std::sqrt(1.0 / fan_in));
  bias_.fill(T(0));
}

template <typename T>
void Deconv1d<T>::collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
  out.push_back({join_name(prefix, "weight"), &weight_, &grad_weight_});
  out.push_back({join_name(prefix, "bias"), &bias_, &grad_bias_});
}

// ----------------------------------------------------------- BatchNorm1d

template <typename T>
BatchNorm1d<T>::BatchNorm1d(std::size_t channels, double eps, double momentum)
    : channels_(channels),
      eps_(eps),
      momentum_(momentum),
      gamma_(Shape{channels}, T(1)),
      beta_(Shape{channels}),
      grad_gamma_(Shape{channels}),
      grad_beta_(Shape{channels}),
      running_mean_(Shape{channels}),
      running_var_(Shape{channels}, T(1)) {}

template <typename T>
std::string BatchNorm1d<T>::describe() const {
  return "BatchNorm1d(" + std::to_string(channels_) + ")";
}

template <typename T>
Shape BatchNorm1d<T>::output_shape(const Shape& input) const {
  if ((input.size() != 2 && input.size() != 3) || input[1] != channels_) {
    throw DimensionError("BatchNorm1d: expected [N, " + std::to_string(channels_) + "(, L)], got " +
                         shape_to_string(input));
  }
  return input;
}

namespace {

struct BnLayout {
  std::size_t batch, channels, len;
};

BnLayout bn_layout(const Shape& s) { return {s[0], s[1], s.size() == 3 ? s[2] : 1}; }

}  // namespace

template <typename T>
Tensor<T> BatchNorm1d<T>::infer(const Tensor<T>& x) const {
  output_shape(x.shape());
  const auto [n, c, l] = bn_layout(x.shape());
  Tensor<T> out(x.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double inv = 1.0 / std::sqrt(static_cast<double>(running_var_.data()[ch]) + eps_);
    const T scale = static_cast<T>(gamma_.data()[ch] * inv);
    const T shift = static_cast<T>(beta_.data()[ch] - running_mean_.data()[ch] * gamma_.data()[ch] * inv);
    for (std::size_t i = 0; i < n; ++i) {
      const T* src = x.data() + (i * c + ch) * l;
      T* dst = out.data() + (i * c + ch) * l;
      for (std::size_t t = 0; t < l; ++t) dst[t] = src[t] * scale + shift;
    }
  }
  return out;
}

template <typename T>
Tensor<T> BatchNorm1d<T>::forward(const Tensor<T>& x, Mode mode) {
  output_shape(x.shape());
  const auto [n, c, l] = bn_layout(x.shape());
  const std::size_t count = n * l;
  Tensor<T> xhat(x.shape());
  Tensor<T> out(x.shape());
  inv_std_.assign(c, T(0));

  for (std::size_t ch = 0; ch < c; ++ch) {
    double mean = 0.0;
    double var = 0.0;
    if (mode == Mode::train) {
      for (std::size_t i = 0; i < n; ++i) {
        const T* src = x.data() + (i * c + ch) * l;
        for (std::size_t t = 0; t < l; ++t) mean += src[t];
      }
      mean /= static_cast<double>(count);
      for (std::size_t i = 0; i < n; ++i) {
        const T* src = x.data() + (i * c + ch) * l;
        for (std::size_t t = 0; t < l; ++t) {
          const double d = src[t] - mean;
          var += d * d;
        }
      }
      var /= static_cast<double>(count);
      const double unbiased = count > 1 ? var * static_cast<double>(count) / static_cast<double>(count - 1) : var;
      running_mean_.data()[ch] = static_cast<T>((1.0 - momentum_) * running_mean_.data()[ch] + momentum_ * mean);
      running_var_.data()[ch] = static_cast<T>((1.0 - momentum_) * running_var_.data()[ch] + momentum_ * unbiased);
    } else {
      mean = running_mean_.data()[ch];
      var = running_var_.data()[ch];
    }
    const double inv = 1.0 / std::sqrt(var + eps_);
    inv_std_[ch] = static_cast<T>(inv);
    const T g = gamma_.data()[ch];
    const T b = beta_.data()[ch];
    for (std::size_t i = 0; i < n; ++i) {
      const T* src = x.data() + (i * c + ch) * l;
      T* xh = xhat.data() + (i * c + ch) * l;
      T* dst = out.data() + (i * c + ch) * l;
      for (std::size_t t = 0; t < l; ++t) {
        xh[t] = static_cast<T>((src[t] - mean) * inv);
        dst[t] = g * xh[t] + b;
      }
    }
  }
  xhat_ = std::move(xhat);
  cached_mode_ = mode;
  return out;
}

template <typename T>
Tensor<T> BatchNorm1d<T>::backward(const Tensor<T>& grad_output) {
  require_cache(xhat_, "BatchNorm1d");
  require_grad_shape(grad_output.shape(), xhat_->shape(), "BatchNorm1d");
  const auto [n, c, l] = bn_layout(xhat_->shape());
  const double count = static_cast<double>(n * l);
  Tensor<T> dx(xhat_->shape());

  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const T* dy = grad_output.data() + (i * c + ch) * l;
      const T* xh = xhat_->data() + (i * c + ch) * l;
      for (std::size_t t = 0; t < l; ++t) {
        sum_dy += dy[t];
        sum_dy_xhat += dy[t] * xh[t];
      }
    }
    grad_gamma_.data()[ch] += static_cast<T>(sum_dy_xhat);
    grad_beta_.data()[ch] += static_cast<T>(sum_dy);

    const double g = gamma_.data()[ch];
    const double inv = inv_std_[ch];
    for (std::size_t i = 0; i < n; ++i) {
      const T* dy = grad_output.data() + (i * c + ch) * l;
      const T* xh = xhat_->data() + (i * c + ch) * l;
      T* d = dx.data() + (i * c + ch) * l;
      if (cached_mode_ == Mode::train) {
        // dx = gamma * inv / M * (M dy - sum(dy) - xhat * sum(dy * xhat))
        for (std::size_t t = 0; t < l; ++t) {
          d[t] = static_cast<T>(g * inv * (dy[t] - sum_dy / count - xh[t] * sum_dy_xhat / count));
        }
      } else {
        for (std::size_t t = 0; t < l; ++t) d[t] = static_cast<T>(g * inv * dy[t]);
      }
    }
  }
  return dx;
}

template <typename T>
void BatchNorm1d<T>::initialize(Rng&) {
  gamma_.fill(T(1));
  beta_.fill(T(0));
  running_mean_.fill(T(0));
  running_var_.fill(T(1));
}

template <typename T>
void BatchNorm1d<T>::collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
  out.push_back({join_name(prefix, "gamma"), &gamma_, &grad_gamma_});
  out.push_back({join_name(prefix, "beta"), &beta_, &grad_beta_});
}

template <typename T>
void BatchNorm1d<T>::collect_buffers(const std::string& prefix, std::vector<BufferRef<T>>& out) {
  out.push_back({join_name(prefix, "running_mean"), &running_mean_});
  out.push_back({join_name(prefix, "running_var"), &running_var_});
}

// ---------------------------------------------------------------- Linear

template <typename T>
Linear<T>::Linear(std::size_t in_features, std::size_t out_features)
    : in_features_(in_features),
      out_features_(out_features),
      weight_(Shape{out_features, in_features}),
      bias_(Shape{out_features}),
      grad_weight_(Shape{out_features, in_features}),
      grad_bias_(Shape{out_features}) {}

template <typename T>
std::string Linear<T>::describe() const {
  return "Linear(" + std::to_string(in_features_) + "->" + std::to_string(out_features_) + ")";
}

template <typename T>
Shape Linear<T>::output_shape(const Shape& input) const {
  if (input.size() != 2 || input[1] != in_features_) {
    throw DimensionError("Linear: expected [N, " + std::to_string(in_features_) + "], got " + shape_to_string(input));
  }
  return {input[0], out_features_};
}

template <typename T>
Tensor<T> Linear<T>::infer(const Tensor<T>& x) const {
  const Shape out_shape = output_shape(x.shape());
  Tensor<T> out(out_shape);
  MapM<T> mo(out.data(), out_shape[0], out_features_);
  mo.noalias() = MapCM<T>(x.data(), out_shape[0], in_features_) *
                 MapCM<T>(weight_.data(), out_features_, in_features_).transpose();
  for (std::size_t i = 0; i < out_shape[0]; ++i)
    for (std::size_t j = 0; j < out_features_; ++j) mo(i, j) += bias_.data()[j];
  return out;
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x, Mode) {
  Tensor<T> out = infer(x);
  input_ = x;
  return out;
}

template <typename T>
Tensor<T> Linear<T>::backward(const Tensor<T>& grad_output) {
  require_cache(input_, "Linear");
  const std::size_t n = input_->dim(0);
  require_grad_shape(grad_output.shape(), Shape{n, out_features_}, "Linear");
  MapCM<T> mdy(grad_output.data(), n, out_features_);
  MapCM<T> mx(input_->data(), n, in_features_);
  MapM<T>(grad_weight_.data(), out_features_, in_features_).noalias() += mdy.transpose() * mx;
  for (std::size_t j = 0; j < out_features_; ++j) grad_bias_.data()[j] += mdy.col(j).sum();
  Tensor<T> dx(Shape{n, in_features_});
  MapM<T>(dx.data(), n, in_features_).noalias() = mdy * MapCM<T>(weight_.data(), out_features_, in_features_);
  return dx;
}

template <typename T>
void Linear<T>::initialize(Rng& rng) {
  fill_uniform(weight_, rng, std::sqrt(1.0 / static_cast<double>(in_features_)));
  bias_.fill(T(0));
}

template <typename T>
void Linear<T>::collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
  out.push_back({join_name(prefix, "weight"), &weight_, &grad_weight_});
  out.push_back({join_name(prefix, "bias"), &bias_, &grad_bias_});
}

// ------------------------------------------------------------------ ReLU

template <typename T>
Tensor<T> ReLU<T>::infer(const Tensor<T>& x) const {
  Tensor<T> out = x;
  for (auto& v : out.values()) v = v > T(0) ? v : T(0);
  return out;
}

template <typename T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& x, Mode) {
  Tensor<T> out = infer(x);
  output_ = out;
  return out;
}

template <typename T>
Tensor<T> ReLU<T>::backward(const Tensor<T>& grad_output) {
  require_cache(output_, "ReLU");
  require_grad_shape(grad_output.shape(), output_->shape(), "ReLU");
  Tensor<T> dx = grad_output;
  const T* y = output_->data();
  T* d = dx.data();
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (!(y[i] > T(0))) d[i] = T(0);
  }
  return dx;
}

// --------------------------------------------------------------- Flatten

template <typename T>
Shape Flatten<T>::output_shape(const Shape& input) const {
  if (input.empty()) throw DimensionError("Flatten: rank-0 input");
  return {input[0], shape_product(input) / input[0]};
}

template <typename T>
Tensor<T> Flatten<T>::infer(const Tensor<T>& x) const {
  return x.reshaped(output_shape(x.shape()));
}

template <typename T>
Tensor<T> Flatten<T>::forward(const Tensor<T>& x, Mode) {
  input_shape_ = x.shape();
  return infer(x);
}

template <typename T>
Tensor<T> Flatten<T>::backward(const Tensor<T>& grad_output) {
  require_cache(input_shape_, "Flatten");
  return grad_output.reshaped(*input_shape_);
}

// --------------------------------------------------------------- Reshape

template <typename T>
Reshape<T>::Reshape(Shape item_shape) : item_shape_(std::move(item_shape)) {}

template <typename T>
std::string Reshape<T>::describe() const {
  return "Reshape" + shape_to_string(item_shape_);
}

template <typename T>
Shape Reshape<T>::output_shape(const Shape& input) const {
  if (input.size() != 2 || input[1] != shape_product(item_shape_)) {
    throw DimensionError("Reshape: cannot map " + shape_to_string(input) + " to items of " +
                         shape_to_string(item_shape_));
  }
  Shape out{input[0]};
  out.insert(out.end(), item_shape_.begin(), item_shape_.end());
  return out;
}

template <typename T>
Tensor<T> Reshape<T>::infer(const Tensor<T>& x) const {
  return x.reshaped(output_shape(x.shape()));
}

template <typename T>
Tensor<T> Reshape<T>::forward(const Tensor<T>& x, Mode) {
  input_shape_ = x.shape();
  return infer(x);
}

template <typename T>
Tensor<T> Reshape<T>::backward(const Tensor<T>& grad_output) {
  require_cache(input_shape_, "Reshape");
  return grad_output.reshaped(*input_shape_);
}

template class Conv1d<float>;
template class Conv1d<double>;
template class Deconv1d<float>;
template class Deconv1d<double>;
template class BatchNorm1d<float>;
template class BatchNorm1d<double>;
template class Linear<float>;
template class Linear<double>;
template class ReLU<float>;
template class ReLU<double>;
template class Flatten<float>;
template class Flatten<double>;
template class Reshape<float>;
template class Reshape<double>;

}  // namespace pmn::nn
