#include "pmn/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "pmn/io.hpp"

namespace pmn {

template <typename T>
Explanation explain_match(const PmnModel<T>& model, std::span<const T> sample, std::size_t sample_id) {
  if (!model.has_prototypes()) throw UsageError("explain_match: model has no prototypes");
  const Tensor<T> x({1, sample.size()}, std::vector<T>(sample.begin(), sample.end()));
  const auto c = model.classify(x);
  Explanation e;
  e.sample_id = sample_id;
  e.distances.assign(c.distances.storage().begin(), c.distances.storage().end());
  e.probabilities.assign(c.probabilities.storage().begin(), c.probabilities.storage().end());
  e.matched_prototype = argmin(e.distances);
  e.matched_class = prototype_class(e.matched_prototype, model.classes());
  e.predicted_class = c.predictions.front();
  const auto& protos = model.prototype_head().prototypes();
  const auto row = protos.row(e.matched_prototype);
  const Tensor<T> p({1, row.size()}, std::vector<T>(row.begin(), row.end()));
  const auto decoded = model.decode(p);
  e.decoded_prototype.assign(decoded.storage().begin(), decoded.storage().end());
  for (double v : e.decoded_prototype) {
    if (!std::isfinite(v)) throw NumericError("explain_match: decoded prototype is not finite");
  }
  return e;
}

template <typename T>
Tensor<T> decode_prototypes(const PmnModel<T>& model) {
  if (!model.has_prototypes()) throw UsageError("decode_prototypes: model has no prototypes");
  return model.decode(model.prototype_head().prototypes());
}

std::vector<double> upsample_linear(std::span<const double> coarse, std::size_t out_length) {
  if (coarse.empty() || out_length == 0) throw DimensionError("upsample_linear: empty input or output");
  const auto n = static_cast<std::ptrdiff_t>(coarse.size());
  const double ratio = static_cast<double>(n) / static_cast<double>(out_length);
  auto value = [&](std::ptrdiff_t i) { return i >= 0 && i < n ? coarse[static_cast<std::size_t>(i)] : 0.0; };
  std::vector<double> out(out_length);
  for (std::size_t i = 0; i < out_length; ++i) {
    const double src = (static_cast<double>(i) + 0.5) * ratio - 0.5;
    const double lo = std::floor(src);
    const double frac = src - lo;
    const auto k = static_cast<std::ptrdiff_t>(lo);
    out[i] = value(k) * (1.0 - frac) + value(k + 1) * frac;
  }
  return out;
}

template <typename T>
AttributionMap grad_cam(PmnModel<T>& model, std::span<const T> sample, T gradient_scale) {
  const Tensor<T> x({1, sample.size()}, std::vector<T>(sample.begin(), sample.end()));
  const Tensor<T> maps = model.feature_maps(x);  // [1, C, L]
  const auto logits = model.logits_from_feature_maps(maps);
  AttributionMap out;
  out.target_class = argmax(logits.values());
  const Tensor<T> grad = model.feature_map_gradient(maps, out.target_class, gradient_scale);

  const std::size_t channels = maps.dim(1), length = maps.dim(2);
  const auto a = maps.values();
  const auto g = grad.values();
  out.coarse.assign(length, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    double w = 0.0;
    for (std::size_t t = 0; t < length; ++t) w += g[c * length + t];
    w /= static_cast<double>(length);
    for (std::size_t t = 0; t < length; ++t) out.coarse[t] += w * a[c * length + t];
  }
  for (auto& v : out.coarse) v = std::max(v, 0.0);

  const double peak = *std::max_element(out.coarse.begin(), out.coarse.end());
  if (!(peak > 0.0)) {
    out.degenerate = true;
    out.scores.assign(sample.size(), 0.0);
    return out;
  }
  out.scores = upsample_linear(out.coarse, sample.size());
  const double top = *std::max_element(out.scores.begin(), out.scores.end());
  for (auto& v : out.scores) v /= top;
  return out;
}

std::vector<std::size_t> top_bins(std::span<const double> scores, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
  });
  idx.resize(k);
  return idx;
}

std::string to_json(const Explanation& e, double bin_hz) {
  nlohmann::ordered_json j;
  j["sample"] = e.sample_id;
  j["predicted_class"] = e.predicted_class;
  j["matched_prototype"] = e.matched_prototype;
  j["matched_class"] = e.matched_class;
  j["distances"] = e.distances;
  j["probabilities"] = e.probabilities;
  j["decoded_prototype"] = e.decoded_prototype;
  if (e.attribution) {
    j["attribution"] = {{"target_class", e.attribution->target_class},
                        {"degenerate", e.attribution->degenerate},
                        {"bin_hz", bin_hz},
                        {"coarse", e.attribution->coarse},
                        {"scores", e.attribution->scores}};
  }
  return j.dump(2) + "\n";
}

std::string attribution_csv(const AttributionMap& map, double bin_hz) {
  std::ostringstream os;
  os << "bin,hz,score\n";
  for (std::size_t b = 0; b < map.scores.size(); ++b) {
    os << b << ',' << io::format_float(static_cast<double>(b) * bin_hz) << ',' << io::format_float(map.scores[b]) << '\n';
  }
  return os.str();
}

std::string prototypes_csv(const Tensor<double>& decoded, std::size_t classes) {
  std::ostringstream os;
  os << "prototype,class";
  for (std::size_t b = 0; b < decoded.dim(1); ++b) os << ",b" << b;
  os << '\n';
  for (std::size_t j = 0; j < decoded.dim(0); ++j) {
    os << j << ',' << prototype_class(j, classes);
    for (double v : decoded.row(j)) os << ',' << io::format_float(v);
    os << '\n';
  }
  return os.str();
}

#define PMN_INSTANTIATE(T)                                                                       \
  template Explanation explain_match<T>(const PmnModel<T>&, std::span<const T>, std::size_t); \
  template Tensor<T> decode_prototypes<T>(const PmnModel<T>&);                                 \
  template AttributionMap grad_cam<T>(PmnModel<T>&, std::span<const T>, T);

PMN_INSTANTIATE(float)
PMN_INSTANTIATE(double)

}  // namespace pmn
