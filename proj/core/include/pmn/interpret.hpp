#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pmn/model.hpp"

namespace pmn {

/// Per-bin relevance for the predicted-class logit, aligned to the input.
struct AttributionMap {
  std::vector<double> scores;  // input_length entries in [0, 1]
  std::vector<double> coarse;  // ReLU'd map on the feature positions, before upsampling
  std::size_t target_class = 0;
  bool degenerate = false;     // all-zero map; scores left unnormalized (zeros)
};

struct Explanation {
  std::size_t sample_id = 0;
  std::vector<double> distances;  // one per prototype
  std::vector<double> probabilities;
  std::size_t matched_prototype = 0;
  std::size_t matched_class = 0;  // matched_prototype mod K
  std::size_t predicted_class = 0;
  std::vector<double> decoded_prototype;
  std::optional<AttributionMap> attribution;
};

/// Distance readout and decoded matched prototype for one spectrum. Requires
/// the prototype variant.
template <typename T>
Explanation explain_match(const PmnModel<T>& model, std::span<const T> sample, std::size_t sample_id = 0);

/// g(p_j) for every prototype, [m, input_length].
template <typename T>
Tensor<T> decode_prototypes(const PmnModel<T>& model);

/// Linear interpolation from `coarse` cell centers (i + 0.5) * out / in onto
/// `out_length` bins sampled at their own centers. Positions beyond the first
/// and last cell centers blend towards zero, so each cell peaks at its center.
std::vector<double> upsample_linear(std::span<const double> coarse, std::size_t out_length);

/// 1-D Grad-CAM on the last encoder conv stage. `gradient_scale` multiplies
/// the target gradient; the normalized map does not depend on it.
template <typename T>
AttributionMap grad_cam(PmnModel<T>& model, std::span<const T> sample, T gradient_scale = T(1));

/// Indices of the `k` largest scores, highest first (lowest index on ties).
std::vector<std::size_t> top_bins(std::span<const double> scores, std::size_t k);

std::string to_json(const Explanation& explanation, double bin_hz);
/// Columns bin,hz,score; hz = bin * bin_hz.
std::string attribution_csv(const AttributionMap& map, double bin_hz);
/// One row per prototype: prototype,class,b0..
std::string prototypes_csv(const Tensor<double>& decoded, std::size_t classes);

}  // namespace pmn
