#include "pmn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pmn {

void LossWeights::validate() const {
  for (double w : {recon, r1, r2, r3}) {
    if (!std::isfinite(w) || w < 0.0) throw ConfigError("LossWeights: weights must be finite and non-negative");
  }
}

namespace {

template <typename T>
void check_labels(std::span<const int> labels, std::size_t rows, std::size_t classes) {
  if (labels.size() != rows) {
    throw DimensionError("loss: " + std::to_string(labels.size()) + " labels for " + std::to_string(rows) + " rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw DataError("loss: label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
}

template <typename T>
void check_pair_inputs(const Tensor<T>& features, const Tensor<T>& prototypes, const char* who) {
  if (features.empty()) throw UsageError(std::string(who) + ": empty feature batch");
  if (prototypes.empty()) throw UsageError(std::string(who) + ": empty prototype set");
  if (features.rank() != 2 || prototypes.rank() != 2 || features.dim(1) != prototypes.dim(1)) {
    throw DimensionError(std::string(who) + ": features " + shape_to_string(features.shape()) + " vs prototypes " +
                         shape_to_string(prototypes.shape()));
  }
}

}  // namespace

template <typename T>
double cross_entropy(const Tensor<T>& probabilities, std::span<const int> labels) {
  if (probabilities.rank() != 2) throw DimensionError("cross_entropy: expected [N, K] probabilities");
  const std::size_t n = probabilities.dim(0);
  check_labels<T>(labels, n, probabilities.dim(1));
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = probabilities.at({i, static_cast<std::size_t>(labels[i])});
    acc -= std::log(std::max(p, kLogClamp));
  }
  return acc / static_cast<double>(n);
}

template <typename T>
double reconstruction_mse(const Tensor<T>& x, const Tensor<T>& reconstruction) {
  if (x.shape() != reconstruction.shape() || x.rank() != 2) {
    throw DimensionError("reconstruction_mse: " + shape_to_string(x.shape()) + " vs " +
                         shape_to_string(reconstruction.shape()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x.data()[i]) - reconstruction.data()[i];
    acc += d * d;
  }
  return acc / static_cast<double>(x.dim(0));
}

template <typename T>
RegularizerTerm<T> r1_term(const Tensor<T>& features, const Tensor<T>& prototypes, Metric metric) {
  check_pair_inputs(features, prototypes, "R1");
  const Tensor<T> d = pm_layer(features, prototypes, metric);
  const std::size_t n = d.dim(0);
  RegularizerTerm<T> out{0.0, Tensor<T>(features.shape()), Tensor<T>(prototypes.shape())};
  const T weight = T(1) / static_cast<T>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = argmin(d.row(i));
    out.value += d.at({i, j});
    distance_backward<T>(features.row(i), prototypes.row(j), metric, weight, out.d_features.row(i),
                         out.d_prototypes.row(j));
  }
  out.value /= static_cast<double>(n);
  return out;
}

template <typename T>
RegularizerTerm<T> r2_term(const Tensor<T>& features, const Tensor<T>& prototypes, Metric metric) {
  check_pair_inputs(features, prototypes, "R2");
  const Tensor<T> d = pm_layer(features, prototypes, metric);
  const std::size_t n = d.dim(0), m = d.dim(1);
  RegularizerTerm<T> out{0.0, Tensor<T>(features.shape()), Tensor<T>(prototypes.shape())};
  const T weight = T(1) / static_cast<T>(m);
  for (std::size_t j = 0; j < m; ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (d.at({i, j}) < d.at({best, j})) best = i;
    }
    out.value += d.at({best, j});
    distance_backward<T>(features.row(best), prototypes.row(j), metric, weight, out.d_features.row(best),
                         out.d_prototypes.row(j));
  }
  out.value /= static_cast<double>(m);
  return out;
}

template <typename T>
RegularizerTerm<T> r3_term(const Tensor<T>& prototypes, Metric metric) {
  if (prototypes.rank() != 2) throw DimensionError("R3: expected [m, q] prototypes");
  const std::size_t m = prototypes.dim(0);
  if (m < 2) throw ConfigError("R3: needs at least two prototypes");
  RegularizerTerm<T> out{0.0, Tensor<T>(), Tensor<T>(prototypes.shape())};
  const T weight = T(-1) / static_cast<T>(m);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t best = i == 0 ? 1 : 0;
    T best_d = distance<T>(prototypes.row(i), prototypes.row(best), metric);
    for (std::size_t j = best + 1; j < m; ++j) {
      if (j == i) continue;
      const T d = distance<T>(prototypes.row(i), prototypes.row(j), metric);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    out.value -= best_d;
    distance_backward<T>(prototypes.row(i), prototypes.row(best), metric, weight, out.d_prototypes.row(i),
                         out.d_prototypes.row(best));
  }
  out.value /= static_cast<double>(m);
  return out;
}

template <typename T>
LossBreakdown total_loss(PmnModel<T>& model, const Tensor<T>& x, std::span<const int> labels,
                         const LossWeights& weights, bool compute_gradients, nn::Mode mode,
                         std::vector<std::size_t>* predictions) {
  weights.validate();
  if (x.rank() != 2 || x.dim(0) == 0) throw UsageError("total_loss: empty batch");
  const std::size_t n = x.dim(0);
  check_labels<T>(labels, n, model.classes());

  ForwardPass<T> pass = model.forward(x, mode);
  const Tensor<T> probs = softmax_rows(pass.logits);
  if (predictions) {
    predictions->clear();
    for (std::size_t i = 0; i < n; ++i) predictions->push_back(argmax(probs.row(i)));
  }

  LossBreakdown b;
  b.cla = cross_entropy(probs, labels);
  b.recon = reconstruction_mse(x, pass.reconstruction);

  std::optional<RegularizerTerm<T>> r1, r2, r3;
  if (model.has_prototypes()) {
    const Tensor<T>& p = model.prototype_head().prototypes();
    const Metric metric = model.prototype_head().metric();
    r1 = r1_term(pass.latent, p, metric);
    r2 = r2_term(pass.latent, p, metric);
    if (p.dim(0) >= 2) r3 = r3_term(p, metric);
    b.r1 = r1->value;
    b.r2 = r2->value;
    b.r3 = r3 ? r3->value : 0.0;
  }
  b.total = b.weighted_sum(weights);

  const std::pair<const char*, double> terms[] = {
      {"cla", b.cla}, {"recon", b.recon}, {"r1", b.r1}, {"r2", b.r2}, {"r3", b.r3}, {"total", b.total}};
  for (const auto& [name, value] : terms) {
    if (!std::isfinite(value)) throw NumericError(std::string("total_loss: non-finite loss term '") + name + "'");
  }
  if (!compute_gradients) return b;

  model.zero_grad();
  BackwardSeeds<T> seeds;
  seeds.d_logits = probs;
  const T inv_n = T(1) / static_cast<T>(n);
  for (std::size_t i = 0; i < n; ++i) {
    seeds.d_logits.at({i, static_cast<std::size_t>(labels[i])}) -= T(1);
  }
  seeds.d_logits *= inv_n;

  if (weights.recon > 0.0) {
    Tensor<T> d_rec(x.shape());
    const T scale = static_cast<T>(2.0 * weights.recon) * inv_n;
    for (std::size_t i = 0; i < x.size(); ++i) d_rec.data()[i] = scale * (pass.reconstruction.data()[i] - x.data()[i]);
    seeds.d_reconstruction = std::move(d_rec);
  }
  if (r1) {
    Tensor<T> dz(pass.latent.shape());
    Tensor<T> dp(model.prototype_head().prototypes().shape());
    auto add = [](Tensor<T>& acc, const Tensor<T>& g, double w) {
      for (std::size_t i = 0; i < acc.size(); ++i) acc.data()[i] += static_cast<T>(w) * g.data()[i];
    };
    add(dz, r1->d_features, weights.r1);
    add(dp, r1->d_prototypes, weights.r1);
    add(dz, r2->d_features, weights.r2);
    add(dp, r2->d_prototypes, weights.r2);
    if (r3) add(dp, r3->d_prototypes, weights.r3);
    seeds.d_latent = std::move(dz);
    seeds.d_prototypes = std::move(dp);
  }
  model.backward(seeds);
  return b;
}

#define PMN_INSTANTIATE(T)                                                                                      \
  template double cross_entropy<T>(const Tensor<T>&, std::span<const int>);                                     \
  template double reconstruction_mse<T>(const Tensor<T>&, const Tensor<T>&);                                    \
  template RegularizerTerm<T> r1_term<T>(const Tensor<T>&, const Tensor<T>&, Metric);                           \
  template RegularizerTerm<T> r2_term<T>(const Tensor<T>&, const Tensor<T>&, Metric);                           \
  template RegularizerTerm<T> r3_term<T>(const Tensor<T>&, Metric);                                             \
  template LossBreakdown total_loss<T>(PmnModel<T>&, const Tensor<T>&, std::span<const int>, const LossWeights&, \
                                       bool, nn::Mode, std::vector<std::size_t>*);

PMN_INSTANTIATE(float)
PMN_INSTANTIATE(double)

#undef PMN_INSTANTIATE

}  // namespace pmn
