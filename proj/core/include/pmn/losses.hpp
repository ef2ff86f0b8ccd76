#pragma once

#include <span>
#include <vector>

#include "pmn/model.hpp"

namespace pmn {

/// Weights of the combined objective
///   cla + recon * L_recon + r1 * R1 + r2 * R2 + r3 * R3.
/// Defaults are the grid-searched (1, 0.25, 0.25, 0.01).
struct LossWeights {
  double recon = 1.0;
  double r1 = 0.25;
  double r2 = 0.25;
  double r3 = 0.01;

  void validate() const;
};

struct LossBreakdown {
  double cla = 0.0;
  double recon = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
  double r3 = 0.0;
  double total = 0.0;

  double weighted_sum(const LossWeights& w) const { return cla + w.recon * recon + w.r1 * r1 + w.r2 * r2 + w.r3 * r3; }
};

// Lower clamp on the probability inside log().
inline constexpr double kLogClamp = 1e-12;

/// -(1/n) sum_i log(max(p_i[y_i], 1e-12)).
template <typename T>
double cross_entropy(const Tensor<T>& probabilities, std::span<const int> labels);

/// (1/n) sum_i |x_i - xhat_i|^2: summed over bins, averaged over samples.
template <typename T>
double reconstruction_mse(const Tensor<T>& x, const Tensor<T>& reconstruction);

/// Value and gradients of one min-distance regularizer. Each min routes its
/// gradient to a single (lowest-index) winner.
template <typename T>
struct RegularizerTerm {
  double value = 0.0;
  Tensor<T> d_features;    // empty for R3
  Tensor<T> d_prototypes;
};

// R1 = (1/n) sum_i min_j d(z_i, p_j)
template <typename T>
RegularizerTerm<T> r1_term(const Tensor<T>& features, const Tensor<T>& prototypes, Metric metric);

// R2 = (1/m) sum_j min_i d(z_i, p_j), over the current minibatch
template <typename T>
RegularizerTerm<T> r2_term(const Tensor<T>& features, const Tensor<T>& prototypes, Metric metric);

// R3 = -(1/m) sum_i min_{j != i} d(p_i, p_j)
template <typename T>
RegularizerTerm<T> r3_term(const Tensor<T>& prototypes, Metric metric);

template <typename T>
double r1_feature_to_prototype(const Tensor<T>& features, const Tensor<T>& prototypes, Metric metric) {
  return r1_term(features, prototypes, metric).value;
}

template <typename T>
double r2_prototype_to_feature(const Tensor<T>& features, const Tensor<T>& prototypes, Metric metric) {
  return r2_term(features, prototypes, metric).value;
}

template <typename T>
double r3_prototype_separation(const Tensor<T>& prototypes, Metric metric) {
  return r3_term(prototypes, metric).value;
}

/// One training-mode pass over a minibatch: evaluates every term and, when
/// `compute_gradients` is set, zeroes and then fills all parameter gradients
/// (prototypes and fc weight included). Throws NumericError naming the first
/// non-finite term.
template <typename T>
LossBreakdown total_loss(PmnModel<T>& model, const Tensor<T>& x, std::span<const int> labels,
                         const LossWeights& weights, bool compute_gradients = true,
                         nn::Mode mode = nn::Mode::train, std::vector<std::size_t>* predictions = nullptr);

}  // namespace pmn
