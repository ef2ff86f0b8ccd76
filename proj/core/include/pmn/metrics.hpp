#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pmn/dataset.hpp"
#include "pmn/model.hpp"

namespace pmn {

/// Share of exact matches. Throws UsageError on empty input.
double accuracy(std::span<const std::size_t> predictions, std::span<const int> labels);

/// counts[true][predicted], K x K.
std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const std::size_t> predictions,
                                                       std::span<const int> labels, std::size_t classes);

struct RpsResult {
  double d_intra = 0.0;
  double d_inter = 0.0;
  double value = 0.0;  // d_intra / d_inter
};

/// Intra/inter ratio with unsquared Euclidean norms:
///   d_intra = (1/n) sum_i |z_i - mean_{y_i}|
///   d_inter = 1/(K(K-1)) sum_{i != j} |mean_i - mean_j|
/// over the K distinct labels present. Throws DomainError for fewer than two
/// classes or coinciding class means.
template <typename T>
RpsResult r_rps(const Tensor<T>& features, std::span<const int> labels);

/// Eval-mode pass over a dataset in fixed-size batches.
template <typename T>
struct DatasetInference {
  Tensor<T> latent;  // [n, q]
  std::vector<std::size_t> predictions;
};

template <typename T>
DatasetInference<T> infer_dataset(const PmnModel<T>& model, const Dataset& data, std::size_t batch_size = 256);

struct EvalReport {
  std::string variant;
  std::size_t samples = 0;
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  std::vector<std::vector<std::size_t>> confusion;
  double r_rps = 0.0;
  double d_intra = 0.0;
  double d_inter = 0.0;
};

template <typename T>
EvalReport evaluate(const PmnModel<T>& model, const Dataset& data);

EvalReport make_report(std::span<const std::size_t> predictions, std::span<const int> labels, std::size_t classes,
                       const RpsResult& rps);

std::string to_json(const EvalReport& report);

/// CSV `label,domain,z0..` of encoder outputs followed by one row per
/// prototype (label -1, domain = prototype index).
template <typename T>
void export_features(const PmnModel<T>& model, const Dataset& data, const std::filesystem::path& path);

}  // namespace pmn
