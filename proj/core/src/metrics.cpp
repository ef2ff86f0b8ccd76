#include "pmn/metrics.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "pmn/io.hpp"

namespace pmn {

namespace {

void check_lengths(std::span<const std::size_t> predictions, std::span<const int> labels) {
  if (predictions.empty() || labels.empty()) throw UsageError("metrics: empty prediction or label list");
  if (predictions.size() != labels.size()) {
    throw DimensionError("metrics: " + std::to_string(predictions.size()) + " predictions vs " +
                         std::to_string(labels.size()) + " labels");
  }
}

}  // namespace

double accuracy(std::span<const std::size_t> predictions, std::span<const int> labels) {
  check_lengths(predictions, labels);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0 && predictions[i] == static_cast<std::size_t>(labels[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const std::size_t> predictions,
                                                       std::span<const int> labels, std::size_t classes) {
  check_lengths(predictions, labels);
  std::vector<std::vector<std::size_t>> m(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes || predictions[i] >= classes) {
      throw DataError("confusion_matrix: label or prediction outside [0, " + std::to_string(classes) + ")");
    }
    ++m[static_cast<std::size_t>(labels[i])][predictions[i]];
  }
  return m;
}

template <typename T>
RpsResult r_rps(const Tensor<T>& features, std::span<const int> labels) {
  if (features.rank() != 2) throw DimensionError("r_rps: features must be [n, q], got " + shape_to_string(features.shape()));
  const std::size_t n = features.dim(0), q = features.dim(1);
  if (labels.size() != n) throw DimensionError("r_rps: " + std::to_string(n) + " features vs " + std::to_string(labels.size()) + " labels");

  std::map<int, std::pair<std::vector<double>, std::size_t>> sums;
  for (std::size_t i = 0; i < n; ++i) {
    auto& [sum, count] = sums[labels[i]];
    if (sum.empty()) sum.assign(q, 0.0);
    const auto row = features.row(i);
    for (std::size_t k = 0; k < q; ++k) sum[k] += row[k];
    ++count;
  }
  if (sums.size() < 2) throw DomainError("r_rps: needs at least two classes, got " + std::to_string(sums.size()));
  std::map<int, std::vector<double>> means;
  for (auto& [label, entry] : sums) {
    auto& [sum, count] = entry;
    for (auto& v : sum) v /= static_cast<double>(count);
    means[label] = sum;
  }

  auto norm_diff = [q](auto a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < q; ++k) {
      const double d = static_cast<double>(a[k]) - b[k];
      s += d * d;
    }
    return std::sqrt(s);
  };

  RpsResult r;
  for (std::size_t i = 0; i < n; ++i) r.d_intra += norm_diff(features.row(i), means.at(labels[i]));
  r.d_intra /= static_cast<double>(n);

  const double k = static_cast<double>(means.size());
  for (const auto& [li, mi] : means) {
    for (const auto& [lj, mj] : means) {
      if (li == lj) continue;
      const double d = norm_diff(mi, mj);
      if (d == 0.0) {
        throw DomainError("r_rps: classes " + std::to_string(li) + " and " + std::to_string(lj) + " share the same mean");
      }
      r.d_inter += d;
    }
  }
  r.d_inter /= k * (k - 1.0);
  r.value = r.d_intra / r.d_inter;
  return r;
}

template <typename T>
DatasetInference<T> infer_dataset(const PmnModel<T>& model, const Dataset& data, std::size_t batch_size) {
  if (data.empty()) throw UsageError("infer_dataset: empty dataset");
  if (batch_size == 0) throw UsageError("infer_dataset: zero batch size");
  DatasetInference<T> out;
  std::vector<T> latent;
  latent.reserve(data.size() * model.latent_dim());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) idx.push_back(i);
    const auto c = model.classify(data.batch<T>(idx));
    latent.insert(latent.end(), c.latent.storage().begin(), c.latent.storage().end());
    out.predictions.insert(out.predictions.end(), c.predictions.begin(), c.predictions.end());
  }
  out.latent = Tensor<T>({data.size(), model.latent_dim()}, std::move(latent));
  return out;
}

EvalReport make_report(std::span<const std::size_t> predictions, std::span<const int> labels, std::size_t classes,
                       const RpsResult& rps) {
  EvalReport r;
  r.samples = labels.size();
  r.accuracy = accuracy(predictions, labels);
  r.confusion = confusion_matrix(predictions, labels, classes);
  for (const auto& row : r.confusion) {
    std::size_t total = 0;
    for (auto c : row) total += c;
    const std::size_t k = r.per_class_accuracy.size();
    r.per_class_accuracy.push_back(total == 0 ? 0.0 : static_cast<double>(row[k]) / static_cast<double>(total));
  }
  r.r_rps = rps.value;
  r.d_intra = rps.d_intra;
  r.d_inter = rps.d_inter;
  return r;
}

template <typename T>
EvalReport evaluate(const PmnModel<T>& model, const Dataset& data) {
  const auto inference = infer_dataset(model, data);
  const auto labels = data.labels();
  auto report = make_report(inference.predictions, labels, model.classes(), r_rps(inference.latent, labels));
  report.variant = to_string(model.config().variant);
  return report;
}

std::string to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["variant"] = report.variant;
  j["samples"] = report.samples;
  j["accuracy"] = report.accuracy;
  j["per_class_accuracy"] = report.per_class_accuracy;
  j["confusion"] = report.confusion;
  j["r_rps"] = report.r_rps;
  j["d_intra"] = report.d_intra;
  j["d_inter"] = report.d_inter;
  return j.dump(2) + "\n";
}

template <typename T>
void export_features(const PmnModel<T>& model, const Dataset& data, const std::filesystem::path& path) {
  const auto inference = infer_dataset(model, data);
  const std::size_t q = model.latent_dim();
  std::ostringstream os;
  os << "label,domain";
  for (std::size_t k = 0; k < q; ++k) os << ",z" << k;
  os << '\n';
  auto write_row = [&](int label, int domain, std::span<const T> z) {
    os << label << ',' << domain;
    for (auto v : z) os << ',' << io::format_float(v);
    os << '\n';
  };
  for (std::size_t i = 0; i < data.size(); ++i) {
    write_row(data.samples[i].label, data.samples[i].domain, inference.latent.row(i));
  }
  if (model.has_prototypes()) {
    const auto& p = model.prototype_head().prototypes();
    for (std::size_t j = 0; j < p.dim(0); ++j) write_row(-1, static_cast<int>(j), p.row(j));
  }
  io::write_text(path, os.str());
}

#define PMN_INSTANTIATE(T)                                                                         \
  template RpsResult r_rps<T>(const Tensor<T>&, std::span<const int>);                              \
  template DatasetInference<T> infer_dataset<T>(const PmnModel<T>&, const Dataset&, std::size_t); \
  template EvalReport evaluate<T>(const PmnModel<T>&, const Dataset&);                              \
  template void export_features<T>(const PmnModel<T>&, const Dataset&, const std::filesystem::path&);

PMN_INSTANTIATE(float)
PMN_INSTANTIATE(double)

}  // namespace pmn
