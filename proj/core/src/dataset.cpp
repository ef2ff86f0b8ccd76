#include "pmn/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "pmn/errors.hpp"
#include "pmn/io.hpp"

namespace pmn {

std::size_t Dataset::bin_count() const {
  if (samples.empty()) return 0;
  const std::size_t bins = samples.front().bins.size();
  for (const auto& s : samples) {
    if (s.bins.size() != bins) throw DataError("dataset mixes sample lengths " + std::to_string(bins) + " and " + std::to_string(s.bins.size()));
  }
  return bins;
}

std::size_t Dataset::class_count() const {
  int top = -1;
  for (const auto& s : samples) top = std::max(top, s.label);
  return static_cast<std::size_t>(top + 1);
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(class_count(), 0);
  for (const auto& s : samples) {
    if (s.label < 0) throw DataError("negative label in dataset");
    ++counts[static_cast<std::size_t>(s.label)];
  }
  return counts;
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

template <typename T>
Tensor<T> Dataset::batch(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw UsageError("Dataset::batch: no indices");
  const std::size_t bins = bin_count();
  std::vector<T> data;
  data.reserve(indices.size() * bins);
  for (auto i : indices) {
    if (i >= samples.size()) throw DataError("Dataset::batch: index " + std::to_string(i) + " out of range");
    data.insert(data.end(), samples[i].bins.begin(), samples[i].bins.end());
  }
  return Tensor<T>({indices.size(), bins}, std::move(data));
}

template <typename T>
Tensor<T> Dataset::all() const {
  std::vector<std::size_t> idx(samples.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return batch<T>(idx);
}

template Tensor<float> Dataset::batch<float>(std::span<const std::size_t>) const;
template Tensor<double> Dataset::batch<double>(std::span<const std::size_t>) const;
template Tensor<float> Dataset::all<float>() const;
template Tensor<double> Dataset::all<double>() const;

std::vector<signal::FaultSpec> default_fault_specs() {
  const std::vector<double> base{0.4, 0.6, 0.15, 0.4, 0.1, 0.2, 0.05};
  const char* names[] = {"normal", "wear", "pitting", "crack"};
  const signal::SignalGeometry geometry;
  std::vector<signal::FaultSpec> specs;
  for (int k = 0; k < 4; ++k) {
    signal::FaultSpec s;
    s.class_id = k;
    s.name = names[k];
    s.mesh_hz = 750.0;
    s.harmonic_amplitudes = base;
    s.discriminative_harmonic = static_cast<std::size_t>(2 * k + 1);
    s.harmonic_amplitudes[s.discriminative_harmonic - 1] = 1.0;
    s.modulated_harmonic = 2;
    s.modulation_depth = 0.8;
    s.sideband_spacing_hz = 6.0 * (k + 1) * geometry.bin_hz();
    s.noise_std = 0.3;
    s.amplitude_jitter = 0.15;
    s.random_phase = true;
    specs.push_back(std::move(s));
  }
  return specs;
}

void GeneratorConfig::validate() const {
  if (classes.empty()) throw ConfigError("generator: no classes");
  if (per_class < 2) throw ConfigError("generator: per-class count must be at least 2, got " + std::to_string(per_class));
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) {
    throw ConfigError("generator: split ratio must lie in (0, 1), got " + std::to_string(split_ratio));
  }
  if (geometry.length < 2 || !std::has_single_bit(geometry.length)) {
    throw ConfigError("generator: signal length must be a power of two");
  }
  if (!(geometry.rate_hz > 0.0)) throw ConfigError("generator: sampling rate must be positive");
  augment.validate(geometry.bins());
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (classes[c].class_id != static_cast<int>(c)) {
      throw ConfigError("generator: class ids must be 0..K-1 in order (class '" + classes[c].name + "')");
    }
    classes[c].validate(geometry);
  }
}

std::size_t train_count(std::size_t per_class, double ratio) {
  const auto n = static_cast<std::size_t>(std::llround(static_cast<double>(per_class) * ratio));
  return std::clamp<std::size_t>(n, 1, per_class - 1);
}

std::vector<float> make_spectrum(const signal::FaultSpec& spec, const signal::SignalGeometry& geometry, Rng& rng) {
  const auto x = signal::generate_signal(spec, geometry, rng);
  const auto s = signal::normalize_01<double>(signal::to_spectrum(x));
  return {s.begin(), s.end()};
}

namespace {

// Stream ids for Rng::derive; disjoint ranges per purpose.
constexpr std::uint64_t kSignalStream = 1ULL << 40;
constexpr std::uint64_t kSplitStream = 2ULL << 40;
constexpr std::uint64_t kTrainAugStream = 3ULL << 40;
constexpr std::uint64_t kTestAugStream = 4ULL << 40;

void augment_all(Dataset& d, const signal::AugmentConfig& config, const Rng& root, std::uint64_t stream) {
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    Rng rng = root.derive(stream + i);
    signal::augment<float>(d.samples[i].bins, config, rng);
  }
}

}  // namespace

DatasetSplit build_dataset(const GeneratorConfig& config) {
  config.validate();
  const Rng root(config.seed);
  DatasetSplit split;
  const std::size_t n_train = train_count(config.per_class, config.split_ratio);
  for (std::size_t c = 0; c < config.classes.size(); ++c) {
    std::vector<SpectrumSample> generated;
    generated.reserve(config.per_class);
    for (std::size_t i = 0; i < config.per_class; ++i) {
      Rng rng = root.derive(kSignalStream + c * config.per_class + i);
      generated.push_back({make_spectrum(config.classes[c], config.geometry, rng), static_cast<int>(c), 0});
    }
    // Fisher-Yates; the first n_train of the permutation go to training.
    std::vector<std::size_t> order(config.per_class);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle = root.derive(kSplitStream + c);
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[shuffle.uniform_index(i + 1)]);
    }
    for (std::size_t i = 0; i < order.size(); ++i) {
      (i < n_train ? split.train : split.test).samples.push_back(std::move(generated[order[i]]));
    }
  }
  augment_all(split.train, config.augment, root, kTrainAugStream);
  augment_all(split.test, config.augment, root, kTestAugStream);
  return split;
}

void write_pmds(const std::filesystem::path& path, const Dataset& dataset) {
  const std::size_t bins = dataset.bin_count();
  io::ByteWriter w;
  w.bytes("PMDS", 4);
  w.u16(kPmdsVersion);
  w.u32(io::checked_u32(dataset.size(), "sample count"));
  w.u32(io::checked_u32(bins, "bin count"));
  for (const auto& s : dataset.samples) {
    if (s.label < 0 || s.label > 0xFFFF || s.domain < 0 || s.domain > 0xFFFF) {
      throw DataError("PMDS: label/domain outside u16 range");
    }
    w.u16(static_cast<std::uint16_t>(s.label));
    w.u16(static_cast<std::uint16_t>(s.domain));
    for (float v : s.bins) w.f32(v);
  }
  io::write_file(path, w.buffer());
}

Dataset read_pmds(const std::filesystem::path& path) {
  const auto buf = io::read_file(path);
  io::ByteReader r(buf, path.string());
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "PMDS", 4) != 0) throw DataError(path.string() + ": not a PMDS file");
  const auto version = r.u16();
  if (version != kPmdsVersion) {
    throw VersionError(path.string() + ": PMDS version " + std::to_string(version) + " unsupported (expected " +
                       std::to_string(kPmdsVersion) + ")");
  }
  const std::size_t count = r.u32();
  const std::size_t bins = r.u32();
  if (r.remaining() != count * (4 + 4 * bins)) {
    throw DataError(path.string() + ": payload size does not match header (" + std::to_string(count) + " x " +
                    std::to_string(bins) + ")");
  }
  Dataset d;
  d.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SpectrumSample s;
    s.label = r.u16();
    s.domain = r.u16();
    s.bins.resize(bins);
    for (auto& v : s.bins) v = r.f32();
    d.samples.push_back(std::move(s));
  }
  return d;
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const std::size_t bins = dataset.bin_count();
  out << "label,domain";
  for (std::size_t b = 0; b < bins; ++b) out << ",b" << b;
  out << '\n';
  for (const auto& s : dataset.samples) {
    out << s.label << ',' << s.domain;
    for (float v : s.bins) out << ',' << io::format_float(v);
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace pmn
