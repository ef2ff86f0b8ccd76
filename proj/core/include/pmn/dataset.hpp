#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pmn/signal.hpp"
#include "pmn/tensor.hpp"

namespace pmn {

struct SpectrumSample {
  std::vector<float> bins;
  int label = 0;
  int domain = 0;
};

struct Dataset {
  std::vector<SpectrumSample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  // Throws DataError when samples disagree on length.
  std::size_t bin_count() const;
  // max label + 1
  std::size_t class_count() const;
  std::vector<std::size_t> class_counts() const;
  std::vector<int> labels() const;

  /// Stacks the selected samples into an [indices.size(), bins] batch.
  template <typename T>
  Tensor<T> batch(std::span<const std::size_t> indices) const;
  template <typename T>
  Tensor<T> all() const;
};

struct DatasetSplit {
  Dataset train;
  Dataset test;
};

/// The default 4-class synthetic gearbox task: normal, wear-like,
/// pitting-like and crack-like templates sharing a 750 Hz mesh. Class k
/// boosts harmonic 2k+1 and modulates 2f with its own sideband spacing.
std::vector<signal::FaultSpec> default_fault_specs();

struct GeneratorConfig {
  std::vector<signal::FaultSpec> classes = default_fault_specs();
  std::size_t per_class = 200;
  double split_ratio = 0.7;
  signal::AugmentConfig augment{};
  signal::SignalGeometry geometry{};
  std::uint64_t seed = 0;

  void validate() const;
};

/// Number of training samples per class for a stratified split.
std::size_t train_count(std::size_t per_class, double ratio);

/// Generates, transforms (FFT magnitude, 0-1 normalization), splits each
/// class at random and augments both splits. Fully determined by the config.
DatasetSplit build_dataset(const GeneratorConfig& config);

/// Normalized spectrum of one freshly generated signal.
std::vector<float> make_spectrum(const signal::FaultSpec& spec, const signal::SignalGeometry& geometry, Rng& rng);

void write_pmds(const std::filesystem::path& path, const Dataset& dataset);
Dataset read_pmds(const std::filesystem::path& path);
void write_dataset_csv(const std::filesystem::path& path, const Dataset& dataset);

inline constexpr std::uint16_t kPmdsVersion = 1;

}  // namespace pmn
