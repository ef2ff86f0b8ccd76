#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "pmn/dataset.hpp"
#include "pmn/losses.hpp"
#include "pmn/model.hpp"
#include "pmn/nn/adam.hpp"

namespace pmn {

enum class Precision { f32, f64 };

const char* to_string(Precision precision);
Precision precision_from_string(std::string_view name);

/// Everything a run depends on. Serialized as JSON next to every checkpoint;
/// defaults are the standard training setup.
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t epochs = 50;
  std::size_t batch_size = 128;
  nn::AdamConfig adam{};
  LossWeights weights{};
  std::size_t prototypes = 0;  // 0: one per class
  Metric metric = Metric::sq_l2;
  Variant variant = Variant::pmn;
  std::size_t mlp_hidden = 32;
  Precision precision = Precision::f32;
  std::string train_path;  // PMDS files; empty means "generate in memory"
  std::string test_path;
  GeneratorConfig generator{};

  void validate() const;
  ModelConfig model_config(std::size_t classes) const;
};

std::string to_json(const RunConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Applies PMN_SEED (decimal u64) when set. Returns true if it was applied.
bool apply_env_overrides(RunConfig& config);

/// Seed of the model initialization stream for a run seed.
std::uint64_t model_seed(std::uint64_t run_seed);

}  // namespace pmn
