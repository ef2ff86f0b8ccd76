#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "pmn/config.hpp"
#include "pmn/model.hpp"
#include "pmn/nn/adam.hpp"

namespace pmn {

inline constexpr std::uint16_t kCheckpointVersion = 1;

/// Header block of a checkpoint: the run config plus training progress.
struct CheckpointHeader {
  RunConfig config;
  std::size_t classes = 0;
  std::size_t epoch = 0;
  std::uint64_t adam_steps = 0;
};

/// Binary layout: "PMN1", u16 version, u32 length + JSON header, then tensors
/// to end of file, each as u16 name length + name, u16 rank, u32 dims and
/// little-endian f32 values. Adam moments, when given, are stored as
/// "adam.m.<param>" / "adam.v.<param>".
template <typename T>
void save_checkpoint(const std::filesystem::path& path, PmnModel<T>& model, const RunConfig& config,
                     std::size_t epoch, const nn::Adam<T>* adam = nullptr);

struct CheckpointFile {
  CheckpointHeader header;
  std::map<std::string, Tensor<float>> tensors;
};

CheckpointFile read_checkpoint(const std::filesystem::path& path);

template <typename T>
struct LoadedModel {
  CheckpointHeader header;
  PmnModel<T> model;
};

/// Rebuilds the model described by the header and fills every parameter and
/// buffer. Throws VersionError when the tensors do not match the config.
template <typename T>
LoadedModel<T> load_checkpoint(const std::filesystem::path& path);

template <typename T>
LoadedModel<T> model_from_checkpoint(const CheckpointFile& file, const std::string& origin);

/// Copies stored Adam moments and the step count into `adam`.
template <typename T>
void restore_adam(const CheckpointFile& file, nn::Adam<T>& adam);

}  // namespace pmn
