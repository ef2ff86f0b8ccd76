#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "pmn/config.hpp"
#include "pmn/dataset.hpp"
#include "pmn/losses.hpp"
#include "pmn/model.hpp"
#include "pmn/nn/adam.hpp"

namespace pmn {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  LossBreakdown loss;     // sample-weighted mean over the epoch's minibatches
  double train_acc = 0.0;
  double test_acc = 0.0;
  double r_rps = 0.0;     // NaN when undefined (e.g. a single class present)
  double learning_rate = 0.0;
};

std::string log_header();
std::string log_row(const EpochRecord& record);

/// Loads the PMDS pair named in the config, or generates the synthetic task.
DatasetSplit load_or_generate(const RunConfig& config);

/// Minibatch Adam on the combined objective, one epoch at a time.
template <typename T>
class Trainer {
 public:
  Trainer(PmnModel<T>& model, RunConfig config);

  /// Shuffles, steps through all minibatches and evaluates. R_rps uses the
  /// test split when it is non-empty, the training split otherwise.
  EpochRecord run_epoch(const Dataset& train, const Dataset& test);

  nn::Adam<T>& optimizer() { return adam_; }
  std::size_t epochs_done() const { return epoch_; }

 private:
  PmnModel<T>& model_;
  RunConfig config_;
  nn::Adam<T> adam_;
  std::size_t epoch_ = 0;
};

struct TrainOptions {
  std::filesystem::path out_dir;  // log.csv, best.ckpt, final.ckpt; empty: no files
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_test_acc = 0.0;
};

/// Runs config.epochs epochs. With an output directory, final.ckpt is
/// rewritten after every epoch and best.ckpt whenever test accuracy improves,
/// so a NumericError abort leaves the last good state on disk.
template <typename T>
TrainResult train(PmnModel<T>& model, const DatasetSplit& data, const RunConfig& config, const TrainOptions& options = {});

}  // namespace pmn
