#include "pmn/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "pmn/checkpoint.hpp"
#include "pmn/io.hpp"
#include "pmn/metrics.hpp"

namespace pmn {

namespace {

constexpr std::uint64_t kShuffleStream = 0x73687566ULL;

}  // namespace

std::string log_header() { return "epoch,cla,recon,r1,r2,r3,total,train_acc,test_acc,r_rps\n"; }

std::string log_row(const EpochRecord& r) {
  std::ostringstream os;
  os << r.epoch;
  for (double v : {r.loss.cla, r.loss.recon, r.loss.r1, r.loss.r2, r.loss.r3, r.loss.total, r.train_acc, r.test_acc, r.r_rps}) {
    os << ',' << io::format_float(v);
  }
  os << '\n';
  return os.str();
}

DatasetSplit load_or_generate(const RunConfig& config) {
  if (config.train_path.empty()) return build_dataset(config.generator);
  return {read_pmds(config.train_path), read_pmds(config.test_path)};
}

template <typename T>
Trainer<T>::Trainer(PmnModel<T>& model, RunConfig config)
    : model_(model), config_(std::move(config)), adam_(config_.adam, model.params()) {
  config_.validate();
}

template <typename T>
EpochRecord Trainer<T>::run_epoch(const Dataset& train, const Dataset& test) {
  if (train.size() < 2) throw UsageError("Trainer: training set needs at least two samples");
  if (train.bin_count() != model_.input_length()) {
    throw DimensionError("Trainer: samples have " + std::to_string(train.bin_count()) + " bins, model expects " +
                         std::to_string(model_.input_length()));
  }
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng(config_.seed).derive(kShuffleStream + epoch_);
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_index(i + 1)]);

  const auto labels_all = train.labels();
  EpochRecord rec;
  rec.epoch = epoch_ + 1;
  rec.learning_rate = adam_.learning_rate_at(epoch_);
  const std::size_t bs = config_.batch_size;
  std::vector<int> labels;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = std::min(order.size(), start + bs);
    // A trailing single sample joins the previous batch; batch norm needs two.
    if (order.size() - end == 1) end = order.size();
    const std::span<const std::size_t> idx(order.data() + start, end - start);
    labels.clear();
    for (auto i : idx) labels.push_back(labels_all[i]);
    const auto loss = total_loss(model_, train.batch<T>(idx), labels, config_.weights, true, nn::Mode::train);
    adam_.step(epoch_);
    const double w = static_cast<double>(idx.size());
    rec.loss.cla += w * loss.cla;
    rec.loss.recon += w * loss.recon;
    rec.loss.r1 += w * loss.r1;
    rec.loss.r2 += w * loss.r2;
    rec.loss.r3 += w * loss.r3;
    rec.loss.total += w * loss.total;
    start = end;
  }
  const double n = static_cast<double>(order.size());
  for (double* v : {&rec.loss.cla, &rec.loss.recon, &rec.loss.r1, &rec.loss.r2, &rec.loss.r3, &rec.loss.total}) *v /= n;
  model_.clear_cache();
  ++epoch_;

  const auto train_inf = infer_dataset(model_, train);
  rec.train_acc = accuracy(train_inf.predictions, labels_all);
  rec.test_acc = std::numeric_limits<double>::quiet_NaN();
  const Dataset& rps_set = test.empty() ? train : test;
  DatasetInference<T> rps_inf = test.empty() ? train_inf : infer_dataset(model_, test);
  const auto rps_labels = rps_set.labels();
  if (!test.empty()) rec.test_acc = accuracy(rps_inf.predictions, rps_labels);
  try {
    rec.r_rps = r_rps(rps_inf.latent, rps_labels).value;
  } catch (const DomainError&) {
    rec.r_rps = std::numeric_limits<double>::quiet_NaN();
  }
  return rec;
}

template <typename T>
TrainResult train(PmnModel<T>& model, const DatasetSplit& data, const RunConfig& config, const TrainOptions& options) {
  Trainer<T> trainer(model, config);
  TrainResult result;
  std::ofstream log;
  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    log.open(options.out_dir / "log.csv", std::ios::trunc);
    if (!log) throw IoError("cannot open " + (options.out_dir / "log.csv").string());
    log << log_header() << std::flush;
  }
  double best = -1.0;
  for (std::size_t e = 0; e < config.epochs; ++e) {
    EpochRecord rec;
    try {
      rec = trainer.run_epoch(data.train, data.test);
    } catch (const NumericError& err) {
      throw NumericError("training aborted in epoch " + std::to_string(e + 1) + ": " + err.what() +
                         (options.out_dir.empty() ? "" : "; last good checkpoint kept in " + options.out_dir.string()));
    }
    result.history.push_back(rec);
    const double score = std::isnan(rec.test_acc) ? rec.train_acc : rec.test_acc;
    const bool improved = score > best;
    if (improved) {
      best = score;
      result.best_epoch = rec.epoch;
      result.best_test_acc = score;
    }
    if (!options.out_dir.empty()) {
      log << log_row(rec) << std::flush;
      save_checkpoint(options.out_dir / "final.ckpt", model, config, rec.epoch, &trainer.optimizer());
      if (improved) save_checkpoint(options.out_dir / "best.ckpt", model, config, rec.epoch, &trainer.optimizer());
    }
    if (options.on_epoch) options.on_epoch(rec);
  }
  return result;
}

template class Trainer<float>;
template class Trainer<double>;
template TrainResult train<float>(PmnModel<float>&, const DatasetSplit&, const RunConfig&, const TrainOptions&);
template TrainResult train<double>(PmnModel<double>&, const DatasetSplit&, const RunConfig&, const TrainOptions&);

}  // namespace pmn
