// pmn: generate synthetic spectra, train, evaluate and explain prototype
// matching networks.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pmn/checkpoint.hpp"
#include "pmn/config.hpp"
#include "pmn/dataset.hpp"
#include "pmn/interpret.hpp"
#include "pmn/io.hpp"
#include "pmn/metrics.hpp"
#include "pmn/trainer.hpp"

namespace fs = std::filesystem;

namespace {

struct ConfigArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> prototypes;
  std::optional<std::size_t> per_class;
  std::optional<double> split_ratio;
  std::string noise;
  std::string metric;
  std::string variant;
  std::string precision;
};

void add_config_options(CLI::App* cmd, ConfigArgs& a, bool training) {
  cmd->add_option("-c,--config", a.config_path, "JSON run config (defaults apply to missing keys)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", a.seed, "Run seed (PMN_SEED takes precedence)");
  cmd->add_option("--per-class", a.per_class, "Generated samples per class");
  cmd->add_option("--split-ratio", a.split_ratio, "Training share of each class, in (0, 1)");
  cmd->add_option("--noise", a.noise, "Augmentation as v-d, e.g. 0.1-100");
  if (training) {
    cmd->add_option("--epochs", a.epochs, "Training epochs");
    cmd->add_option("--batch-size", a.batch_size, "Minibatch size");
    cmd->add_option("--prototypes", a.prototypes, "Prototype count m (0: one per class)");
    cmd->add_option("--metric", a.metric, "sqL2, L1 or cosine");
    cmd->add_option("--variant", a.variant, "pmn or ae-mlp-baseline");
    cmd->add_option("--precision", a.precision, "f32 or f64");
  }
}

pmn::RunConfig resolve_config(const ConfigArgs& a) {
  pmn::RunConfig c = a.config_path.empty() ? pmn::RunConfig{} : pmn::load_run_config(a.config_path);
  if (a.seed) c.seed = *a.seed;
  if (a.epochs) c.epochs = *a.epochs;
  if (a.batch_size) c.batch_size = *a.batch_size;
  if (a.prototypes) c.prototypes = *a.prototypes;
  if (a.per_class) c.generator.per_class = *a.per_class;
  if (a.split_ratio) c.generator.split_ratio = *a.split_ratio;
  if (!a.noise.empty()) {
    const auto parsed = pmn::signal::parse_noise_condition(a.noise);
    c.generator.augment.v = parsed.v;
    c.generator.augment.d = parsed.d;
  }
  if (!a.metric.empty()) c.metric = pmn::metric_from_string(a.metric);
  if (!a.variant.empty()) c.variant = pmn::variant_from_string(a.variant);
  if (!a.precision.empty()) c.precision = pmn::precision_from_string(a.precision);
  if (pmn::apply_env_overrides(c)) std::cerr << "seed " << c.seed << " from PMN_SEED\n";
  c.validate();
  return c;
}

void print_counts(const char* name, const pmn::Dataset& d) {
  std::cout << name << ": " << d.size() << " samples";
  const auto counts = d.class_counts();
  for (std::size_t k = 0; k < counts.size(); ++k) std::cout << (k ? ", " : " (") << "class " << k << ": " << counts[k];
  std::cout << (counts.empty() ? "" : ")") << '\n';
}

int cmd_generate(const ConfigArgs& args, const std::string& out_dir, bool csv) {
  auto config = resolve_config(args);
  config.generator.seed = config.seed;
  const auto split = pmn::build_dataset(config.generator);
  fs::create_directories(out_dir);
  pmn::write_pmds(fs::path(out_dir) / "train.pmds", split.train);
  pmn::write_pmds(fs::path(out_dir) / "test.pmds", split.test);
  if (csv) {
    pmn::write_dataset_csv(fs::path(out_dir) / "train.csv", split.train);
    pmn::write_dataset_csv(fs::path(out_dir) / "test.csv", split.test);
  }
  pmn::io::write_text(fs::path(out_dir) / "config.json", pmn::to_json(config) + "\n");
  print_counts("train", split.train);
  print_counts("test", split.test);
  return 0;
}

template <typename T>
int run_training(const pmn::RunConfig& config, const std::string& out_dir) {
  const auto data = pmn::load_or_generate(config);
  print_counts("train", data.train);
  print_counts("test", data.test);
  pmn::PmnModel<T> model(config.model_config(data.train.class_count()));
  pmn::TrainOptions options;
  options.out_dir = out_dir;
  options.on_epoch = [&](const pmn::EpochRecord& r) {
    std::printf("epoch %3zu  lr %.3e  total %.4f  cla %.4f  recon %.4f  train %.4f  test %.4f  r_rps %.4f\n", r.epoch,
                r.learning_rate, r.loss.total, r.loss.cla, r.loss.recon, r.train_acc, r.test_acc, r.r_rps);
    std::fflush(stdout);
  };
  pmn::io::write_text(fs::path(out_dir) / "config.json", pmn::to_json(config) + "\n");
  const auto result = pmn::train(model, data, config, options);
  std::printf("best test accuracy %.4f at epoch %zu; checkpoints in %s\n", result.best_test_acc, result.best_epoch,
              out_dir.c_str());
  return 0;
}

int cmd_train(const ConfigArgs& args, const std::string& out_dir, const std::string& train, const std::string& test) {
  auto config = resolve_config(args);
  if (!train.empty() || !test.empty()) {
    config.train_path = train;
    config.test_path = test;
  } else if (config.train_path.empty()) {
    config.generator.seed = config.seed;
  }
  config.validate();
  fs::create_directories(out_dir);
  return config.precision == pmn::Precision::f32 ? run_training<float>(config, out_dir)
                                                 : run_training<double>(config, out_dir);
}

template <typename T>
int run_eval(const pmn::CheckpointFile& file, const std::string& ckpt, const std::string& data_path,
             const std::string& out, const std::string& features) {
  const auto loaded = pmn::model_from_checkpoint<T>(file, ckpt);
  const auto data = pmn::read_pmds(data_path);
  if (data.bin_count() != loaded.model.input_length()) {
    throw pmn::VersionError(data_path + ": " + std::to_string(data.bin_count()) + " bins, checkpoint model expects " +
                            std::to_string(loaded.model.input_length()));
  }
  if (data.class_count() > loaded.model.classes()) {
    throw pmn::VersionError(data_path + ": labels exceed the checkpoint's " + std::to_string(loaded.model.classes()) + " classes");
  }
  const std::string json = pmn::to_json(pmn::evaluate(loaded.model, data));
  if (out.empty()) {
    std::cout << json;
  } else {
    pmn::io::write_text(out, json);
  }
  if (!features.empty()) pmn::export_features(loaded.model, data, features);
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data, const std::string& out, const std::string& features) {
  const auto file = pmn::read_checkpoint(ckpt);
  return file.header.config.precision == pmn::Precision::f32 ? run_eval<float>(file, ckpt, data, out, features)
                                                             : run_eval<double>(file, ckpt, data, out, features);
}

template <typename T>
int run_explain(const pmn::CheckpointFile& file, const std::string& ckpt, const std::string& data_path,
                std::optional<std::size_t> sample, bool all_prototypes, const std::string& out_dir) {
  auto loaded = pmn::model_from_checkpoint<T>(file, ckpt);
  auto& model = loaded.model;
  if (!model.has_prototypes()) throw pmn::UsageError("explain needs a pmn-variant checkpoint");
  const auto& g = file.header.config.generator.geometry;
  const double bin_hz = g.bin_hz();
  fs::create_directories(out_dir);
  if (sample) {
    if (data_path.empty()) throw pmn::UsageError("--sample needs --data");
    const auto data = pmn::read_pmds(data_path);
    if (*sample >= data.size()) {
      throw pmn::UsageError("sample " + std::to_string(*sample) + " out of range; dataset has " + std::to_string(data.size()));
    }
    const auto& bins = data.samples[*sample].bins;
    const std::vector<T> x(bins.begin(), bins.end());
    auto e = pmn::explain_match<T>(model, x, *sample);
    e.attribution = pmn::grad_cam<T>(model, x);
    const auto stem = fs::path(out_dir) / ("sample_" + std::to_string(*sample));
    pmn::io::write_text(stem.string() + ".json", pmn::to_json(e, bin_hz));
    pmn::io::write_text(stem.string() + "_attribution.csv", pmn::attribution_csv(*e.attribution, bin_hz));
    std::printf("sample %zu: label %d, predicted %zu, matched prototype %zu (distance %.4f)%s\n", *sample,
                data.samples[*sample].label, e.predicted_class, e.matched_prototype, e.distances[e.matched_prototype],
                e.attribution->degenerate ? " [all-zero attribution]" : "");
  }
  if (all_prototypes) {
    const auto decoded = pmn::decode_prototypes(model).template cast<double>();
    const auto path = fs::path(out_dir) / "prototypes.csv";
    pmn::io::write_text(path, pmn::prototypes_csv(decoded, model.classes()));
    std::printf("wrote %zu decoded prototypes to %s\n", decoded.dim(0), path.c_str());
  }
  return 0;
}

int cmd_explain(const std::string& ckpt, const std::string& data, std::optional<std::size_t> sample, bool all_prototypes,
                const std::string& out_dir) {
  if (!sample && !all_prototypes) throw pmn::UsageError("explain: give --sample and/or --all-prototypes");
  const auto file = pmn::read_checkpoint(ckpt);
  return file.header.config.precision == pmn::Precision::f32
             ? run_explain<float>(file, ckpt, data, sample, all_prototypes, out_dir)
             : run_explain<double>(file, ckpt, data, sample, all_prototypes, out_dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prototype matching network for vibration spectra"};
  app.require_subcommand(1);

  ConfigArgs gen_args, train_args;
  std::string gen_out = "data", train_out = "run", train_pmds, test_pmds;
  bool gen_csv = false;
  auto* gen = app.add_subcommand("generate", "Write synthetic train/test PMDS files");
  add_config_options(gen, gen_args, false);
  gen->add_option("-o,--out-dir", gen_out, "Output directory");
  gen->add_flag("--csv", gen_csv, "Also write CSV copies");

  auto* tr = app.add_subcommand("train", "Train a model; writes log.csv, best.ckpt, final.ckpt");
  add_config_options(tr, train_args, true);
  tr->add_option("-o,--out-dir", train_out, "Output directory");
  tr->add_option("--train", train_pmds, "Training PMDS file")->check(CLI::ExistingFile);
  tr->add_option("--test", test_pmds, "Test PMDS file")->check(CLI::ExistingFile);

  std::string ckpt, data, report_out, features_out;
  auto* ev = app.add_subcommand("eval", "Accuracy, confusion and R_rps as JSON");
  ev->add_option("checkpoint", ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  ev->add_option("data", data, "PMDS dataset")->required()->check(CLI::ExistingFile);
  ev->add_option("-o,--out", report_out, "Write the report here instead of stdout");
  ev->add_option("--features", features_out, "Export latent features (and prototypes) as CSV");

  std::string ex_ckpt, ex_data, ex_out = "explain";
  std::optional<std::size_t> ex_sample;
  bool ex_all = false;
  auto* ex = app.add_subcommand("explain", "Distance readout, decoded prototype and Grad-CAM for a sample");
  ex->add_option("checkpoint", ex_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  ex->add_option("--data", ex_data, "PMDS dataset")->check(CLI::ExistingFile);
  ex->add_option("--sample", ex_sample, "Sample index within the dataset");
  ex->add_flag("--all-prototypes", ex_all, "Dump every decoded prototype");
  ex->add_option("-o,--out-dir", ex_out, "Output directory");

  std::string cfg_out;
  auto* cfg = app.add_subcommand("config", "Print the default run config");
  cfg->add_option("-o,--out", cfg_out, "Write to a file instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_generate(gen_args, gen_out, gen_csv);
    if (*tr) return cmd_train(train_args, train_out, train_pmds, test_pmds);
    if (*ev) return cmd_eval(ckpt, data, report_out, features_out);
    if (*ex) return cmd_explain(ex_ckpt, ex_data, ex_sample, ex_all, ex_out);
    if (*cfg) {
      const std::string text = pmn::to_json(pmn::RunConfig{}) + "\n";
      if (cfg_out.empty()) {
        std::cout << text;
      } else {
        pmn::io::write_text(cfg_out, text);
      }
      return 0;
    }
  } catch (const pmn::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
