// Acceptance suite: one PASS/FAIL line per criterion, exit code 1 if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "pmn/checkpoint.hpp"
#include "pmn/dataset.hpp"
#include "pmn/interpret.hpp"
#include "pmn/io.hpp"
#include "pmn/metrics.hpp"
#include "pmn/trainer.hpp"

using namespace pmn;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(int id, const char* title, bool pass, const std::string& detail) {
  std::printf("%s [%d] %s: %s\n", pass ? "PASS" : "FAIL", id, title, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------- criterion 1
void gradient_suite() {
  const auto start = Clock::now();
  double worst = 0.0;
  std::string where;
  for (const auto& c : gradcheck::layer_cases()) {
    for (std::uint64_t draw = 0; draw < 5; ++draw) {
      const auto r = gradcheck::run_layer_case(c, draw);
      if (r.max_rel_error > worst) {
        worst = r.max_rel_error;
        where = c.name + " " + r.worst;
      }
    }
  }
  const std::pair<Metric, Variant> objectives[] = {{Metric::sq_l2, Variant::pmn},
                                                   {Metric::l1, Variant::pmn},
                                                   {Metric::cosine, Variant::pmn},
                                                   {Metric::sq_l2, Variant::ae_mlp}};
  std::uint64_t seed = 1;
  for (const auto& [metric, variant] : objectives) {
    const auto r = gradcheck::check_objective(metric, variant, seed++);
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      where = std::string("objective/") + to_string(metric) + "/" + to_string(variant) + " " + r.worst;
    }
  }
  const double t = seconds_since(start);
  report(1, "gradient suite", worst < 1e-4 && t < 30.0,
         fmt("max rel err %.3e (< 1e-4) over 10 layer kinds x 5 draws + 4 objectives, %.2f s (< 30 s); worst at %s", worst,
             t, where.c_str()));
}

// ---------------------------------------------------------------- criterion 2
void linear_equivalence() {
  const auto start = Clock::now();
  ModelConfig cfg;
  cfg.seed = 11;
  PmnModel<double> model(cfg);
  Rng rng(12);
  auto& protos = model.prototype_head().prototypes();
  for (auto& v : protos.values()) v = rng.gaussian(0.0, 1.0);
  const Tensor<double> z = oracle::random_tensor({100, model.latent_dim()}, rng, -2.0, 2.0);
  const auto pm = softmax_rows(model.logits_from_latent(z));
  const auto lin = softmax_rows(model.linear_equivalent_logits(z));
  const double dev = max_abs_difference(pm, lin);
  const double t = seconds_since(start);
  report(2, "linear-equivalence identity", dev < 1e-9 && t < 1.0,
         fmt("max |softmax(W p(z)) - softmax(2 p^T z - p^T p)| = %.3e (< 1e-9) over 100 latents, %.3f s (< 1 s)", dev, t));
}

// ---------------------------------------------------------------- criterion 3
void loss_oracles() {
  const auto start = Clock::now();
  Rng rng(21);
  double worst = 0.0;
  const char* worst_term = "";
  auto track = [&](double a, double b, const char* term) {
    const double e = std::abs(a - b);
    if (e > worst) {
      worst = e;
      worst_term = term;
    }
  };
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(10), m = 2 + rng.uniform_index(4), q = 1 + rng.uniform_index(4);
    const Metric metric = static_cast<Metric>(rng.uniform_index(3));
    const auto z = oracle::random_tensor({n, q}, rng, -2.0, 2.0);
    const auto p = oracle::random_tensor({m, q}, rng, -2.0, 2.0);
    const auto zm = oracle::to_mat(z), pmat = oracle::to_mat(p);
    track(r1_feature_to_prototype(z, p, metric), oracle::brute_r1(zm, pmat, metric), "R1");
    track(r2_prototype_to_feature(z, p, metric), oracle::brute_r2(zm, pmat, metric), "R2");
    track(r3_prototype_separation(p, metric), oracle::brute_r3(pmat, metric), "R3");

    const std::size_t k = 2 + rng.uniform_index(4);
    const auto probs = softmax_rows(oracle::random_tensor({n, k}, rng, -3.0, 3.0));
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_index(k));
    track(cross_entropy(probs, labels), oracle::brute_cross_entropy(oracle::to_mat(probs), labels), "cross-entropy");

    const auto x = oracle::random_tensor({n, q}, rng), y = oracle::random_tensor({n, q}, rng);
    track(reconstruction_mse(x, y), oracle::brute_mse(oracle::to_mat(x), oracle::to_mat(y)), "MSE");
  }
  const double t = seconds_since(start);
  report(3, "loss oracles", worst <= 1e-12 && t < 5.0,
         fmt("max |library - brute force| = %.3e (<= 1e-12; worst term %s) over 200 random instances (n<=10, m<=5, "
             "q<=4, all metrics), %.3f s (< 5 s)",
             worst, worst_term, t));
}

// ---------------------------------------------------------------- criterion 4
void shape_conformance() {
  PmnModel<float> model(ModelConfig{});
  const std::vector<std::pair<std::string, Shape>> expected{
      {"Enc.1", {8, 512}},  {"Enc.2", {16, 256}}, {"Enc.3", {32, 64}}, {"Enc.4", {64, 16}}, {"Enc.5", {128, 4}},
      {"Enc.6", {64}},      {"Dec.1", {128, 4}},  {"Dec.2", {64, 16}}, {"Dec.3", {32, 64}}, {"Dec.4", {16, 256}},
      {"Dec.5", {8, 512}},  {"Dec.6", {1024}},    {"Cla.1", {4}},
  };
  const auto rows = model.shape_trace();
  std::size_t matched = 0;
  std::string mismatch;
  for (std::size_t i = 0; i < std::min(rows.size(), expected.size()); ++i) {
    const std::string key = rows[i].part + std::to_string(rows[i].number);
    if (key == expected[i].first && rows[i].item_shape == expected[i].second) {
      ++matched;
    } else if (mismatch.empty()) {
      mismatch = "; first mismatch " + key + " " + shape_to_string(rows[i].item_shape);
    }
  }
  const auto recon = model.reconstruct(Tensor<float>({2, 1024}, 0.5f));
  const bool ok = matched == 13 && rows.size() == 13 && recon.shape() == Shape{2, 1024};
  report(4, "shape conformance", ok,
         fmt("%zu/13 output sizes match, decoder output %s%s", matched, shape_to_string(recon.shape()).c_str(),
             mismatch.c_str()));
}

// ------------------------------------------------------------- training runs
struct TrainedRun {
  std::uint64_t seed = 0;
  RunConfig config;
  DatasetSplit data;
  std::optional<PmnModel<float>> model;
  double test_acc = 0.0;
  double r_rps = 0.0;
  double seconds = 0.0;
};

TrainedRun train_run(std::uint64_t seed, double v, std::size_t d, Variant variant) {
  TrainedRun run;
  run.seed = seed;
  run.config.seed = seed;
  run.config.variant = variant;
  run.config.generator.seed = seed;
  run.config.generator.augment.v = v;
  run.config.generator.augment.d = d;
  const auto start = Clock::now();
  run.data = build_dataset(run.config.generator);
  run.model.emplace(run.config.model_config(run.data.train.class_count()));
  const auto result = train(*run.model, run.data, run.config);
  run.seconds = seconds_since(start);
  const auto report = evaluate(*run.model, run.data.test);
  run.test_acc = report.accuracy;
  run.r_rps = report.r_rps;
  std::printf("  trained %s seed %llu at %g-%zu: final test acc %.4f, test R_rps %.4f, best epoch %zu, %.1f s\n",
              to_string(variant), static_cast<unsigned long long>(seed), v, d, run.test_acc, run.r_rps,
              result.best_epoch, run.seconds);
  std::fflush(stdout);
  return run;
}

// ---------------------------------------------------------------- criterion 5
void synthetic_diagnosis(const std::vector<TrainedRun>& runs) {
  double sum = 0.0, secs = 0.0;
  std::string per_seed;
  for (const auto& r : runs) {
    sum += r.test_acc;
    secs += r.seconds;
    per_seed += fmt(" %.4f", r.test_acc);
  }
  const double mean = sum / static_cast<double>(runs.size());
  report(5, "synthetic diagnosis", mean >= 0.95 && secs < 600.0,
         fmt("mean final-epoch test accuracy %.4f (>= 0.95) over seeds 1-3 [%s ] at 0.1-100, %.1f s training (< 600 s)",
             mean, per_seed.c_str(), secs));
}

// ---------------------------------------------------------------- criterion 6
void representation_advantage(const std::vector<TrainedRun>& pmn, const std::vector<TrainedRun>& baseline) {
  int wins = 0;
  std::string detail;
  for (std::size_t i = 0; i < pmn.size(); ++i) {
    if (pmn[i].r_rps < baseline[i].r_rps) ++wins;
    detail += fmt(" seed %llu: %.4f vs %.4f;", static_cast<unsigned long long>(pmn[i].seed), pmn[i].r_rps, baseline[i].r_rps);
  }
  report(6, "representation advantage", wins == static_cast<int>(pmn.size()),
         fmt("PMN test R_rps below ae-mlp-baseline in %d/%zu seeds at 0.2-200 (pmn vs baseline:%s)", wins, pmn.size(),
             detail.c_str()));
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// ---------------------------------------------------------------- criterion 7
void prototype_fidelity(const std::vector<TrainedRun>& runs) {
  double worst = 1.0;
  std::string detail;
  for (const auto& r : runs) {
    const auto decoded = decode_prototypes(*r.model).cast<double>();
    detail += fmt(" seed %llu:", static_cast<unsigned long long>(r.seed));
    for (std::size_t j = 0; j < decoded.dim(0); ++j) {
      const auto& spec = r.config.generator.classes[prototype_class(j, r.model->classes())];
      const auto tmpl = signal::clean_template(spec, r.config.generator.geometry);
      const double c = cosine_similarity(decoded.row(j), tmpl);
      worst = std::min(worst, c);
      detail += fmt(" %.3f", c);
    }
    detail += ";";
  }
  report(7, "prototype fidelity", worst >= 0.9,
         fmt("min cosine(g(p_k), clean template k) = %.4f (>= 0.9);%s", worst, detail.c_str()));
}

std::vector<std::size_t> correctly_classified(const PmnModel<float>& model, const Dataset& data) {
  const auto inference = infer_dataset(model, data);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (inference.predictions[i] == static_cast<std::size_t>(data.samples[i].label)) out.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------- criterion 8
void attribution_fidelity(std::vector<TrainedRun>& runs) {
  std::size_t hits = 0, probed = 0, degenerate = 0;
  std::string detail;
  for (auto& r : runs) {
    std::size_t run_hits = 0, run_probed = 0;
    for (auto i : correctly_classified(*r.model, r.data.test)) {
      const auto& s = r.data.test.samples[i];
      const auto& spec = r.config.generator.classes[static_cast<std::size_t>(s.label)];
      const auto target = static_cast<long>(r.config.generator.geometry.bin_of(spec.discriminative_hz()));
      const auto map = grad_cam<float>(*r.model, s.bins);
      if (map.degenerate) ++degenerate;
      bool hit = false;
      for (auto b : top_bins(map.scores, 5)) hit = hit || std::abs(static_cast<long>(b) - target) <= 2;
      run_hits += hit;
      ++run_probed;
    }
    hits += run_hits;
    probed += run_probed;
    detail += fmt(" seed %llu %zu/%zu;", static_cast<unsigned long long>(r.seed), run_hits, run_probed);
  }
  const double share = probed ? static_cast<double>(hits) / static_cast<double>(probed) : 0.0;
  report(8, "attribution fidelity", share >= 0.8,
         fmt("top-5 Grad-CAM bins hit the discriminative harmonic +-2 bins for %.4f (>= 0.8) of %zu correctly "
             "classified test samples (%zu all-zero maps);%s",
             share, probed, degenerate, detail.c_str()));
}

// ---------------------------------------------------------------- criterion 9
constexpr std::size_t kMaskHalfWidth = 8;

void mask_direction(const std::vector<TrainedRun>& runs) {
  std::size_t increased = 0, probed = 0;
  double before_sum = 0.0, after_sum = 0.0;
  for (const auto& r : runs) {
    for (auto i : correctly_classified(*r.model, r.data.test)) {
      const auto& s = r.data.test.samples[i];
      const auto& spec = r.config.generator.classes[static_cast<std::size_t>(s.label)];
      const std::size_t bin = r.config.generator.geometry.bin_of(spec.discriminative_hz());
      std::vector<float> masked = s.bins;
      signal::mask_bins<float>(masked, bin - kMaskHalfWidth, 2 * kMaskHalfWidth + 1);
      const auto before = explain_match<float>(*r.model, s.bins);
      const auto after = explain_match<float>(*r.model, masked);
      const double d0 = before.distances[before.matched_prototype];
      const double d1 = after.distances[after.matched_prototype];
      before_sum += d0;
      after_sum += d1;
      increased += d1 > d0;
      ++probed;
    }
  }
  const double share = probed ? static_cast<double>(increased) / static_cast<double>(probed) : 0.0;
  report(9, "mask-confusion direction", share >= 0.9,
         fmt("masking +-%zu bins around the discriminative harmonic raised the minimum prototype distance for %.4f "
             "(>= 0.9) of %zu correctly classified test samples (mean %.3f -> %.3f)",
             kMaskHalfWidth, share, probed, before_sum / static_cast<double>(probed), after_sum / static_cast<double>(probed)));
}

// --------------------------------------------------------------- criterion 10
bool same_bytes(const fs::path& a, const fs::path& b) { return io::read_file(a) == io::read_file(b); }

template <typename T>
bool determinism_for(Precision precision, const fs::path& root, std::string& detail) {
  RunConfig cfg;
  cfg.seed = 5;
  cfg.epochs = 3;
  cfg.precision = precision;
  cfg.generator.seed = 5;
  cfg.generator.per_class = 60;
  cfg.generator.augment = {0.1, 100, 0.5};
  const auto data = build_dataset(cfg.generator);
  const fs::path a = root / (std::string(to_string(precision)) + "_a"), b = root / (std::string(to_string(precision)) + "_b");
  PmnModel<T> model_a(cfg.model_config(4)), model_b(cfg.model_config(4));
  train(model_a, data, cfg, {a, {}});
  train(model_b, data, cfg, {b, {}});
  const bool logs = same_bytes(a / "log.csv", b / "log.csv");
  const bool ckpts = same_bytes(a / "final.ckpt", b / "final.ckpt");

  const std::string before = to_json(evaluate(model_a, data.test));
  save_checkpoint(a / "roundtrip.ckpt", model_a, cfg, cfg.epochs);
  const auto loaded = load_checkpoint<T>(a / "roundtrip.ckpt");
  const std::string after = to_json(evaluate(loaded.model, data.test));
  // f32 payloads round-trip f32 models bit for bit; f64 models are narrowed.
  const bool roundtrip = precision == Precision::f64 || before == after;
  const std::string reload_a = to_json(evaluate(load_checkpoint<T>(a / "final.ckpt").model, data.test));
  const std::string reload_b = to_json(evaluate(load_checkpoint<T>(b / "final.ckpt").model, data.test));
  detail += fmt(" %s: logs %s, final checkpoints %s, save/load eval JSON %s, reload eval JSON %s;", to_string(precision),
                logs ? "equal" : "DIFFER", ckpts ? "equal" : "DIFFER",
                precision == Precision::f64 ? "n/a (f32 payload)" : (before == after ? "equal" : "DIFFER"),
                reload_a == reload_b ? "equal" : "DIFFER");
  return logs && ckpts && roundtrip && reload_a == reload_b;
}

void determinism() {
  const fs::path root = fs::temp_directory_path() / ("pmn_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(root);
  std::string detail;
  const bool f32 = determinism_for<float>(Precision::f32, root, detail);
  const bool f64 = determinism_for<double>(Precision::f64, root, detail);
  fs::remove_all(root);
  report(10, "determinism and persistence", f32 && f64, "two fixed-seed 3-epoch runs per precision:" + detail);
}

}  // namespace

int main() {
  std::printf("PMN acceptance suite\n");
  gradient_suite();
  linear_equivalence();
  loss_oracles();
  shape_conformance();

  std::vector<TrainedRun> main_runs;
  for (std::uint64_t seed : {1, 2, 3}) main_runs.push_back(train_run(seed, 0.1, 100, Variant::pmn));
  synthetic_diagnosis(main_runs);

  std::vector<TrainedRun> pmn_noisy, baseline_noisy;
  for (std::uint64_t seed : {1, 2, 3}) {
    pmn_noisy.push_back(train_run(seed, 0.2, 200, Variant::pmn));
    baseline_noisy.push_back(train_run(seed, 0.2, 200, Variant::ae_mlp));
  }
  representation_advantage(pmn_noisy, baseline_noisy);

  prototype_fidelity(main_runs);
  attribution_fidelity(main_runs);
  mask_direction(main_runs);
  determinism();

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
