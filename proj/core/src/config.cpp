#include "pmn/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>

#include <json.hpp>

#include "pmn/io.hpp"

namespace pmn {

using nlohmann::ordered_json;

const char* to_string(Precision precision) { return precision == Precision::f32 ? "f32" : "f64"; }

Precision precision_from_string(std::string_view name) {
  if (name == "f32") return Precision::f32;
  if (name == "f64") return Precision::f64;
  throw ConfigError("unknown precision '" + std::string(name) + "' (expected f32 or f64)");
}

void RunConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (!(adam.learning_rate > 0.0) || !std::isfinite(adam.learning_rate)) throw ConfigError("lr must be positive");
  if (!(adam.decay_per_epoch > 0.0 && adam.decay_per_epoch <= 1.0)) throw ConfigError("lr_decay must lie in (0, 1]");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.eps > 0.0)) {
    throw ConfigError("adam betas must lie in [0, 1) and eps must be positive");
  }
  weights.validate();
  if (mlp_hidden == 0) throw ConfigError("mlp_hidden must be positive");
  if (train_path.empty() != test_path.empty()) throw ConfigError("train_path and test_path must be given together");
  if (train_path.empty()) generator.validate();
}

ModelConfig RunConfig::model_config(std::size_t classes) const {
  ModelConfig m;
  m.classes = classes;
  m.prototypes = prototypes;
  m.metric = metric;
  m.variant = variant;
  m.mlp_hidden = mlp_hidden;
  m.seed = model_seed(seed);
  if (m.variant == Variant::pmn && m.prototype_count() < classes) {
    throw ConfigError("prototypes (" + std::to_string(m.prototype_count()) + ") must be at least the class count (" +
                      std::to_string(classes) + ")");
  }
  return m;
}

std::uint64_t model_seed(std::uint64_t run_seed) { return Rng(run_seed).derive(0x6d6f64656cULL).next_u64(); }

namespace {

ordered_json fault_to_json(const signal::FaultSpec& s) {
  return ordered_json{{"class_id", s.class_id},
                      {"name", s.name},
                      {"mesh_hz", s.mesh_hz},
                      {"harmonic_amplitudes", s.harmonic_amplitudes},
                      {"modulated_harmonic", s.modulated_harmonic},
                      {"sideband_spacing_hz", s.sideband_spacing_hz},
                      {"modulation_depth", s.modulation_depth},
                      {"noise_std", s.noise_std},
                      {"amplitude_jitter", s.amplitude_jitter},
                      {"random_phase", s.random_phase},
                      {"discriminative_harmonic", s.discriminative_harmonic}};
}

// Reads known keys from `j` into fields, rejecting anything unrecognized.
class ObjectReader {
 public:
  ObjectReader(const ordered_json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <typename V>
  void get(const char* key, V& out) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).template get<V>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const ordered_json* sub(const char* key) {
    seen_.push_back(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end()) {
        throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
      }
    }
  }

 private:
  const ordered_json& j_;
  std::string where_;
  std::vector<std::string> seen_;
};

signal::FaultSpec fault_from_json(const ordered_json& j, const std::string& where) {
  signal::FaultSpec s;
  ObjectReader r(j, where);
  r.get("class_id", s.class_id);
  r.get("name", s.name);
  r.get("mesh_hz", s.mesh_hz);
  r.get("harmonic_amplitudes", s.harmonic_amplitudes);
  r.get("modulated_harmonic", s.modulated_harmonic);
  r.get("sideband_spacing_hz", s.sideband_spacing_hz);
  r.get("modulation_depth", s.modulation_depth);
  r.get("noise_std", s.noise_std);
  r.get("amplitude_jitter", s.amplitude_jitter);
  r.get("random_phase", s.random_phase);
  r.get("discriminative_harmonic", s.discriminative_harmonic);
  r.finish();
  return s;
}

}  // namespace

std::string to_json(const RunConfig& c) {
  ordered_json classes = ordered_json::array();
  for (const auto& s : c.generator.classes) classes.push_back(fault_to_json(s));
  ordered_json j{
      {"seed", c.seed},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"lr", c.adam.learning_rate},
      {"lr_decay", c.adam.decay_per_epoch},
      {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}}},
      {"loss_weights", {{"recon", c.weights.recon}, {"r1", c.weights.r1}, {"r2", c.weights.r2}, {"r3", c.weights.r3}}},
      {"prototypes", c.prototypes},
      {"metric", to_string(c.metric)},
      {"variant", to_string(c.variant)},
      {"mlp_hidden", c.mlp_hidden},
      {"precision", to_string(c.precision)},
      {"train_path", c.train_path},
      {"test_path", c.test_path},
      {"generator",
       {{"seed", c.generator.seed},
        {"per_class", c.generator.per_class},
        {"split_ratio", c.generator.split_ratio},
        {"length", c.generator.geometry.length},
        {"rate_hz", c.generator.geometry.rate_hz},
        {"augment", {{"v", c.generator.augment.v}, {"d", c.generator.augment.d}, {"probability", c.generator.augment.probability}}},
        {"classes", classes}}},
  };
  return j.dump(2);
}

RunConfig run_config_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  ObjectReader r(j, "config");
  r.get("seed", c.seed);
  r.get("epochs", c.epochs);
  r.get("batch_size", c.batch_size);
  r.get("lr", c.adam.learning_rate);
  r.get("lr_decay", c.adam.decay_per_epoch);
  if (const auto* a = r.sub("adam")) {
    ObjectReader ra(*a, "config.adam");
    ra.get("beta1", c.adam.beta1);
    ra.get("beta2", c.adam.beta2);
    ra.get("eps", c.adam.eps);
    ra.finish();
  }
  if (const auto* w = r.sub("loss_weights")) {
    ObjectReader rw(*w, "config.loss_weights");
    rw.get("recon", c.weights.recon);
    rw.get("r1", c.weights.r1);
    rw.get("r2", c.weights.r2);
    rw.get("r3", c.weights.r3);
    rw.finish();
  }
  r.get("prototypes", c.prototypes);
  std::string metric = to_string(c.metric), variant = to_string(c.variant), precision = to_string(c.precision);
  r.get("metric", metric);
  r.get("variant", variant);
  r.get("precision", precision);
  c.metric = metric_from_string(metric);
  c.variant = variant_from_string(variant);
  c.precision = precision_from_string(precision);
  r.get("mlp_hidden", c.mlp_hidden);
  r.get("train_path", c.train_path);
  r.get("test_path", c.test_path);
  if (const auto* g = r.sub("generator")) {
    ObjectReader rg(*g, "config.generator");
    rg.get("seed", c.generator.seed);
    rg.get("per_class", c.generator.per_class);
    rg.get("split_ratio", c.generator.split_ratio);
    rg.get("length", c.generator.geometry.length);
    rg.get("rate_hz", c.generator.geometry.rate_hz);
    if (const auto* a = rg.sub("augment")) {
      ObjectReader raug(*a, "config.generator.augment");
      raug.get("v", c.generator.augment.v);
      raug.get("d", c.generator.augment.d);
      raug.get("probability", c.generator.augment.probability);
      raug.finish();
    }
    if (const auto* cls = rg.sub("classes")) {
      if (!cls->is_array()) throw ConfigError("config.generator.classes: expected an array");
      c.generator.classes.clear();
      for (std::size_t i = 0; i < cls->size(); ++i) {
        c.generator.classes.push_back(fault_from_json(cls->at(i), "config.generator.classes[" + std::to_string(i) + "]"));
      }
    }
    rg.finish();
  }
  r.finish();
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) { return run_config_from_json(io::read_text(path)); }

bool apply_env_overrides(RunConfig& config) {
  const char* env = std::getenv("PMN_SEED");
  if (env == nullptr || *env == '\0') return false;
  const std::string_view text(env);
  std::uint64_t seed = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw ConfigError("PMN_SEED='" + std::string(text) + "' is not an unsigned 64-bit integer");
  }
  config.seed = seed;
  return true;
}

}  // namespace pmn
