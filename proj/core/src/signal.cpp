#include "pmn/signal.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>

namespace pmn::signal {

std::size_t SignalGeometry::bin_of(double hz) const {
  return static_cast<std::size_t>(std::lround(hz / bin_hz()));
}

void FaultSpec::validate(const SignalGeometry& geometry) const {
  if (!(mesh_hz > 0.0)) throw ConfigError("FaultSpec '" + name + "': mesh frequency must be positive");
  if (noise_std < 0.0 || amplitude_jitter < 0.0 || amplitude_jitter > 1.0 || modulation_depth < 0.0) {
    throw ConfigError("FaultSpec '" + name + "': negative noise, jitter or modulation");
  }
  const double nyquist = geometry.nyquist_hz();
  for (std::size_t h = 0; h < harmonic_amplitudes.size(); ++h) {
    if (harmonic_amplitudes[h] < 0.0) throw ConfigError("FaultSpec '" + name + "': negative harmonic amplitude");
    if (harmonic_amplitudes[h] > 0.0 && mesh_hz * static_cast<double>(h + 1) >= nyquist) {
      throw ConfigError("FaultSpec '" + name + "': harmonic " + std::to_string(h + 1) + " at " +
                        std::to_string(mesh_hz * static_cast<double>(h + 1)) + " Hz is not below Nyquist " +
                        std::to_string(nyquist) + " Hz");
    }
  }
  if (modulated_harmonic > harmonic_amplitudes.size()) {
    throw ConfigError("FaultSpec '" + name + "': modulated harmonic has no amplitude entry");
  }
  if (modulated_harmonic > 0 && modulation_depth > 0.0) {
    const double carrier = mesh_hz * static_cast<double>(modulated_harmonic);
    if (carrier + sideband_spacing_hz >= nyquist || carrier - sideband_spacing_hz <= 0.0) {
      throw ConfigError("FaultSpec '" + name + "': sidebands leave (0, Nyquist)");
    }
  }
  if (discriminative_harmonic > harmonic_amplitudes.size()) {
    throw ConfigError("FaultSpec '" + name + "': discriminative harmonic has no amplitude entry");
  }
}

std::vector<double> generate_signal(const FaultSpec& spec, const SignalGeometry& geometry, Rng& rng) {
  spec.validate(geometry);
  const std::size_t n = geometry.length;
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<double> x(n, 0.0);

  const double mod_phase = spec.random_phase ? rng.uniform(0.0, two_pi) : 0.0;
  for (std::size_t h = 0; h < spec.harmonic_amplitudes.size(); ++h) {
    const double jitter = spec.amplitude_jitter > 0.0 ? rng.uniform(1.0 - spec.amplitude_jitter, 1.0 + spec.amplitude_jitter) : 1.0;
    const double phase = spec.random_phase ? rng.uniform(0.0, two_pi) : 0.0;
    const double amp = spec.harmonic_amplitudes[h] * jitter;
    if (amp == 0.0) continue;
    const double freq = spec.mesh_hz * static_cast<double>(h + 1);
    const bool modulated = spec.modulated_harmonic == h + 1 && spec.modulation_depth > 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double time = static_cast<double>(t) / geometry.rate_hz;
      double envelope = 1.0;
      if (modulated) envelope += spec.modulation_depth * std::cos(two_pi * spec.sideband_spacing_hz * time + mod_phase);
      x[t] += amp * envelope * std::sin(two_pi * freq * time + phase);
    }
  }
  if (spec.noise_std > 0.0) {
    for (auto& v : x) v += rng.gaussian(0.0, spec.noise_std);
  }
  return x;
}

void fft(std::vector<std::complex<double>>& data) {
  const std::size_t n = data.size();
  if (n == 0 || !std::has_single_bit(n)) {
    throw DimensionError("fft: length " + std::to_string(n) + " is not a power of two");
  }
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = -2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        // Twiddles from the angle directly; a running product drifts on long transforms.
        const std::complex<double> w(std::cos(angle * static_cast<double>(k)), std::sin(angle * static_cast<double>(k)));
        const std::complex<double> u = data[start + k];
        const std::complex<double> v = data[start + k + len / 2] * w;
        data[start + k] = u + v;
        data[start + k + len / 2] = u - v;
      }
    }
  }
}

std::vector<double> to_spectrum(std::span<const double> signal) {
  if (signal.size() < 2 || !std::has_single_bit(signal.size())) {
    throw DimensionError("to_spectrum: signal length " + std::to_string(signal.size()) +
                         " must be an even power of two (e.g. 2048)");
  }
  std::vector<std::complex<double>> buf(signal.begin(), signal.end());
  fft(buf);
  const std::size_t half = signal.size() / 2;
  const double scale = 2.0 / static_cast<double>(signal.size());
  std::vector<double> out(half);
  for (std::size_t k = 0; k < half; ++k) out[k] = std::abs(buf[k]) * scale;
  return out;
}

template <typename T>
std::vector<T> normalize_01(std::span<const T> sample) {
  std::vector<T> out(sample.begin(), sample.end());
  if (out.empty()) return out;
  const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
  const double min = *lo, max = *hi;
  if (!(max > min)) {
    std::fill(out.begin(), out.end(), T(0));
    return out;
  }
  for (auto& v : out) v = static_cast<T>((static_cast<double>(v) - min) / (max - min));
  return out;
}

std::vector<double> clean_template(const FaultSpec& spec, const SignalGeometry& geometry) {
  FaultSpec clean = spec;
  clean.noise_std = 0.0;
  clean.amplitude_jitter = 0.0;
  clean.random_phase = false;
  Rng unused(0);
  const auto x = generate_signal(clean, geometry, unused);
  const auto s = to_spectrum(x);
  return normalize_01<double>(s);
}

void AugmentConfig::validate(std::size_t bins) const {
  if (!(probability >= 0.0 && probability <= 1.0)) throw ConfigError("AugmentConfig: probability outside [0, 1]");
  if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("AugmentConfig: v must be finite and non-negative");
  if (d > bins) {
    throw ConfigError("AugmentConfig: mask length " + std::to_string(d) + " exceeds " + std::to_string(bins) + " bins");
  }
}

std::string AugmentConfig::label() const {
  std::ostringstream os;
  os << v << '-' << d;
  return os.str();
}

AugmentConfig parse_noise_condition(const std::string& text) {
  const auto dash = text.find('-');
  if (dash == std::string::npos || dash == 0 || dash + 1 == text.size()) {
    throw ConfigError("noise condition '" + text + "' is not of the form v-d");
  }
  AugmentConfig c;
  try {
    std::size_t used = 0;
    c.v = std::stod(text.substr(0, dash), &used);
    if (used != dash) throw std::invalid_argument("v");
    const std::string d = text.substr(dash + 1);
    const long long parsed = std::stoll(d, &used);
    if (used != d.size() || parsed < 0) throw std::invalid_argument("d");
    c.d = static_cast<std::size_t>(parsed);
  } catch (const std::exception&) {
    throw ConfigError("noise condition '" + text + "' is not of the form v-d");
  }
  if (c.v < 0.0) throw ConfigError("noise condition '" + text + "': negative v");
  return c;
}

template <typename T>
void mask_bins(std::span<T> sample, std::size_t offset, std::size_t length) {
  const std::size_t end = std::min(sample.size(), offset + length);
  for (std::size_t i = std::min(offset, sample.size()); i < end; ++i) sample[i] = T(0);
}

template <typename T>
void augment(std::span<T> sample, const AugmentConfig& config, Rng& rng) {
  config.validate(sample.size());
  if (sample.empty()) return;

  if (rng.uniform() < config.probability) {
    double mean = 0.0;
    for (auto v : sample) mean += v;
    mean /= static_cast<double>(sample.size());
    double var = 0.0;
    for (auto v : sample) var += (v - mean) * (v - mean);
    const double stddev = std::sqrt(var / static_cast<double>(sample.size()));
    for (auto& v : sample) v = static_cast<T>(v + config.v * 10.0 * rng.gaussian(0.0, stddev));
  }
  if (rng.uniform() < config.probability) {
    const double factor = rng.gaussian(1.0, config.v);
    for (auto& v : sample) v = static_cast<T>(v * factor);
  }
  if (rng.uniform() < config.probability) {
    const std::size_t offset = rng.uniform_index(sample.size() - config.d + 1);
    mask_bins(sample, offset, config.d);
  }
}

template std::vector<float> normalize_01<float>(std::span<const float>);
template std::vector<double> normalize_01<double>(std::span<const double>);
template void augment<float>(std::span<float>, const AugmentConfig&, Rng&);
template void augment<double>(std::span<double>, const AugmentConfig&, Rng&);
template void mask_bins<float>(std::span<float>, std::size_t, std::size_t);
template void mask_bins<double>(std::span<double>, std::size_t, std::size_t);

}  // namespace pmn::signal
