#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pmn/rng.hpp"
#include "pmn/tensor.hpp"

namespace pmn::signal {

/// Sampling setup: `length` samples at `rate_hz`; the spectrum keeps the
/// first length/2 bins, bin k <-> k * rate / length Hz.
struct SignalGeometry {
  std::size_t length = 2048;
  double rate_hz = 12000.0;

  std::size_t bins() const { return length / 2; }
  double bin_hz() const { return rate_hz / static_cast<double>(length); }
  double nyquist_hz() const { return rate_hz / 2.0; }
  std::size_t bin_of(double hz) const;
};

/// Spectral template of one machine state: harmonics of a meshing frequency,
/// optional amplitude modulation of one harmonic, broadband noise.
struct FaultSpec {
  int class_id = 0;
  std::string name;
  double mesh_hz = 750.0;
  std::vector<double> harmonic_amplitudes;  // amplitude of h * mesh_hz for h = 1, 2, ...
  std::size_t modulated_harmonic = 0;       // 1-based; 0 disables sidebands
  double sideband_spacing_hz = 0.0;
  double modulation_depth = 0.0;            // sidebands carry depth / 2 of the carrier
  double noise_std = 0.0;                   // time-domain Gaussian noise
  double amplitude_jitter = 0.0;            // per-sample factor U(1 - j, 1 + j) on every harmonic
  bool random_phase = true;
  std::size_t discriminative_harmonic = 0;  // 1-based harmonic that identifies the class

  // Throws ConfigError for negative amplitudes or components at/above Nyquist.
  void validate(const SignalGeometry& geometry) const;
  double discriminative_hz() const { return mesh_hz * static_cast<double>(discriminative_harmonic); }
};

/// Sum of harmonic sinusoids (one optionally amplitude modulated) plus noise.
std::vector<double> generate_signal(const FaultSpec& spec, const SignalGeometry& geometry, Rng& rng);

/// In-place iterative radix-2 FFT; length must be a power of two.
void fft(std::vector<std::complex<double>>& data);

/// Single-sided amplitude spectrum: 2/N * |X_k| for k in [0, N/2). A unit
/// sinusoid on bin k yields 1 at index k.
std::vector<double> to_spectrum(std::span<const double> signal);

/// (x - min) / (max - min); a constant input maps to all zeros.
template <typename T>
std::vector<T> normalize_01(std::span<const T> sample);

/// Noiseless, jitter-free normalized spectrum of `spec`.
std::vector<double> clean_template(const FaultSpec& spec, const SignalGeometry& geometry);

/// RandomAddNoise (x + 10 v N(0, std(x))), RandomScale (N(1, v) x) and
/// RandomMask (zero `d` consecutive bins), each applied with `probability`.
struct AugmentConfig {
  double v = 0.0;
  std::size_t d = 0;
  double probability = 0.5;

  void validate(std::size_t bins) const;
  std::string label() const;  // "v-d", e.g. "0.1-100"
};

/// Parses the "v-d" shorthand ("0-0", "0.2-200").
AugmentConfig parse_noise_condition(const std::string& text);

/// Applies AddNoise, Scale, Mask in that order. Each step draws one coin
/// and, when applied, its own randomness.
template <typename T>
void augment(std::span<T> sample, const AugmentConfig& config, Rng& rng);

/// Zeroes `length` bins starting at `offset` (clipped to the sample).
template <typename T>
void mask_bins(std::span<T> sample, std::size_t offset, std::size_t length);

}  // namespace pmn::signal
