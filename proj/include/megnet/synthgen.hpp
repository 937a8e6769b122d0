// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "megnet/epochset.hpp"
#include "megnet/rng.hpp"
#include "megnet/tensor.hpp"

namespace megnet {

// One latent source: a univariate AR process driven by Gaussian innovations,
// optionally carrying an evoked waveform on some classes and a per-class gain
// on the innovation std (induced power modulation).
struct LatentSourceSpec {
  std::vector<double> ar_coeffs;       // s[t] = sum_l ar_coeffs[l-1] * s[t-l] + w[t]
  double innovation_std = 1.0;
  std::vector<double> evoked_waveform; // post-onset samples; empty = none
  std::vector<int> evoked_classes;
  std::vector<double> class_gain;      // empty = 1 for every class
  std::optional<double> peak_freq_hz;

  double gain(int cls) const;
  bool evoked_in(int cls) const;
  bool informative() const;
  void validate(int n_classes) const;
};

// Directed lag-1 interaction: s_to[t] += coeff * s_from[t-1]. Requires
// from < to so the coupled system keeps the stability of its diagonal part.
struct Coupling {
  std::size_t from = 0;
  std::size_t to = 0;
  double coeff = 0.0;
};

struct GenConfig {
  std::size_t n_channels = 64;
  std::size_t n_latent = 8;
  std::size_t n_times = 125;          // post-stimulus samples
  std::size_t baseline_samples = 38;  // silent pre-stimulus prefix (~300 ms at 125 Hz)
  double sample_rate_hz = 125.0;
  std::vector<LatentSourceSpec> sources;
  std::vector<Coupling> couplings;
  Tensor base_mixing;                 // n_channels x n_latent, unit-norm columns
  double noise_std = 0.1;
  std::size_t n_subjects = 7;
  double subject_mixing_jitter = 0.0;
  std::size_t trials_per_class_per_subject = 300;
  std::size_t n_classes = 5;
  std::uint64_t seed = 0;

  std::size_t total_times() const { return baseline_samples + n_times; }
  void validate() const;
};

bool ar_is_stable(const std::vector<double>& coeffs);
// Coefficients of an AR(2) resonator with pole radius r at frequency f0.
std::vector<double> ar2_resonator(double f0_hz, double fs_hz, double radius);
// Variance of the stationary AR process driven by unit-variance innovations.
double ar_unit_variance(const std::vector<double>& coeffs);

// Hann window of `width` samples centred at `centre`, scaled to `amplitude`,
// in a buffer of `length` samples.
std::vector<double> hann_bump(std::size_t length, double centre, double width, double amplitude);

// Single source time course of `n_times` samples. Samples before `onset` use
// unit gain and no evoked waveform; the waveform is indexed from `onset`.
Tensor simulate_source(const LatentSourceSpec& spec, std::size_t n_times, int class_idx, Rng& rng,
                       std::size_t onset = 0);

// All sources of a config jointly (couplings included), k x total_times.
Tensor simulate_sources(const GenConfig& config, int class_idx, Rng& rng);

Tensor subject_mixing(const GenConfig& config, std::size_t subject, Rng& rng);
// Uses the per-subject stream derived from (config.seed, subject).
Tensor subject_mixing(const GenConfig& config, std::size_t subject);

// Trials are ordered subject-major; within a subject trial i has class
// i % n_classes. Each trial draws from the stream (seed, subject, trial).
EpochSet generate(const GenConfig& config);

struct SnrBreakdown {
  double signal_power = 0.0;      // evoked waveforms and class-modulated sources
  double background_power = 0.0;  // uninformative source activity
  double sensor_power = 0.0;      // noise_std^2
  double snr() const { return signal_power / (background_power + sensor_power); }
};

// Channel-averaged powers over the post-stimulus window, averaged over
// classes, using base_mixing. Couplings are ignored.
SnrBreakdown analytic_snr(const GenConfig& config);
double calibrate_noise_std(const GenConfig& config, double target_snr);

Tensor random_mixing(std::size_t n_channels, std::size_t n_latent, Rng& rng);
void normalize_columns(Tensor& mixing);

struct EvokedPresetOptions {
  std::size_t n_channels = 64;
  std::size_t n_times = 125;
  std::size_t n_subjects = 7;
  std::size_t trials_per_class_per_subject = 300;
  double target_snr = 1.0;
  double jitter = 1.0;
};

// Five evoked classes on sources 0..4 (Hann bumps at class-specific latencies),
// plus an uninformative 10 Hz rhythm, a large slow artifact source and a 20 Hz
// rhythm.
GenConfig evoked_preset(std::uint64_t seed, const EvokedPresetOptions& opt = {});

struct InducedPresetOptions {
  std::size_t n_channels = 64;
  std::size_t n_times = 125;
  std::size_t n_subjects = 7;
  std::size_t trials_per_class_per_subject = 100;
  double target_snr = 1.0;
  double jitter = 1.0;
  double resonance_hz = 10.0;
  double suppressed_gain = 0.3;
};

// Three classes: rest, and desynchronization of one of two 10 Hz sources.
GenConfig induced_preset(std::uint64_t seed, const InducedPresetOptions& opt = {});

// Index of the source that carries the evoked waveform of a class, if any.
std::optional<std::size_t> evoked_source_of_class(const GenConfig& config, int class_idx);

// Sources with no class information, in index order.
std::vector<std::size_t> uninformative_sources(const GenConfig& config);

}  // namespace megnet
