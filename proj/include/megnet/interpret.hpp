// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "megnet/epochset.hpp"
#include "megnet/model.hpp"
#include "megnet/tensor.hpp"

namespace megnet {

// Interpretation is only defined for LF networks; every entry point here
// rejects VAR models with ErrorCode::Parameter.

struct ComponentAttribution {
  std::size_t class_idx = 0;
  std::size_t component_idx = 0;
  std::size_t pooled_time_idx = 0;
  double latency_seconds = 0.0;  // centre of the receptive field, from epoch start
  double weight_value = 0.0;     // single weight (evoked) or summed weight (induced)
};

// Maximum positive output weight of the class over (component, pooled time).
// Ties go to the lexicographically lowest (component, time). Empty when no
// weight of the class is positive.
std::optional<ComponentAttribution> top_component_evoked(const ModelConfig& config, const ModelParams& params,
                                                         std::size_t class_idx, double sample_rate_hz);

struct InducedAttribution {
  std::optional<ComponentAttribution> positive;  // largest positive summed weight
  std::optional<ComponentAttribution> negative;  // most negative summed weight
};
InducedAttribution top_component_induced(const ModelConfig& config, const ModelParams& params, std::size_t class_idx);

// Seconds from epoch start to the centre of the input samples feeding pooled
// output `pooled_idx`.
double pooled_latency(const ModelConfig& config, std::size_t pooled_idx, double sample_rate_hz);

struct ActivationPattern {
  Tensor pattern;  // n
  Tensor filter;   // n, the spatial filter it came from
  std::size_t component_idx = 0;
  bool used_precision = false;
};

// Sensor covariance pooled over every sample of every trial (one global mean
// per channel, divisor N*t - 1).
Tensor sensor_covariance(const EpochSet& data);

// pattern = cov_x * w_c by default; with use_precision, column c of
// cov_x * W * inv(cov_s) where cov_s = W^T cov_x W + ridge * I.
ActivationPattern activation_pattern(const Tensor& spatial, const Tensor& sensor_cov, std::size_t component_idx,
                                     bool use_precision = false, double ridge = 0.0);
ActivationPattern activation_pattern(const Tensor& spatial, const EpochSet& data, std::size_t component_idx,
                                     bool use_precision = false, double ridge = 0.0);

struct SpectrumEstimate {
  Tensor freqs_hz;
  Tensor power;
  double peak_freq_hz = 0.0;  // first maximum on the grid
};

// |sum_j taps[j] exp(-i 2 pi f j / fs)|^2 on n_freqs uniform points of [0, fs/2].
SpectrumEstimate filter_spectrum(std::span<const double> taps, double sample_rate_hz, std::size_t n_freqs = 256);

// Components ordered by ascending sum over classes and pooled time of |w|,
// lowest index first on ties; returns the first n.
std::vector<std::size_t> least_informative_components(const ModelConfig& config, const ModelParams& params,
                                                      std::size_t n = 5);

enum class InterpretMode { Evoked, Induced };
const char* to_string(InterpretMode m);
InterpretMode parse_interpret_mode(const std::string& name);

struct ClassInterpretation {
  std::size_t class_idx = 0;
  std::optional<ComponentAttribution> top;       // component used for the pattern
  std::optional<ComponentAttribution> negative;  // induced mode only
  std::optional<ActivationPattern> pattern;
  std::optional<SpectrumEstimate> spectrum;
};

struct InterpretOptions {
  InterpretMode mode = InterpretMode::Evoked;
  bool use_precision = false;
  double ridge = 1e-6;
  std::size_t n_least = 5;
  std::size_t n_freqs = 256;
};

struct InterpretationReport {
  InterpretMode mode = InterpretMode::Evoked;
  double sample_rate_hz = 0.0;
  std::vector<ClassInterpretation> classes;
  std::vector<std::size_t> least_informative;
};

InterpretationReport interpret(const ModelConfig& config, const ModelParams& params, const EpochSet& data,
                               const InterpretOptions& options);

// class,component,<channel 0>,...  one row per class with a pattern
std::string patterns_csv(const InterpretationReport& report);
// class,component,freq_hz,power  long format
std::string spectra_csv(const InterpretationReport& report);
std::string summary_text(const InterpretationReport& report);

}  // namespace megnet
