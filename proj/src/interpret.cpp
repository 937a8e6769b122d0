// SPDX-License-Identifier: Apache-2.0
#include "megnet/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <sstream>

#include "megnet/error.hpp"

namespace megnet {

namespace {

void require_lf(const ModelConfig& config, const ModelParams& params, std::size_t class_idx) {
  if (config.variant != Variant::LF) fail(ErrorCode::Parameter, "interpretation is defined for LF models only");
  params.check_shapes(config);
  if (class_idx >= config.n_classes)
    fail(ErrorCode::Parameter, "class index " + std::to_string(class_idx) + " out of range");
}

double class_weight(const ModelConfig& config, const ModelParams& params, std::size_t c, std::size_t p,
                    std::size_t class_idx) {
  return params.out_weights(c * config.pooled_length() + p, class_idx);
}

std::vector<double> component_sums(const ModelConfig& config, const ModelParams& params, std::size_t class_idx) {
  std::vector<double> sums(config.n_latent, 0.0);
  for (std::size_t c = 0; c < config.n_latent; ++c)
    for (std::size_t p = 0; p < config.pooled_length(); ++p) sums[c] += class_weight(config, params, c, p, class_idx);
  return sums;
}

}  // namespace

double pooled_latency(const ModelConfig& config, std::size_t pooled_idx, double sample_rate_hz) {
  const double centre = static_cast<double>(pooled_idx * config.pool_stride) +
                        0.5 * static_cast<double>(config.pool_factor - 1) +
                        0.5 * static_cast<double>(config.filter_len - 1);
  return centre / sample_rate_hz;
}

std::optional<ComponentAttribution> top_component_evoked(const ModelConfig& config, const ModelParams& params,
                                                         std::size_t class_idx, double sample_rate_hz) {
  require_lf(config, params, class_idx);
  std::optional<ComponentAttribution> best;
  for (std::size_t c = 0; c < config.n_latent; ++c) {
    for (std::size_t p = 0; p < config.pooled_length(); ++p) {
      const double w = class_weight(config, params, c, p, class_idx);
      if (w > 0.0 && (!best || w > best->weight_value)) {
        best = ComponentAttribution{class_idx, c, p, pooled_latency(config, p, sample_rate_hz), w};
      }
    }
  }
  return best;
}

InducedAttribution top_component_induced(const ModelConfig& config, const ModelParams& params, std::size_t class_idx) {
  require_lf(config, params, class_idx);
  const auto sums = component_sums(config, params, class_idx);
  InducedAttribution out;
  for (std::size_t c = 0; c < sums.size(); ++c) {
    if (sums[c] > 0.0 && (!out.positive || sums[c] > out.positive->weight_value))
      out.positive = ComponentAttribution{class_idx, c, 0, 0.0, sums[c]};
    if (sums[c] < 0.0 && (!out.negative || sums[c] < out.negative->weight_value))
      out.negative = ComponentAttribution{class_idx, c, 0, 0.0, sums[c]};
  }
  return out;
}

Tensor sensor_covariance(const EpochSet& data) {
  if (data.trials() == 0) fail(ErrorCode::Parameter, "pattern estimation needs data");
  const std::size_t n = data.channels(), t = data.times(), total = data.trials() * t;
  if (total < 2) fail(ErrorCode::InsufficientSamples, "covariance needs at least two samples");
  std::vector<double> mean(n, 0.0);
  for (std::size_t i = 0; i < data.trials(); ++i) {
    const auto e = data.epoch(i);
    for (std::size_t ch = 0; ch < n; ++ch)
      for (std::size_t s = 0; s < t; ++s) mean[ch] += e[ch * t + s];
  }
  for (double& m : mean) m /= static_cast<double>(total);
  Tensor cov({n, n});
  std::vector<double> centred(n * t);
  for (std::size_t i = 0; i < data.trials(); ++i) {
    const auto e = data.epoch(i);
    for (std::size_t ch = 0; ch < n; ++ch)
      for (std::size_t s = 0; s < t; ++s) centred[ch * t + s] = e[ch * t + s] - mean[ch];
    for (std::size_t a = 0; a < n; ++a) {
      const double* ra = centred.data() + a * t;
      for (std::size_t b = a; b < n; ++b) {
        const double* rb = centred.data() + b * t;
        double s = 0.0;
        for (std::size_t k = 0; k < t; ++k) s += ra[k] * rb[k];
        cov(a, b) += s;
      }
    }
  }
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a; b < n; ++b) {
      cov(a, b) /= static_cast<double>(total - 1);
      cov(b, a) = cov(a, b);
    }
  ensure_finite(cov, "sensor covariance");
  return cov;
}

ActivationPattern activation_pattern(const Tensor& spatial, const Tensor& sensor_cov, std::size_t component_idx,
                                     bool use_precision, double ridge) {
  if (spatial.rank() != 2) fail(ErrorCode::Dimension, "spatial filters must be n x k");
  const std::size_t n = spatial.dim(0), k = spatial.dim(1);
  if (sensor_cov.rank() != 2 || sensor_cov.dim(0) != n || sensor_cov.dim(1) != n)
    fail(ErrorCode::Dimension, "covariance " + shape_string(sensor_cov.shape()) + " does not match filters " +
                                   shape_string(spatial.shape()));
  if (component_idx >= k) fail(ErrorCode::Parameter, "component index out of range");
  if (ridge < 0.0) fail(ErrorCode::Parameter, "ridge must be >= 0");

  ActivationPattern out;
  out.component_idx = component_idx;
  out.used_precision = use_precision;
  out.filter = Tensor({n});
  for (std::size_t i = 0; i < n; ++i) out.filter[i] = spatial(i, component_idx);

  const Tensor cw = matmul(sensor_cov, spatial);  // n x k
  out.pattern = Tensor({n});
  if (!use_precision) {
    for (std::size_t i = 0; i < n; ++i) out.pattern[i] = cw(i, component_idx);
  } else {
    const Tensor cov_s = matmul(transpose(spatial), cw);
    const Tensor prec = sym_inverse(cov_s, ridge);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) s += cw(i, j) * prec(j, component_idx);
      out.pattern[i] = s;
    }
  }
  ensure_finite(out.pattern, "activation pattern");
  return out;
}

ActivationPattern activation_pattern(const Tensor& spatial, const EpochSet& data, std::size_t component_idx,
                                     bool use_precision, double ridge) {
  return activation_pattern(spatial, sensor_covariance(data), component_idx, use_precision, ridge);
}

SpectrumEstimate filter_spectrum(std::span<const double> taps, double sample_rate_hz, std::size_t n_freqs) {
  if (taps.empty()) fail(ErrorCode::Parameter, "filter has no taps");
  if (!(sample_rate_hz > 0.0)) fail(ErrorCode::Parameter, "sample rate must be positive");
  if (n_freqs < 2) fail(ErrorCode::Parameter, "need at least two frequencies");
  SpectrumEstimate out;
  out.freqs_hz = Tensor({n_freqs});
  out.power = Tensor({n_freqs});
  std::size_t peak = 0;
  for (std::size_t f = 0; f < n_freqs; ++f) {
    const double hz = 0.5 * sample_rate_hz * static_cast<double>(f) / static_cast<double>(n_freqs - 1);
    const double omega = 2.0 * std::numbers::pi * hz / sample_rate_hz;
    std::complex<double> h = 0.0;
    for (std::size_t j = 0; j < taps.size(); ++j) h += taps[j] * std::polar(1.0, -omega * static_cast<double>(j));
    out.freqs_hz[f] = hz;
    out.power[f] = std::norm(h);
    if (out.power[f] > out.power[peak]) peak = f;
  }
  out.peak_freq_hz = out.freqs_hz[peak];
  return out;
}

std::vector<std::size_t> least_informative_components(const ModelConfig& config, const ModelParams& params,
                                                      std::size_t n) {
  require_lf(config, params, 0);
  if (n > config.n_latent)
    fail(ErrorCode::Parameter, "asked for " + std::to_string(n) + " components but the model has " +
                                   std::to_string(config.n_latent));
  std::vector<double> mass(config.n_latent, 0.0);
  for (std::size_t c = 0; c < config.n_latent; ++c)
    for (std::size_t p = 0; p < config.pooled_length(); ++p)
      for (std::size_t cls = 0; cls < config.n_classes; ++cls) mass[c] += std::abs(class_weight(config, params, c, p, cls));
  std::vector<std::size_t> order(config.n_latent);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mass[a] < mass[b]; });
  order.resize(n);
  return order;
}

const char* to_string(InterpretMode m) { return m == InterpretMode::Evoked ? "evoked" : "induced"; }

InterpretMode parse_interpret_mode(const std::string& name) {
  if (name == "evoked") return InterpretMode::Evoked;
  if (name == "induced") return InterpretMode::Induced;
  fail(ErrorCode::Parameter, "unknown interpretation mode '" + name + "' (expected evoked or induced)");
}

InterpretationReport interpret(const ModelConfig& config, const ModelParams& params, const EpochSet& data,
                               const InterpretOptions& options) {
  if (config.variant != Variant::LF) fail(ErrorCode::Parameter, "interpretation is defined for LF models only");
  if (data.channels() != config.n_channels)
    fail(ErrorCode::Dimension, "data has " + std::to_string(data.channels()) + " channels, model expects " +
                                   std::to_string(config.n_channels));
  InterpretationReport report;
  report.mode = options.mode;
  report.sample_rate_hz = data.sample_rate_hz;
  const Tensor cov = sensor_covariance(data);
  for (std::size_t cls = 0; cls < config.n_classes; ++cls) {
    ClassInterpretation ci;
    ci.class_idx = cls;
    if (options.mode == InterpretMode::Evoked) {
      ci.top = top_component_evoked(config, params, cls, data.sample_rate_hz);
    } else {
      auto induced = top_component_induced(config, params, cls);
      ci.top = induced.positive;
      ci.negative = induced.negative;
    }
    if (ci.top) {
      ci.pattern = activation_pattern(params.spatial, cov, ci.top->component_idx, options.use_precision, options.ridge);
      const auto taps = std::span<const double>(params.temporal.data() + ci.top->component_idx * config.filter_len,
                                                config.filter_len);
      ci.spectrum = filter_spectrum(taps, data.sample_rate_hz, options.n_freqs);
    }
    report.classes.push_back(std::move(ci));
  }
  report.least_informative = least_informative_components(config, params, std::min(options.n_least, config.n_latent));
  return report;
}

std::string patterns_csv(const InterpretationReport& report) {
  std::ostringstream out;
  out << std::setprecision(17);
  std::size_t n = 0;
  for (const auto& c : report.classes)
    if (c.pattern) n = c.pattern->pattern.size();
  out << "class,component";
  for (std::size_t i = 0; i < n; ++i) out << ",ch" << i;
  out << '\n';
  for (const auto& c : report.classes) {
    if (!c.pattern) continue;
    out << c.class_idx << ',' << c.pattern->component_idx;
    for (double v : c.pattern->pattern.values()) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

std::string spectra_csv(const InterpretationReport& report) {
  std::ostringstream out;
  out << std::setprecision(17) << "class,component,freq_hz,power\n";
  for (const auto& c : report.classes) {
    if (!c.spectrum) continue;
    for (std::size_t f = 0; f < c.spectrum->power.size(); ++f)
      out << c.class_idx << ',' << c.top->component_idx << ',' << c.spectrum->freqs_hz[f] << ','
          << c.spectrum->power[f] << '\n';
  }
  return out.str();
}

std::string summary_text(const InterpretationReport& report) {
  std::ostringstream out;
  out << "mode: " << to_string(report.mode) << '\n';
  for (const auto& c : report.classes) {
    out << "class " << c.class_idx << ": ";
    if (!c.top) {
      out << "no positive contribution\n";
      continue;
    }
    out << "component " << c.top->component_idx << " weight " << c.top->weight_value;
    if (report.mode == InterpretMode::Evoked)
      out << " pooled_time " << c.top->pooled_time_idx << " latency " << c.top->latency_seconds << " s";
    if (c.negative) out << ", negative component " << c.negative->component_idx << " sum " << c.negative->weight_value;
    if (c.spectrum) out << ", spectral peak " << c.spectrum->peak_freq_hz << " Hz";
    out << '\n';
  }
  out << "least informative:";
  for (std::size_t c : report.least_informative) out << ' ' << c;
  out << '\n';
  return out.str();
}

}  // namespace megnet
