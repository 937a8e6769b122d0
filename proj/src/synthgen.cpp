// SPDX-License-Identifier: Apache-2.0
#include "megnet/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "megnet/error.hpp"

namespace megnet {

namespace {

constexpr std::uint64_t kMixingStream = 0x6d6978696e67ULL;  // "mixing"
constexpr std::uint64_t kSubjectStream = 0x7375626aULL;     // "subj"
constexpr std::uint64_t kTrialStream = 0x747269616cULL;     // "trial"

std::size_t burn_in_length(std::size_t order) { return order == 0 ? 0 : std::max<std::size_t>(10 * order, 200); }

// Simulates `specs` jointly for n_times samples; rows of the result are sources.
Tensor simulate_joint(std::span<const LatentSourceSpec> specs, std::span<const Coupling> couplings,
                      std::size_t n_times, std::size_t onset, int class_idx, Rng& rng) {
  const std::size_t k = specs.size();
  std::size_t order = couplings.empty() ? 0 : 1;
  for (const auto& s : specs) order = std::max(order, s.ar_coeffs.size());
  const std::size_t burn = burn_in_length(order);
  const std::size_t total = burn + n_times;

  std::vector<double> state(k * total, 0.0);
  auto at = [&](std::size_t j, std::size_t t) -> double& { return state[j * total + t]; };
  for (std::size_t t = 0; t < total; ++t) {
    const bool stimulus = t >= burn + onset;
    for (std::size_t j = 0; j < k; ++j) {
      const auto& spec = specs[j];
      double v = 0.0;
      for (std::size_t l = 1; l <= spec.ar_coeffs.size() && l <= t; ++l) v += spec.ar_coeffs[l - 1] * at(j, t - l);
      const double std = spec.innovation_std * (stimulus ? spec.gain(class_idx) : 1.0);
      at(j, t) = v + std * rng.normal();
    }
    if (t > 0) {
      for (const auto& c : couplings) at(c.to, t) += c.coeff * at(c.from, t - 1);
    }
  }

  Tensor out({k, n_times});
  for (std::size_t j = 0; j < k; ++j) {
    const auto& spec = specs[j];
    for (std::size_t t = 0; t < n_times; ++t) out(j, t) = at(j, burn + t);
    if (!spec.evoked_waveform.empty() && spec.evoked_in(class_idx)) {
      for (std::size_t t = onset; t < n_times; ++t) out(j, t) += spec.evoked_waveform[t - onset];
    }
  }
  return out;
}

double mean_square(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

double LatentSourceSpec::gain(int cls) const {
  if (class_gain.empty()) return 1.0;
  return class_gain.at(static_cast<std::size_t>(cls));
}

bool LatentSourceSpec::evoked_in(int cls) const {
  return std::find(evoked_classes.begin(), evoked_classes.end(), cls) != evoked_classes.end();
}

bool LatentSourceSpec::informative() const {
  if (!evoked_waveform.empty() && !evoked_classes.empty()) return true;
  return std::any_of(class_gain.begin(), class_gain.end(), [&](double g) { return g != class_gain.front(); });
}

void LatentSourceSpec::validate(int n_classes) const {
  if (!(innovation_std > 0.0)) fail(ErrorCode::Parameter, "innovation_std must be > 0");
  if (!class_gain.empty() && class_gain.size() != static_cast<std::size_t>(n_classes)) {
    fail(ErrorCode::Parameter, "class_gain needs one entry per class");
  }
  for (double g : class_gain)
    if (!(g > 0.0)) fail(ErrorCode::Parameter, "class_gain entries must be > 0");
  for (int c : evoked_classes)
    if (c < 0 || c >= n_classes) fail(ErrorCode::Parameter, "evoked class out of range");
  if (!ar_is_stable(ar_coeffs)) fail(ErrorCode::Stability, "AR coefficients have a root on or outside the unit circle");
}

void GenConfig::validate() const {
  if (n_channels == 0 || n_latent == 0 || n_times == 0) fail(ErrorCode::Parameter, "sizes must be >= 1");
  if (n_latent >= n_channels) fail(ErrorCode::Parameter, "n_latent must be smaller than n_channels");
  if (n_classes < 1 || n_subjects < 1 || trials_per_class_per_subject < 1) fail(ErrorCode::Parameter, "counts must be >= 1");
  if (n_classes > 65535 || n_subjects > 65535) fail(ErrorCode::Parameter, "class and subject ids must fit in 16 bits");
  if (!(sample_rate_hz > 0.0)) fail(ErrorCode::Parameter, "sample rate must be positive");
  if (!(noise_std >= 0.0)) fail(ErrorCode::Parameter, "noise_std must be >= 0");
  if (!(subject_mixing_jitter >= 0.0)) fail(ErrorCode::Parameter, "subject_mixing_jitter must be >= 0");
  if (sources.size() != n_latent) fail(ErrorCode::Parameter, "need one source spec per latent source");
  if (base_mixing.shape() != Shape{n_channels, n_latent}) {
    fail(ErrorCode::Dimension, "base_mixing must be n_channels x n_latent, got " + shape_string(base_mixing.shape()));
  }
  for (std::size_t j = 0; j < n_latent; ++j) {
    double norm = 0.0;
    for (std::size_t i = 0; i < n_channels; ++i) norm += base_mixing(i, j) * base_mixing(i, j);
    if (std::abs(std::sqrt(norm) - 1.0) > 1e-9) fail(ErrorCode::Parameter, "base_mixing columns must have unit norm");
  }
  for (const auto& s : sources) {
    s.validate(static_cast<int>(n_classes));
    if (!s.evoked_waveform.empty() && s.evoked_waveform.size() != n_times) {
      fail(ErrorCode::Dimension, "evoked waveform length must equal n_times");
    }
  }
  for (const auto& c : couplings) {
    if (c.from >= n_latent || c.to >= n_latent || c.from >= c.to) {
      fail(ErrorCode::Parameter, "couplings must satisfy from < to < n_latent");
    }
  }
}

bool ar_is_stable(const std::vector<double>& coeffs) {
  // Step-down recursion on A(z) = 1 - sum a_l z^-l: stable iff every
  // reflection coefficient has magnitude < 1.
  std::vector<double> a(coeffs.size() + 1);
  a[0] = 1.0;
  for (std::size_t l = 0; l < coeffs.size(); ++l) a[l + 1] = -coeffs[l];
  for (std::size_t p = coeffs.size(); p >= 1; --p) {
    const double k = a[p];
    if (!(std::abs(k) < 1.0)) return false;
    std::vector<double> next(p);
    for (std::size_t i = 0; i < p; ++i) next[i] = (a[i] - k * a[p - i]) / (1.0 - k * k);
    a = std::move(next);
  }
  return true;
}

std::vector<double> ar2_resonator(double f0_hz, double fs_hz, double radius) {
  return {2.0 * radius * std::cos(2.0 * std::numbers::pi * f0_hz / fs_hz), -radius * radius};
}

double ar_unit_variance(const std::vector<double>& coeffs) {
  if (!ar_is_stable(coeffs)) fail(ErrorCode::Stability, "AR coefficients are not stable");
  const std::size_t order = coeffs.size();
  std::vector<double> h{1.0};
  double total = 1.0;
  std::size_t quiet = 0;
  for (std::size_t t = 1; t < 1000000 && quiet < 64; ++t) {
    double v = 0.0;
    for (std::size_t l = 1; l <= order && l <= t; ++l) v += coeffs[l - 1] * h[t - l];
    h.push_back(v);
    total += v * v;
    quiet = (v * v < 1e-20 * total) ? quiet + 1 : 0;
  }
  return total;
}

std::vector<double> hann_bump(std::size_t length, double centre, double width, double amplitude) {
  std::vector<double> w(length, 0.0);
  for (std::size_t t = 0; t < length; ++t) {
    const double x = (static_cast<double>(t) - centre) / width;
    if (std::abs(x) < 0.5) w[t] = amplitude * 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * x));
  }
  return w;
}

Tensor simulate_source(const LatentSourceSpec& spec, std::size_t n_times, int class_idx, Rng& rng, std::size_t onset) {
  int n_classes = std::max<int>(static_cast<int>(spec.class_gain.size()), class_idx + 1);
  for (int c : spec.evoked_classes) n_classes = std::max(n_classes, c + 1);
  spec.validate(n_classes);
  if (n_times <= spec.ar_coeffs.size()) fail(ErrorCode::Parameter, "n_times must exceed the AR order");
  if (onset > n_times) fail(ErrorCode::Parameter, "onset beyond the end of the trial");
  if (!spec.evoked_waveform.empty() && spec.evoked_waveform.size() < n_times - onset) {
    fail(ErrorCode::Dimension, "evoked waveform shorter than the post-onset window");
  }
  Tensor joint = simulate_joint(std::span(&spec, 1), {}, n_times, onset, class_idx, rng);
  return joint.reshaped({n_times});
}

Tensor simulate_sources(const GenConfig& config, int class_idx, Rng& rng) {
  return simulate_joint(config.sources, config.couplings, config.total_times(), config.baseline_samples, class_idx, rng);
}

void normalize_columns(Tensor& mixing) {
  for (std::size_t j = 0; j < mixing.dim(1); ++j) {
    double norm = 0.0;
    for (std::size_t i = 0; i < mixing.dim(0); ++i) norm += mixing(i, j) * mixing(i, j);
    norm = std::sqrt(norm);
    if (!(norm > 0.0)) fail(ErrorCode::Singular, "zero mixing column");
    for (std::size_t i = 0; i < mixing.dim(0); ++i) mixing(i, j) /= norm;
  }
}

Tensor random_mixing(std::size_t n_channels, std::size_t n_latent, Rng& rng) {
  Tensor m = rng_normal(rng, 0.0, 1.0, {n_channels, n_latent});
  normalize_columns(m);
  return m;
}

Tensor subject_mixing(const GenConfig& config, std::size_t subject, Rng& rng) {
  if (subject >= config.n_subjects) fail(ErrorCode::Parameter, "subject index out of range");
  if (config.subject_mixing_jitter == 0.0) return config.base_mixing;
  // Perturbation per column has expected norm `jitter` relative to the unit
  // base column, independent of the channel count.
  const double scale = config.subject_mixing_jitter / std::sqrt(static_cast<double>(config.n_channels));
  Tensor m = config.base_mixing;
  for (double& v : m.values()) v += scale * rng.normal();
  normalize_columns(m);
  return m;
}

Tensor subject_mixing(const GenConfig& config, std::size_t subject) {
  Rng rng = Rng::substream(config.seed, {kSubjectStream, subject});
  return subject_mixing(config, subject, rng);
}

EpochSet generate(const GenConfig& config) {
  config.validate();
  const std::size_t n = config.n_channels, k = config.n_latent, t = config.total_times();
  const std::size_t per_subject = config.n_classes * config.trials_per_class_per_subject;
  const std::size_t trials = config.n_subjects * per_subject;

  EpochSet set;
  set.sample_rate_hz = static_cast<float>(config.sample_rate_hz);
  set.n_classes = static_cast<int>(config.n_classes);
  set.epochs = Tensor({trials, n, t});
  set.labels.resize(trials);
  set.subjects.resize(trials);

  for (std::size_t s = 0; s < config.n_subjects; ++s) {
    const Tensor mixing = subject_mixing(config, s);
    for (std::size_t i = 0; i < per_subject; ++i) {
      const std::size_t trial = s * per_subject + i;
      const int cls = static_cast<int>(i % config.n_classes);
      Rng rng = Rng::substream(config.seed, {kTrialStream, s, i});
      const Tensor sources = simulate_sources(config, cls, rng);
      auto out = set.epochs.slice(trial);
      for (std::size_t ch = 0; ch < n; ++ch) {
        double* row = out.data() + ch * t;
        for (std::size_t j = 0; j < k; ++j) {
          const double c = mixing(ch, j);
          const double* src = sources.data() + j * t;
          for (std::size_t x = 0; x < t; ++x) row[x] += c * src[x];
        }
        if (config.noise_std > 0.0) {
          for (std::size_t x = 0; x < t; ++x) row[x] += config.noise_std * rng.normal();
        }
      }
      set.labels[trial] = cls;
      set.subjects[trial] = static_cast<int>(s);
    }
  }
  ensure_finite(set.epochs, "generated epochs");
  return set;
}

SnrBreakdown analytic_snr(const GenConfig& config) {
  config.validate();
  const std::size_t n = config.n_channels, k = config.n_latent, t = config.n_times;
  const double nd = static_cast<double>(n);
  SnrBreakdown b;
  b.sensor_power = config.noise_std * config.noise_std;
  for (std::size_t c = 0; c < config.n_classes; ++c) {
    // Evoked component of this class at every channel.
    std::vector<double> evoked(n * t, 0.0);
    bool any = false;
    for (std::size_t j = 0; j < k; ++j) {
      const auto& spec = config.sources[j];
      const int cls = static_cast<int>(c);
      const double var = spec.innovation_std * spec.innovation_std * spec.gain(cls) * spec.gain(cls) *
                         ar_unit_variance(spec.ar_coeffs);
      // Unit-norm columns: channel-averaged power of a source is var / n.
      const bool modulated = std::any_of(spec.class_gain.begin(), spec.class_gain.end(),
                                         [&](double g) { return g != spec.class_gain.front(); });
      if (modulated) {
        b.signal_power += var / nd / static_cast<double>(config.n_classes);
      } else {
        b.background_power += var / nd / static_cast<double>(config.n_classes);
      }
      if (!spec.evoked_waveform.empty() && spec.evoked_in(cls)) {
        any = true;
        for (std::size_t ch = 0; ch < n; ++ch)
          for (std::size_t x = 0; x < t; ++x) evoked[ch * t + x] += config.base_mixing(ch, j) * spec.evoked_waveform[x];
      }
    }
    if (any) b.signal_power += mean_square(evoked) / static_cast<double>(config.n_classes);
  }
  return b;
}

double calibrate_noise_std(const GenConfig& config, double target_snr) {
  if (!(target_snr > 0.0)) fail(ErrorCode::Parameter, "target SNR must be positive");
  GenConfig probe = config;
  probe.noise_std = 0.0;
  const SnrBreakdown b = analytic_snr(probe);
  const double needed = b.signal_power / target_snr - b.background_power;
  if (!(needed >= 0.0)) {
    fail(ErrorCode::Parameter, "background activity alone already pushes SNR below the target");
  }
  return std::sqrt(needed);
}

GenConfig evoked_preset(std::uint64_t seed, const EvokedPresetOptions& opt) {
  GenConfig cfg;
  cfg.seed = seed;
  cfg.n_channels = opt.n_channels;
  cfg.n_latent = 8;
  cfg.n_times = opt.n_times;
  cfg.sample_rate_hz = 125.0;
  cfg.baseline_samples = 38;
  cfg.n_classes = 5;
  cfg.n_subjects = opt.n_subjects;
  cfg.trials_per_class_per_subject = opt.trials_per_class_per_subject;
  cfg.subject_mixing_jitter = opt.jitter;

  const double fs = cfg.sample_rate_hz;
  for (int c = 0; c < 5; ++c) {
    LatentSourceSpec s;
    s.ar_coeffs = {0.9};
    s.innovation_std = std::sqrt(1.0 - 0.81);
    const double latency_s = 0.08 + 0.035 * c;
    s.evoked_waveform = hann_bump(cfg.n_times, latency_s * fs, 0.12 * fs, 1.0);
    s.evoked_classes = {c};
    cfg.sources.push_back(s);
  }
  LatentSourceSpec alpha;
  alpha.ar_coeffs = ar2_resonator(10.0, fs, 0.95);
  alpha.innovation_std = 1.0 / std::sqrt(ar_unit_variance(alpha.ar_coeffs)) * 2.0;
  alpha.peak_freq_hz = 10.0;
  cfg.sources.push_back(alpha);
  LatentSourceSpec artifact;
  artifact.ar_coeffs = {0.98};
  artifact.innovation_std = std::sqrt(1.0 - 0.98 * 0.98) * 4.0;
  cfg.sources.push_back(artifact);
  LatentSourceSpec beta;
  beta.ar_coeffs = ar2_resonator(20.0, fs, 0.9);
  beta.innovation_std = 1.0 / std::sqrt(ar_unit_variance(beta.ar_coeffs));
  beta.peak_freq_hz = 20.0;
  cfg.sources.push_back(beta);

  Rng rng = Rng::substream(seed, {kMixingStream});
  cfg.base_mixing = random_mixing(cfg.n_channels, cfg.n_latent, rng);

  // Scale the evoked amplitude so that, with sensor noise carrying a quarter
  // of the noise power, the channel-level SNR equals the target.
  GenConfig probe = cfg;
  probe.noise_std = 0.0;
  const SnrBreakdown unit = analytic_snr(probe);
  const double noise_total = unit.background_power / 0.75;
  const double amplitude = std::sqrt(opt.target_snr * noise_total / unit.signal_power);
  for (int c = 0; c < 5; ++c)
    for (double& v : cfg.sources[static_cast<std::size_t>(c)].evoked_waveform) v *= amplitude;
  cfg.noise_std = calibrate_noise_std(cfg, opt.target_snr);
  return cfg;
}

GenConfig induced_preset(std::uint64_t seed, const InducedPresetOptions& opt) {
  GenConfig cfg;
  cfg.seed = seed;
  cfg.n_channels = opt.n_channels;
  cfg.n_latent = 6;
  cfg.n_times = opt.n_times;
  cfg.sample_rate_hz = 125.0;
  cfg.baseline_samples = 38;
  cfg.n_classes = 3;
  cfg.n_subjects = opt.n_subjects;
  cfg.trials_per_class_per_subject = opt.trials_per_class_per_subject;
  cfg.subject_mixing_jitter = opt.jitter;
  const double fs = cfg.sample_rate_hz;

  // Sources 0 and 1: 10 Hz rhythms desynchronized by class 1 and class 2.
  for (int side = 0; side < 2; ++side) {
    LatentSourceSpec mu;
    mu.ar_coeffs = ar2_resonator(opt.resonance_hz, fs, 0.96);
    mu.innovation_std = 1.0 / std::sqrt(ar_unit_variance(mu.ar_coeffs));
    mu.class_gain = {1.0, 1.0, 1.0};
    mu.class_gain[static_cast<std::size_t>(side + 1)] = opt.suppressed_gain;
    mu.peak_freq_hz = opt.resonance_hz;
    cfg.sources.push_back(mu);
  }
  LatentSourceSpec slow;
  slow.ar_coeffs = {0.95};
  slow.innovation_std = std::sqrt(1.0 - 0.95 * 0.95) * 1.5;
  cfg.sources.push_back(slow);
  LatentSourceSpec beta;
  beta.ar_coeffs = ar2_resonator(25.0, fs, 0.9);
  beta.innovation_std = 1.0 / std::sqrt(ar_unit_variance(beta.ar_coeffs));
  beta.peak_freq_hz = 25.0;
  cfg.sources.push_back(beta);
  LatentSourceSpec theta;
  theta.ar_coeffs = ar2_resonator(5.0, fs, 0.93);
  theta.innovation_std = 1.0 / std::sqrt(ar_unit_variance(theta.ar_coeffs));
  theta.peak_freq_hz = 5.0;
  cfg.sources.push_back(theta);
  LatentSourceSpec artifact;
  artifact.ar_coeffs = {0.98};
  artifact.innovation_std = std::sqrt(1.0 - 0.98 * 0.98) * 3.0;
  cfg.sources.push_back(artifact);

  Rng rng = Rng::substream(seed, {kMixingStream});
  cfg.base_mixing = random_mixing(cfg.n_channels, cfg.n_latent, rng);

  // Same split as the evoked preset: the rhythms are scaled against the
  // background so that sensor noise carries a quarter of the noise power.
  GenConfig probe = cfg;
  probe.noise_std = 0.0;
  const SnrBreakdown unit = analytic_snr(probe);
  const double amplitude = std::sqrt(opt.target_snr * unit.background_power / 0.75 / unit.signal_power);
  for (int side = 0; side < 2; ++side) cfg.sources[static_cast<std::size_t>(side)].innovation_std *= amplitude;
  cfg.noise_std = calibrate_noise_std(cfg, opt.target_snr);
  return cfg;
}

std::optional<std::size_t> evoked_source_of_class(const GenConfig& config, int class_idx) {
  for (std::size_t j = 0; j < config.sources.size(); ++j) {
    const auto& s = config.sources[j];
    if (!s.evoked_waveform.empty() && s.evoked_in(class_idx)) return j;
  }
  return std::nullopt;
}

std::vector<std::size_t> uninformative_sources(const GenConfig& config) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < config.sources.size(); ++j)
    if (!config.sources[j].informative()) out.push_back(j);
  return out;
}

}  // namespace megnet
