// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <complex>
#include <numbers>

#include "doctest.h"
#include "megnet/synthgen.hpp"
#include "support.hpp"

using namespace megnet;
using testing::error_of;

namespace {

// Periodogram peak frequency by direct DFT on a 0.1 Hz grid.
double periodogram_peak(std::span<const double> x, double fs) {
  double best_f = 0.0, best_p = -1.0;
  for (double f = 0.5; f < fs / 2; f += 0.1) {
    std::complex<double> s = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t)
      s += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * f * static_cast<double>(t) / fs);
    if (std::norm(s) > best_p) {
      best_p = std::norm(s);
      best_f = f;
    }
  }
  return best_f;
}

GenConfig tiny_config() {
  GenConfig cfg;
  cfg.n_channels = 6;
  cfg.n_latent = 2;
  cfg.n_times = 30;
  cfg.baseline_samples = 10;
  cfg.n_classes = 2;
  cfg.n_subjects = 3;
  cfg.trials_per_class_per_subject = 4;
  cfg.noise_std = 0.2;
  cfg.seed = 5;
  LatentSourceSpec a;
  a.ar_coeffs = {0.5};
  a.evoked_waveform = hann_bump(cfg.n_times, 10, 8, 2.0);
  a.evoked_classes = {1};
  LatentSourceSpec b;
  b.ar_coeffs = ar2_resonator(10, 125, 0.9);
  cfg.sources = {a, b};
  Rng rng(1);
  cfg.base_mixing = random_mixing(cfg.n_channels, cfg.n_latent, rng);
  return cfg;
}

}  // namespace

TEST_CASE("AR stability check") {
  CHECK(ar_is_stable({}));
  CHECK(ar_is_stable({0.9}));
  CHECK_FALSE(ar_is_stable({1.0}));
  CHECK_FALSE(ar_is_stable({-1.2}));
  CHECK(ar_is_stable(ar2_resonator(10, 125, 0.95)));
  CHECK_FALSE(ar_is_stable(ar2_resonator(10, 125, 1.01)));
  CHECK_FALSE(ar_is_stable({0.6, 0.5}));  // root at z > 1
  CHECK(ar_unit_variance({0.5}) == doctest::Approx(1.0 / (1.0 - 0.25)));
}

TEST_CASE("white source has no lag-1 correlation") {
  LatentSourceSpec spec;
  Rng rng(3);
  const Tensor s = simulate_source(spec, 10000, 0, rng);
  double num = 0.0, den = 0.0, mean = 0.0;
  for (double v : s.values()) mean += v;
  mean /= static_cast<double>(s.size());
  for (std::size_t t = 0; t < s.size(); ++t) {
    den += (s[t] - mean) * (s[t] - mean);
    if (t > 0) num += (s[t] - mean) * (s[t - 1] - mean);
  }
  CHECK(std::abs(num / den) < 0.05);
}

TEST_CASE("AR(2) resonator peaks at its design frequency") {
  LatentSourceSpec spec;
  spec.ar_coeffs = ar2_resonator(10.0, 125.0, 0.95);
  Rng rng(8);
  const Tensor s = simulate_source(spec, 10000, 0, rng);
  CHECK(std::abs(periodogram_peak(s.values(), 125.0) - 10.0) <= 1.0);
}

TEST_CASE("noiseless evoked source reproduces its waveform") {
  LatentSourceSpec spec;
  spec.ar_coeffs = {0.7};
  spec.innovation_std = 1e-300;
  spec.evoked_waveform.assign(50, 0.0);
  spec.evoked_waveform[20] = 1.0;
  spec.evoked_classes = {0};
  Rng rng(1);
  const Tensor s = simulate_source(spec, 50, 0, rng);
  for (std::size_t t = 0; t < 50; ++t) CHECK(s[t] == doctest::Approx(t == 20 ? 1.0 : 0.0).epsilon(1e-12));
  // The waveform is only added for designated classes.
  Rng rng2(1);
  CHECK(std::abs(simulate_source(spec, 50, 1, rng2)[20]) < 1e-200);
}

TEST_CASE("class gain scales the innovation") {
  LatentSourceSpec spec;
  spec.class_gain = {1.0, 0.25};
  Rng a(4), b(4);
  const Tensor s0 = simulate_source(spec, 200, 0, a), s1 = simulate_source(spec, 200, 1, b);
  for (std::size_t t = 0; t < 200; ++t) CHECK(s1[t] == doctest::Approx(0.25 * s0[t]));
}

TEST_CASE("unstable or invalid source specs are rejected") {
  LatentSourceSpec spec;
  spec.ar_coeffs = {1.1};
  Rng rng(1);
  CHECK(error_of([&] { simulate_source(spec, 50, 0, rng); }) == ErrorCode::Stability);
  spec.ar_coeffs = {0.5};
  spec.innovation_std = 0.0;
  CHECK(error_of([&] { simulate_source(spec, 50, 0, rng); }) == ErrorCode::Parameter);
  spec.innovation_std = 1.0;
  spec.class_gain = {1.0, -1.0};
  CHECK(error_of([&] { simulate_source(spec, 50, 0, rng); }) == ErrorCode::Parameter);
}

TEST_CASE("subject mixing") {
  GenConfig cfg = tiny_config();
  cfg.subject_mixing_jitter = 0.0;
  Rng rng(2);
  CHECK(subject_mixing(cfg, 1, rng) == cfg.base_mixing);
  cfg.subject_mixing_jitter = 0.5;
  CHECK(subject_mixing(cfg, 1) == subject_mixing(cfg, 1));
  CHECK_FALSE(subject_mixing(cfg, 1) == subject_mixing(cfg, 2));
  const Tensor m = subject_mixing(cfg, 0);
  for (std::size_t j = 0; j < m.dim(1); ++j) {
    double norm = 0.0;
    for (std::size_t i = 0; i < m.dim(0); ++i) norm += m(i, j) * m(i, j);
    CHECK(std::sqrt(norm) == doctest::Approx(1.0));
  }
  CHECK(error_of([&] { subject_mixing(cfg, 3); }) == ErrorCode::Parameter);
}

TEST_CASE("mixing jitter 0.3 keeps column correlations between 0.5 and 1 at n = 64") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    GenConfig cfg = evoked_preset(seed, {.trials_per_class_per_subject = 1});
    cfg.subject_mixing_jitter = 0.3;
    for (std::size_t subject : {0u, 1u}) {
      const Tensor m = subject_mixing(cfg, subject);
      for (std::size_t j = 0; j < cfg.n_latent; ++j) {
        std::vector<double> a(cfg.n_channels), b(cfg.n_channels);
        for (std::size_t i = 0; i < cfg.n_channels; ++i) {
          a[i] = m(i, j);
          b[i] = cfg.base_mixing(i, j);
        }
        const double r = pearson(a, b);
        CHECK(r > 0.5);
        CHECK(r < 1.0);
      }
    }
  }
}

TEST_CASE("generate bookkeeping and determinism") {
  const GenConfig cfg = tiny_config();
  const EpochSet set = generate(cfg);
  CHECK(set.trials() == cfg.n_subjects * cfg.n_classes * cfg.trials_per_class_per_subject);
  CHECK(set.channels() == cfg.n_channels);
  CHECK(set.times() == cfg.total_times());
  for (std::size_t s = 0; s < cfg.n_subjects; ++s)
    for (int c = 0; c < 2; ++c) {
      std::size_t count = 0;
      for (std::size_t i = 0; i < set.trials(); ++i)
        if (set.subjects[i] == static_cast<int>(s) && set.labels[i] == c) ++count;
      CHECK(count == cfg.trials_per_class_per_subject);
    }
  CHECK(generate(cfg) == set);
  GenConfig other = cfg;
  other.seed = 6;
  CHECK_FALSE(generate(other) == set);
}

TEST_CASE("noiseless rank-1 data is a multiple of the source") {
  GenConfig cfg = tiny_config();
  cfg.n_latent = 1;
  cfg.sources.resize(1);
  cfg.sources[0].evoked_waveform.clear();
  cfg.sources[0].evoked_classes.clear();
  cfg.noise_std = 0.0;
  Rng rng(3);
  cfg.base_mixing = random_mixing(cfg.n_channels, 1, rng);
  const EpochSet set = generate(cfg);
  const Tensor e = set.epoch_tensor(0);
  for (std::size_t ch = 0; ch < cfg.n_channels; ++ch) {
    const double ratio = cfg.base_mixing(ch, 0) / cfg.base_mixing(0, 0);
    for (std::size_t t = 0; t < set.times(); ++t) CHECK(e(ch, t) == doctest::Approx(ratio * e(0, t)).epsilon(1e-9));
  }
}

TEST_CASE("config validation") {
  GenConfig cfg = tiny_config();
  cfg.n_latent = 6;
  CHECK(error_of([&] { cfg.validate(); }) == ErrorCode::Parameter);
  cfg = tiny_config();
  cfg.base_mixing(0, 0) += 0.1;
  CHECK(error_of([&] { cfg.validate(); }) == ErrorCode::Parameter);
  cfg = tiny_config();
  cfg.noise_std = -1;
  CHECK(error_of([&] { cfg.validate(); }) == ErrorCode::Parameter);
  cfg = tiny_config();
  cfg.couplings = {{1, 0, 0.3}};
  CHECK(error_of([&] { cfg.validate(); }) == ErrorCode::Parameter);
}

TEST_CASE("couplings feed one source into another") {
  GenConfig cfg = tiny_config();
  cfg.noise_std = 0.0;
  cfg.sources[0].evoked_waveform.clear();
  cfg.sources[0].evoked_classes.clear();
  const Tensor plain = [&] {
    Rng rng(7);
    return simulate_sources(cfg, 0, rng);
  }();
  cfg.couplings = {{0, 1, 0.5}};
  Rng rng(7);
  const Tensor coupled = simulate_sources(cfg, 0, rng);
  for (std::size_t t = 0; t < coupled.dim(1); ++t) CHECK(coupled(0, t) == doctest::Approx(plain(0, t)));
  bool changed = false;
  for (std::size_t t = 0; t < coupled.dim(1); ++t) changed |= std::abs(coupled(1, t) - plain(1, t)) > 1e-9;
  CHECK(changed);
}

TEST_CASE("default evoked preset sits at SNR 1") {
  const GenConfig cfg = evoked_preset(1);
  CHECK(cfg.n_channels == 64);
  CHECK(cfg.n_latent == 8);
  CHECK(cfg.n_times == 125);
  CHECK(cfg.n_classes == 5);
  CHECK(cfg.n_subjects == 7);
  CHECK(cfg.trials_per_class_per_subject == 300);
  const double snr = analytic_snr(cfg).snr();
  CHECK(snr >= 0.5);
  CHECK(snr <= 2.0);
  CHECK(snr == doctest::Approx(1.0));
  CHECK(uninformative_sources(cfg) == std::vector<std::size_t>{5, 6, 7});
  for (int c = 0; c < 5; ++c) CHECK(evoked_source_of_class(cfg, c) == static_cast<std::size_t>(c));
}

TEST_CASE("induced preset") {
  const GenConfig cfg = induced_preset(2);
  CHECK(cfg.n_classes == 3);
  CHECK(analytic_snr(cfg).snr() == doctest::Approx(1.0));
  CHECK(cfg.sources[0].peak_freq_hz == 10.0);
  CHECK(cfg.sources[0].gain(1) < cfg.sources[0].gain(0));
  CHECK(cfg.sources[1].gain(2) < cfg.sources[1].gain(0));
}

TEST_CASE("empirical covariance of noiseless data converges to C Sigma_s C^T") {
  GenConfig cfg = tiny_config();
  cfg.noise_std = 0.0;
  cfg.sources[0].evoked_waveform.clear();
  cfg.sources[0].evoked_classes.clear();
  cfg.baseline_samples = 0;
  cfg.n_times = 100;
  cfg.n_subjects = 1;
  cfg.trials_per_class_per_subject = 100;  // 2 classes -> 2 * 10^4 samples
  const EpochSet set = generate(cfg);
  Tensor sigma_s({2, 2});
  sigma_s(0, 0) = ar_unit_variance(cfg.sources[0].ar_coeffs);
  sigma_s(1, 1) = ar_unit_variance(cfg.sources[1].ar_coeffs);
  const Tensor expected = matmul(matmul(cfg.base_mixing, sigma_s), transpose(cfg.base_mixing));
  Tensor emp({6, 6});
  for (std::size_t i = 0; i < set.trials(); ++i) {
    const Tensor e = set.epoch_tensor(i);
    for (std::size_t a = 0; a < 6; ++a)
      for (std::size_t b = 0; b < 6; ++b)
        for (std::size_t t = 0; t < set.times(); ++t) emp(a, b) += e(a, t) * e(b, t);
  }
  for (double& v : emp.values()) v /= static_cast<double>(set.trials() * set.times());
  Tensor diff = emp;
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= expected[i];
  CHECK(frobenius_norm(diff) / frobenius_norm(expected) < 0.1);
}

TEST_CASE("class-conditional mean recovers the mixed evoked waveform") {
  const GenConfig cfg = evoked_preset(3, {.n_subjects = 1, .trials_per_class_per_subject = 300, .jitter = 0.0});
  const EpochSet set = generate(cfg);
  const int cls = 2;
  const std::size_t t = cfg.total_times(), n = cfg.n_channels;
  std::vector<double> mean(n * t, 0.0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < set.trials(); ++i) {
    if (set.labels[i] != cls) continue;
    ++count;
    const auto e = set.epoch(i);
    for (std::size_t j = 0; j < n * t; ++j) mean[j] += e[j];
  }
  for (double& v : mean) v /= static_cast<double>(count);
  std::vector<double> expected(n * t, 0.0);
  const auto& w = cfg.sources[cls].evoked_waveform;
  for (std::size_t ch = 0; ch < n; ++ch)
    for (std::size_t x = cfg.baseline_samples; x < t; ++x)
      expected[ch * t + x] = cfg.base_mixing(ch, cls) * w[x - cfg.baseline_samples];
  CHECK(pearson(mean, expected) > 0.99);
}
