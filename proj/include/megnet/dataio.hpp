// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "megnet/epochset.hpp"
#include "megnet/rng.hpp"

namespace megnet {

// "MEGB" epoch file, little-endian:
//   magic[4] version:u16 n_trials:u32 n_channels:u32 n_times:u32
//   sample_rate_hz:f32 n_classes:u16 flags:u16
//   labels:u16[n_trials] subjects:u16[n_trials]
//   epochs: f64 (flags bit 0) or f32, trial-major then channel-major.
struct EpochFileHeader {
  std::uint16_t version = 1;
  std::uint32_t n_trials = 0;
  std::uint32_t n_channels = 0;
  std::uint32_t n_times = 0;
  float sample_rate_hz = 0.0f;
  std::uint16_t n_classes = 0;
  std::uint16_t flags = 0;

  static constexpr std::uint16_t kVersion = 1;
  static constexpr std::uint16_t kFlag64Bit = 1;
  static constexpr std::size_t kBytes = 26;
};

std::vector<std::uint8_t> encode_epochs(const EpochSet& set, bool payload_64bit = true);
EpochSet decode_epochs(std::span<const std::uint8_t> bytes);

void write_epochs(const std::filesystem::path& path, const EpochSet& set, bool payload_64bit = true);
EpochSet read_epochs(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

// (epoch - mu) / max(sigma, eps), with mu and sigma the scalar mean and
// standard deviation (divisor N-1) pooled over all channels of the first
// baseline_len samples.
Tensor baseline_scale(const Tensor& epoch, std::size_t baseline_len, double eps = 1e-12);

// Keeps every factor-th sample starting at 0. No anti-alias filtering.
Tensor decimate(const Tensor& epoch, std::size_t factor);
EpochSet decimate(const EpochSet& set, std::size_t factor);

// Baseline-scales every epoch and drops the first baseline_len samples.
EpochSet preprocess(const EpochSet& raw, std::size_t baseline_len, double eps = 1e-12);

struct SplitSpec {
  int held_out_subject = 0;
  double validation_fraction = 0.1;
};

struct Split {
  EpochSet train;
  EpochSet validation;
  EpochSet test;
};

// Test = every trial of the held-out subject, in input order. The rest is
// shuffled and split with per-class validation quotas allotted by largest
// remainder, so the validation set is class-balanced to within one trial.
Split split(const EpochSet& set, const SplitSpec& spec, Rng& rng);
// Same train/validation rule over every trial; the test set is left empty.
Split split_train_validation(const EpochSet& set, double validation_fraction, Rng& rng);

}  // namespace megnet
