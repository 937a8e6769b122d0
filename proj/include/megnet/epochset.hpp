// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "megnet/tensor.hpp"

namespace megnet {

// Trials x channels x time, with one class label and one subject id per trial.
struct EpochSet {
  Tensor epochs;
  std::vector<int> labels;
  std::vector<int> subjects;
  float sample_rate_hz = 0.0f;
  int n_classes = 0;

  std::size_t trials() const { return epochs.empty() ? 0 : epochs.dim(0); }
  std::size_t channels() const { return epochs.dim(1); }
  std::size_t times() const { return epochs.dim(2); }

  std::span<const double> epoch(std::size_t trial) const { return epochs.slice(trial); }
  Tensor epoch_tensor(std::size_t trial) const;

  // Throws ErrorCode::Dimension or ErrorCode::Parameter when fields disagree.
  void validate() const;

  bool operator==(const EpochSet&) const = default;
};

EpochSet subset(const EpochSet& set, std::span<const std::size_t> trials);
std::vector<int> distinct_subjects(const EpochSet& set);
std::vector<std::size_t> trials_of_subject(const EpochSet& set, int subject);

}  // namespace megnet
