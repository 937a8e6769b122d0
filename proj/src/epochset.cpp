// SPDX-License-Identifier: Apache-2.0
#include "megnet/epochset.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "megnet/error.hpp"

namespace megnet {

Tensor EpochSet::epoch_tensor(std::size_t trial) const {
  auto e = epoch(trial);
  return Tensor({channels(), times()}, std::vector<double>(e.begin(), e.end()));
}

void EpochSet::validate() const {
  if (epochs.rank() != 3) fail(ErrorCode::Dimension, "epochs must be trials x channels x time, got " + shape_string(epochs.shape()));
  if (labels.size() != trials() || subjects.size() != trials()) {
    fail(ErrorCode::Dimension, "labels/subjects length must equal the number of trials (" + std::to_string(trials()) + ")");
  }
  if (n_classes < 1) fail(ErrorCode::Parameter, "n_classes must be >= 1");
  for (int l : labels) {
    if (l < 0 || l >= n_classes) fail(ErrorCode::Parameter, "label " + std::to_string(l) + " out of range");
  }
  for (int s : subjects) {
    if (s < 0) fail(ErrorCode::Parameter, "negative subject id");
  }
  if (!(sample_rate_hz > 0.0f)) fail(ErrorCode::Parameter, "sample rate must be positive");
}

EpochSet subset(const EpochSet& set, std::span<const std::size_t> trials) {
  if (trials.empty()) fail(ErrorCode::Parameter, "empty trial subset");
  const std::size_t stride = set.channels() * set.times();
  std::vector<double> data;
  data.reserve(trials.size() * stride);
  EpochSet out;
  out.sample_rate_hz = set.sample_rate_hz;
  out.n_classes = set.n_classes;
  for (std::size_t i : trials) {
    if (i >= set.trials()) fail(ErrorCode::Parameter, "trial index out of range");
    auto e = set.epoch(i);
    data.insert(data.end(), e.begin(), e.end());
    out.labels.push_back(set.labels[i]);
    out.subjects.push_back(set.subjects[i]);
  }
  out.epochs = Tensor({trials.size(), set.channels(), set.times()}, std::move(data));
  return out;
}

std::vector<int> distinct_subjects(const EpochSet& set) {
  std::set<int> s(set.subjects.begin(), set.subjects.end());
  return {s.begin(), s.end()};
}

std::vector<std::size_t> trials_of_subject(const EpochSet& set, int subject) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < set.trials(); ++i)
    if (set.subjects[i] == subject) idx.push_back(i);
  return idx;
}

}  // namespace megnet
