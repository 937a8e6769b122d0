// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "megnet/epochset.hpp"
#include "megnet/model.hpp"
#include "megnet/rng.hpp"

namespace megnet {

struct TrainConfig {
  double learning_rate = 3e-4;
  std::size_t batch_size = 100;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t eval_every = 1000;
  double stop_delta = 1e-5;
  std::size_t max_iterations = 20000;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const;
};

std::string describe(const TrainConfig& config);

struct AdamState {
  ModelParams first;
  ModelParams second;
  std::uint64_t step = 0;

  static AdamState zeros(const ModelConfig& config);
  bool operator==(const AdamState&) const = default;
};

// A network together with its optimizer state, which persists across
// training and online updates.
struct Model {
  ModelConfig config;
  ModelParams params;
  AdamState adam;

  bool operator==(const Model&) const = default;
};

// He-uniform weights, U(-b, b) with b = sqrt(6 / fan_in); biases 0.1.
ModelParams init_params(const ModelConfig& config, Rng& rng);
Model make_model(const ModelConfig& config, Rng& rng);
double he_uniform_bound(std::size_t fan_in);

// Bias-corrected Adam update. Throws ErrorCode::NonFinite naming the
// gradient tensor if any entry is NaN or Inf; parameters are untouched then.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, const TrainConfig& config);

enum class StopReason { EarlyStop, MaxIterations };
const char* to_string(StopReason r);

struct ValidationPoint {
  std::size_t iteration = 0;
  double cost = 0.0;           // cross-entropy + l1 term
  double cross_entropy = 0.0;  // drives the stop rule
  double accuracy = 0.0;
};

struct TrainReport {
  std::size_t iterations_run = 0;
  ValidationPoint initial;             // before the first update
  std::vector<ValidationPoint> history;
  std::size_t returned_iteration = 0;  // checkpoint the parameters come from
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
  StopReason stop_reason = StopReason::MaxIterations;
};

// CSV with header iteration,val_cost,val_ce,val_acc; row 0 is the initial
// evaluation.
std::string report_csv(const TrainReport& report);

// Mini-batch Adam with early stopping: every eval_every iterations (and at
// max_iterations) the validation cross-entropy is compared with the previous
// checkpoint; training stops if it rose or fell by less than stop_delta, and
// the previous checkpoint's parameters and optimizer state are restored.
TrainReport train(Model& model, const EpochSet& train_set, const EpochSet& val_set, const TrainConfig& config);

// One forward/backward/Adam step on a single trial with dropout active.
// Returns the training loss of the trial before the update.
double online_update(Model& model, const Tensor& epoch, int label, const TrainConfig& config, Rng& rng);

}  // namespace megnet
