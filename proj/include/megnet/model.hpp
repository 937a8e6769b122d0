// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "megnet/epochset.hpp"
#include "megnet/rng.hpp"
#include "megnet/tensor.hpp"

namespace megnet {

enum class Variant { LF, VAR };

const char* to_string(Variant v);
Variant parse_variant(const std::string& name);

// Defaults are the tuned architecture: 32 latent sources, 7-tap temporal
// filters, max-pool 2/2, dropout 0.5 on the output layer, l1 3e-4.
struct ModelConfig {
  Variant variant = Variant::LF;
  std::size_t n_channels = 0;
  std::size_t n_latent = 32;
  std::size_t filter_len = 7;
  std::size_t n_times = 0;
  std::size_t pool_factor = 2;
  std::size_t pool_stride = 2;
  std::size_t n_classes = 0;
  double dropout_rate = 0.5;
  double l1_lambda = 3e-4;

  std::size_t conv_length() const { return n_times - filter_len + 1; }
  std::size_t pooled_length() const;
  std::size_t features() const { return n_latent * pooled_length(); }
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

// key=value lines describing the architecture, including the fixed choices
// (link functions, pooling type, output nonlinearity, dense layer count).
std::string describe(const ModelConfig& config);

// Trainable tensors, also used as the gradient container.
//   spatial        n x k      latent = spatial^T * epoch
//   temporal       LF: k x l; VAR: k x l x k (kernel c, tap j, input component c')
//   temporal_bias  k
//   out_weights    F x C, F = k * pooled_length, feature index = c * pooled_length + p
//   out_bias       C
struct ModelParams {
  Tensor spatial;
  Tensor temporal;
  Tensor temporal_bias;
  Tensor out_weights;
  Tensor out_bias;

  static constexpr std::array<const char*, 5> kNames = {"spatial", "temporal", "temporal_bias", "out_weights",
                                                        "out_bias"};

  static ModelParams zeros(const ModelConfig& config);
  std::array<Tensor*, 5> tensors() { return {&spatial, &temporal, &temporal_bias, &out_weights, &out_bias}; }
  std::array<const Tensor*, 5> tensors() const {
    return {&spatial, &temporal, &temporal_bias, &out_weights, &out_bias};
  }
  std::size_t count() const;
  void check_shapes(const ModelConfig& config) const;

  bool operator==(const ModelParams&) const = default;
};

std::size_t temporal_parameter_count(const ModelConfig& config);
std::size_t parameter_count(const ModelConfig& config);

struct ForwardCache {
  Tensor latent;                        // k x t
  Tensor conv_pre_relu;                 // k x t'
  std::vector<std::size_t> pool_argmax; // k * P, index into the conv row
  Tensor pooled;                        // k x P
  Tensor dropout_mask;                  // F, empty at inference
  Tensor logits;                        // C
  Tensor probabilities;                 // C
};

Tensor spatial_forward(const ModelParams& params, const Tensor& epoch);

struct TemporalOutput {
  Tensor conv_pre_relu;
  Tensor pooled;
  std::vector<std::size_t> pool_argmax;
};
TemporalOutput temporal_forward(const ModelConfig& config, const ModelParams& params, const Tensor& latent);

struct OutputValues {
  Tensor logits;
  Tensor probabilities;
};
// `dropout_mask` holds 0 or 1/(1-p) per feature (inverted dropout); pass an
// empty tensor at inference.
OutputValues output_forward(const ModelParams& params, const Tensor& pooled, const Tensor& dropout_mask);

ForwardCache forward(const ModelConfig& config, const ModelParams& params, const Tensor& epoch,
                     const Tensor& dropout_mask = {});

Tensor draw_dropout_mask(const ModelConfig& config, Rng& rng);

double l1_penalty(const ModelParams& params);
// Cross-entropy of one prediction plus l1_lambda times the l1 norm of every
// weight tensor (biases excluded).
double loss(const ModelParams& params, const Tensor& probabilities, int label, double l1_lambda);

// Gradient of loss() for one trial. `epoch` must be the input that produced
// `cache`.
ModelParams backward(const ModelConfig& config, const ModelParams& params, const ForwardCache& cache,
                     const Tensor& epoch, int label);

struct BatchGradient {
  ModelParams gradient;  // mean over trials, l1 subgradient added once
  double mean_cross_entropy = 0.0;
  double loss = 0.0;
};

// Dropout masks are drawn from `rng` in trial order before any parallel work,
// and per-trial gradients are reduced in fixed chunks of trial order, so the
// result does not depend on `threads`.
BatchGradient batch_gradient(const ModelConfig& config, const ModelParams& params, const EpochSet& set,
                             std::span<const std::size_t> trials, Rng& rng, unsigned threads = 1);

struct Evaluation {
  double mean_cross_entropy = 0.0;
  double l1_term = 0.0;
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::vector<int> predictions;

  double cost() const { return mean_cross_entropy + l1_term; }
};

Evaluation evaluate(const ModelConfig& config, const ModelParams& params, const EpochSet& set, unsigned threads = 1);

int predict(const ModelConfig& config, const ModelParams& params, const Tensor& epoch);

}  // namespace megnet
