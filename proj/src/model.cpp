// SPDX-License-Identifier: Apache-2.0
#include "megnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "megnet/error.hpp"
#include "megnet/parallel.hpp"

namespace megnet {

namespace {

constexpr std::size_t kReduceChunk = 8;

void add_into(ModelParams& acc, const ModelParams& g) {
  auto a = acc.tensors();
  auto b = g.tensors();
  for (std::size_t i = 0; i < a.size(); ++i) {
    double* dst = a[i]->data();
    const double* src = b[i]->data();
    for (std::size_t j = 0; j < a[i]->size(); ++j) dst[j] += src[j];
  }
}

void add_l1_subgradient(ModelParams& grad, const ModelParams& params, double lambda) {
  if (lambda == 0.0) return;
  auto apply = [lambda](Tensor& g, const Tensor& w) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (w[i] > 0.0) {
        g[i] += lambda;
      } else if (w[i] < 0.0) {
        g[i] -= lambda;
      }
    }
  };
  apply(grad.spatial, params.spatial);
  apply(grad.temporal, params.temporal);
  apply(grad.out_weights, params.out_weights);
}

// Cross-entropy gradient of one trial, without the l1 term.
ModelParams backward_ce(const ModelConfig& cfg, const ModelParams& params, const ForwardCache& cache,
                        const Tensor& epoch, int label) {
  const std::size_t n = cfg.n_channels, k = cfg.n_latent, l = cfg.filter_len, t = cfg.n_times;
  const std::size_t tc = cfg.conv_length(), pl = cfg.pooled_length(), f = cfg.features(), nc = cfg.n_classes;
  if (cache.latent.shape() != Shape{k, t} || cache.conv_pre_relu.shape() != Shape{k, tc} ||
      cache.pooled.shape() != Shape{k, pl} || cache.pool_argmax.size() != k * pl ||
      cache.probabilities.shape() != Shape{nc} ||
      (!cache.dropout_mask.empty() && cache.dropout_mask.shape() != Shape{f})) {
    fail(ErrorCode::Contract, "forward cache does not match the model configuration");
  }
  if (epoch.shape() != Shape{n, t}) fail(ErrorCode::Contract, "epoch shape differs from the cached forward pass");
  if (label < 0 || static_cast<std::size_t>(label) >= nc) fail(ErrorCode::Parameter, "label out of range");

  ModelParams g = ModelParams::zeros(cfg);
  const bool masked = !cache.dropout_mask.empty();

  std::vector<double> dlogits(nc);
  for (std::size_t c = 0; c < nc; ++c) dlogits[c] = cache.probabilities[c] - (static_cast<int>(c) == label ? 1.0 : 0.0);
  for (std::size_t c = 0; c < nc; ++c) g.out_bias[c] = dlogits[c];

  // Output layer and gradient w.r.t. the pooled features.
  std::vector<double> dfeat(f);
  for (std::size_t i = 0; i < f; ++i) {
    const double m = masked ? cache.dropout_mask[i] : 1.0;
    const double feat = cache.pooled[i] * m;
    const double* wrow = params.out_weights.data() + i * nc;
    double* grow = g.out_weights.data() + i * nc;
    double d = 0.0;
    for (std::size_t c = 0; c < nc; ++c) {
      grow[c] = feat * dlogits[c];
      d += wrow[c] * dlogits[c];
    }
    dfeat[i] = d * m;
  }

  // Max-pool routing and ReLU gate: dpre is nonzero only at pooled argmaxes.
  Tensor dlatent({k, t});
  for (std::size_t c = 0; c < k; ++c) {
    const double* pre = cache.conv_pre_relu.data() + c * tc;
    for (std::size_t p = 0; p < pl; ++p) {
      const double d = dfeat[c * pl + p];
      const std::size_t tau = cache.pool_argmax[c * pl + p];
      if (d == 0.0 || !(pre[tau] > 0.0)) continue;
      g.temporal_bias[c] += d;
      if (cfg.variant == Variant::LF) {
        const double* lat = cache.latent.data() + c * t + tau;
        const double* filt = params.temporal.data() + c * l;
        double* gf = g.temporal.data() + c * l;
        double* dl = dlatent.data() + c * t + tau;
        for (std::size_t j = 0; j < l; ++j) {
          gf[j] += d * lat[j];
          dl[j] += d * filt[j];
        }
      } else {
        for (std::size_t j = 0; j < l; ++j) {
          const double* kern = params.temporal.data() + (c * l + j) * k;
          double* gk = g.temporal.data() + (c * l + j) * k;
          for (std::size_t cp = 0; cp < k; ++cp) {
            gk[cp] += d * cache.latent(cp, tau + j);
            dlatent(cp, tau + j) += d * kern[cp];
          }
        }
      }
    }
  }

  // Spatial layer: dW[ch, c] = sum_tau X[ch, tau] * dlatent[c, tau].
  for (std::size_t ch = 0; ch < n; ++ch) {
    const double* x = epoch.data() + ch * t;
    double* gw = g.spatial.data() + ch * k;
    for (std::size_t c = 0; c < k; ++c) {
      const double* dl = dlatent.data() + c * t;
      double s = 0.0;
      for (std::size_t tau = 0; tau < t; ++tau) s += x[tau] * dl[tau];
      gw[c] = s;
    }
  }
  return g;
}

}  // namespace

const char* to_string(Variant v) { return v == Variant::LF ? "lf" : "var"; }

Variant parse_variant(const std::string& name) {
  if (name == "lf" || name == "LF" || name == "lf-cnn") return Variant::LF;
  if (name == "var" || name == "VAR" || name == "var-cnn") return Variant::VAR;
  fail(ErrorCode::Parameter, "unknown model variant '" + name + "' (expected lf or var)");
}

std::size_t ModelConfig::pooled_length() const {
  if (filter_len > n_times) return 0;
  return megnet::pooled_length(conv_length(), pool_factor, pool_stride);
}

void ModelConfig::validate() const {
  if (n_channels < 1 || n_latent < 1 || filter_len < 1 || n_times < 1 || n_classes < 2) {
    fail(ErrorCode::Parameter, "model sizes must be positive and n_classes >= 2");
  }
  if (n_latent > n_channels) fail(ErrorCode::Parameter, "n_latent must not exceed n_channels");
  if (filter_len > n_times) fail(ErrorCode::Dimension, "filter_len exceeds n_times");
  if (pool_factor < 1 || pool_stride < 1) fail(ErrorCode::Parameter, "pool factor and stride must be >= 1");
  if (pooled_length() < 1) fail(ErrorCode::Dimension, "convolution output shorter than the pool window");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail(ErrorCode::Parameter, "dropout_rate must be in [0, 1)");
  if (!(l1_lambda >= 0.0)) fail(ErrorCode::Parameter, "l1_lambda must be >= 0");
}

std::string describe(const ModelConfig& cfg) {
  std::ostringstream out;
  out << "variant=" << to_string(cfg.variant) << '\n'
      << "n_channels=" << cfg.n_channels << '\n'
      << "n_times=" << cfg.n_times << '\n'
      << "n_classes=" << cfg.n_classes << '\n'
      << "latent_sources=" << cfg.n_latent << '\n'
      << "filter_length=" << cfg.filter_len << '\n'
      << "input_link=identity\n"
      << "hidden_link=relu\n"
      << "pooling=max\n"
      << "pool_factor=" << cfg.pool_factor << '\n'
      << "pool_stride=" << cfg.pool_stride << '\n'
      << "dropout=" << cfg.dropout_rate << '\n'
      << "l1_penalty=" << cfg.l1_lambda << '\n'
      << "output=softmax\n"
      << "dense_layers=1\n"
      << "pooled_length=" << cfg.pooled_length() << '\n'
      << "temporal_parameters=" << temporal_parameter_count(cfg) << '\n'
      << "total_parameters=" << parameter_count(cfg) << '\n';
  return out.str();
}

ModelParams ModelParams::zeros(const ModelConfig& cfg) {
  cfg.validate();
  ModelParams p;
  p.spatial = Tensor({cfg.n_channels, cfg.n_latent});
  p.temporal = cfg.variant == Variant::LF ? Tensor({cfg.n_latent, cfg.filter_len})
                                          : Tensor({cfg.n_latent, cfg.filter_len, cfg.n_latent});
  p.temporal_bias = Tensor({cfg.n_latent});
  p.out_weights = Tensor({cfg.features(), cfg.n_classes});
  p.out_bias = Tensor({cfg.n_classes});
  return p;
}

std::size_t ModelParams::count() const {
  std::size_t n = 0;
  for (const Tensor* t : tensors()) n += t->size();
  return n;
}

void ModelParams::check_shapes(const ModelConfig& cfg) const {
  const ModelParams ref = zeros(cfg);
  auto a = tensors();
  auto b = ref.tensors();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]->shape() != b[i]->shape()) {
      fail(ErrorCode::Dimension, std::string(kNames[i]) + " has shape " + shape_string(a[i]->shape()) +
                                     ", expected " + shape_string(b[i]->shape()));
    }
  }
}

std::size_t temporal_parameter_count(const ModelConfig& cfg) {
  return cfg.variant == Variant::LF ? cfg.n_latent * cfg.filter_len : cfg.filter_len * cfg.n_latent * cfg.n_latent;
}

std::size_t parameter_count(const ModelConfig& cfg) {
  return cfg.n_channels * cfg.n_latent + temporal_parameter_count(cfg) + cfg.n_latent +
         cfg.features() * cfg.n_classes + cfg.n_classes;
}

Tensor spatial_forward(const ModelParams& params, const Tensor& epoch) {
  const std::size_t n = params.spatial.dim(0), k = params.spatial.dim(1);
  if (epoch.rank() != 2 || epoch.dim(0) != n) {
    fail(ErrorCode::Dimension, "epoch " + shape_string(epoch.shape()) + " does not match spatial filters " +
                                   shape_string(params.spatial.shape()));
  }
  const std::size_t t = epoch.dim(1);
  Tensor latent({k, t});
  for (std::size_t ch = 0; ch < n; ++ch) {
    const double* x = epoch.data() + ch * t;
    const double* w = params.spatial.data() + ch * k;
    for (std::size_t c = 0; c < k; ++c) {
      const double wc = w[c];
      double* dst = latent.data() + c * t;
      for (std::size_t tau = 0; tau < t; ++tau) dst[tau] += wc * x[tau];
    }
  }
  return latent;
}

TemporalOutput temporal_forward(const ModelConfig& cfg, const ModelParams& params, const Tensor& latent) {
  const std::size_t k = cfg.n_latent, l = cfg.filter_len;
  if (latent.rank() != 2 || latent.dim(0) != k) fail(ErrorCode::Dimension, "latent must be n_latent x time");
  const std::size_t t = latent.dim(1);
  if (t < l) fail(ErrorCode::Dimension, "latent time course shorter than the temporal filter");
  const std::size_t tc = t - l + 1;
  const std::size_t pl = pooled_length(tc, cfg.pool_factor, cfg.pool_stride);
  if (pl == 0) fail(ErrorCode::Dimension, "convolution output shorter than the pool window");

  TemporalOutput out{Tensor({k, tc}), Tensor({k, pl}), std::vector<std::size_t>(k * pl)};
  for (std::size_t c = 0; c < k; ++c) {
    double* pre = out.conv_pre_relu.data() + c * tc;
    std::fill(pre, pre + tc, params.temporal_bias[c]);
    if (cfg.variant == Variant::LF) {
      const double* lat = latent.data() + c * t;
      for (std::size_t j = 0; j < l; ++j) {
        const double w = params.temporal(c, j);
        for (std::size_t tau = 0; tau < tc; ++tau) pre[tau] += w * lat[tau + j];
      }
    } else {
      for (std::size_t j = 0; j < l; ++j) {
        const double* kern = params.temporal.data() + (c * l + j) * k;
        for (std::size_t cp = 0; cp < k; ++cp) {
          const double w = kern[cp];
          if (w == 0.0) continue;
          const double* lat = latent.data() + cp * t + j;
          for (std::size_t tau = 0; tau < tc; ++tau) pre[tau] += w * lat[tau];
        }
      }
    }
    // ReLU then max-pool; first maximum wins ties.
    for (std::size_t p = 0; p < pl; ++p) {
      const std::size_t start = p * cfg.pool_stride;
      std::size_t best = start;
      double best_v = std::max(pre[start], 0.0);
      for (std::size_t m = 1; m < cfg.pool_factor; ++m) {
        const double v = std::max(pre[start + m], 0.0);
        if (v > best_v) {
          best_v = v;
          best = start + m;
        }
      }
      out.pooled(c, p) = best_v;
      out.pool_argmax[c * pl + p] = best;
    }
  }
  return out;
}

OutputValues output_forward(const ModelParams& params, const Tensor& pooled, const Tensor& dropout_mask) {
  const std::size_t f = params.out_weights.dim(0), nc = params.out_weights.dim(1);
  if (pooled.size() != f) fail(ErrorCode::Dimension, "pooled features do not match the output layer");
  if (!dropout_mask.empty() && dropout_mask.size() != f) fail(ErrorCode::Dimension, "dropout mask size mismatch");
  Tensor logits = params.out_bias;
  for (std::size_t i = 0; i < f; ++i) {
    const double feat = dropout_mask.empty() ? pooled[i] : pooled[i] * dropout_mask[i];
    if (feat == 0.0) continue;
    const double* w = params.out_weights.data() + i * nc;
    for (std::size_t c = 0; c < nc; ++c) logits[c] += feat * w[c];
  }
  Tensor probs = softmax(logits);
  return {std::move(logits), std::move(probs)};
}

ForwardCache forward(const ModelConfig& cfg, const ModelParams& params, const Tensor& epoch, const Tensor& dropout_mask) {
  if (epoch.shape() != Shape{cfg.n_channels, cfg.n_times}) {
    fail(ErrorCode::Dimension, "epoch " + shape_string(epoch.shape()) + " does not match the model input " +
                                   shape_string({cfg.n_channels, cfg.n_times}));
  }
  ForwardCache cache;
  cache.latent = spatial_forward(params, epoch);
  TemporalOutput temporal = temporal_forward(cfg, params, cache.latent);
  cache.conv_pre_relu = std::move(temporal.conv_pre_relu);
  cache.pooled = std::move(temporal.pooled);
  cache.pool_argmax = std::move(temporal.pool_argmax);
  cache.dropout_mask = dropout_mask;
  OutputValues out = output_forward(params, cache.pooled, dropout_mask);
  cache.logits = std::move(out.logits);
  cache.probabilities = std::move(out.probabilities);
  return cache;
}

Tensor draw_dropout_mask(const ModelConfig& cfg, Rng& rng) {
  Tensor mask({cfg.features()}, 1.0);
  if (cfg.dropout_rate == 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - cfg.dropout_rate);
  for (double& m : mask.values()) m = rng.uniform() < cfg.dropout_rate ? 0.0 : keep_scale;
  return mask;
}

double l1_penalty(const ModelParams& params) {
  return l1_norm(params.spatial) + l1_norm(params.temporal) + l1_norm(params.out_weights);
}

double loss(const ModelParams& params, const Tensor& probabilities, int label, double l1_lambda) {
  if (label < 0 || static_cast<std::size_t>(label) >= probabilities.size()) fail(ErrorCode::Parameter, "label out of range");
  return -std::log(probabilities[static_cast<std::size_t>(label)]) + l1_lambda * l1_penalty(params);
}

ModelParams backward(const ModelConfig& cfg, const ModelParams& params, const ForwardCache& cache, const Tensor& epoch,
                     int label) {
  ModelParams g = backward_ce(cfg, params, cache, epoch, label);
  add_l1_subgradient(g, params, cfg.l1_lambda);
  return g;
}

BatchGradient batch_gradient(const ModelConfig& cfg, const ModelParams& params, const EpochSet& set,
                             std::span<const std::size_t> trials, Rng& rng, unsigned threads) {
  if (trials.empty()) fail(ErrorCode::Parameter, "empty batch");
  std::vector<Tensor> masks;
  masks.reserve(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) masks.push_back(draw_dropout_mask(cfg, rng));

  const std::size_t chunks = (trials.size() + kReduceChunk - 1) / kReduceChunk;
  std::vector<ModelParams> partial(chunks);
  std::vector<double> partial_ce(chunks, 0.0);
  parallel_for(chunks, threads, [&](std::size_t ch) {
    ModelParams acc = ModelParams::zeros(cfg);
    double ce = 0.0;
    const std::size_t end = std::min(trials.size(), (ch + 1) * kReduceChunk);
    for (std::size_t i = ch * kReduceChunk; i < end; ++i) {
      const std::size_t trial = trials[i];
      const Tensor epoch = set.epoch_tensor(trial);
      const ForwardCache cache = forward(cfg, params, epoch, masks[i]);
      const int label = set.labels[trial];
      ce += -std::log(cache.probabilities[static_cast<std::size_t>(label)]);
      add_into(acc, backward_ce(cfg, params, cache, epoch, label));
    }
    partial[ch] = std::move(acc);
    partial_ce[ch] = ce;
  });

  BatchGradient out;
  out.gradient = ModelParams::zeros(cfg);
  double ce = 0.0;
  for (std::size_t ch = 0; ch < chunks; ++ch) {
    add_into(out.gradient, partial[ch]);
    ce += partial_ce[ch];
  }
  const double inv = 1.0 / static_cast<double>(trials.size());
  for (Tensor* t : out.gradient.tensors())
    for (double& v : t->values()) v *= inv;
  add_l1_subgradient(out.gradient, params, cfg.l1_lambda);
  out.mean_cross_entropy = ce * inv;
  out.loss = out.mean_cross_entropy + cfg.l1_lambda * l1_penalty(params);
  return out;
}

Evaluation evaluate(const ModelConfig& cfg, const ModelParams& params, const EpochSet& set, unsigned threads) {
  if (set.trials() == 0) fail(ErrorCode::Parameter, "cannot evaluate an empty set");
  std::vector<double> ce(set.trials());
  Evaluation ev;
  ev.predictions.resize(set.trials());
  parallel_for(set.trials(), threads, [&](std::size_t i) {
    const ForwardCache cache = forward(cfg, params, set.epoch_tensor(i));
    const auto& p = cache.probabilities;
    ev.predictions[i] = static_cast<int>(std::max_element(p.values().begin(), p.values().end()) - p.values().begin());
    ce[i] = -std::log(p[static_cast<std::size_t>(set.labels[i])]);
  });
  double total = 0.0;
  for (std::size_t i = 0; i < set.trials(); ++i) {
    total += ce[i];
    if (ev.predictions[i] == set.labels[i]) ++ev.correct;
  }
  ev.mean_cross_entropy = total / static_cast<double>(set.trials());
  ev.l1_term = cfg.l1_lambda * l1_penalty(params);
  ev.accuracy = static_cast<double>(ev.correct) / static_cast<double>(set.trials());
  return ev;
}

int predict(const ModelConfig& cfg, const ModelParams& params, const Tensor& epoch) {
  const ForwardCache cache = forward(cfg, params, epoch);
  const auto& p = cache.probabilities;
  return static_cast<int>(std::max_element(p.values().begin(), p.values().end()) - p.values().begin());
}

}  // namespace megnet
