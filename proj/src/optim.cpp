// SPDX-License-Identifier: Apache-2.0
#include "megnet/optim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "megnet/error.hpp"

namespace megnet {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) fail(ErrorCode::Parameter, "learning_rate must be >= 0");
  if (batch_size < 1) fail(ErrorCode::Parameter, "batch_size must be >= 1");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) fail(ErrorCode::Parameter, "betas must be in (0, 1)");
  if (!(adam_eps > 0.0)) fail(ErrorCode::Parameter, "adam_eps must be > 0");
  if (eval_every < 1) fail(ErrorCode::Parameter, "eval_every must be >= 1");
  if (!(stop_delta >= 0.0)) fail(ErrorCode::Parameter, "stop_delta must be >= 0");
}

std::string describe(const TrainConfig& c) {
  std::ostringstream out;
  out << "optimizer=adam\n"
      << "learning_rate=" << c.learning_rate << '\n'
      << "batch_size=" << c.batch_size << '\n'
      << "beta1=" << c.beta1 << '\n'
      << "beta2=" << c.beta2 << '\n'
      << "adam_eps=" << c.adam_eps << '\n'
      << "eval_every=" << c.eval_every << '\n'
      << "stop_delta=" << c.stop_delta << '\n'
      << "max_iterations=" << c.max_iterations << '\n'
      << "seed=" << c.seed << '\n';
  return out.str();
}

AdamState AdamState::zeros(const ModelConfig& config) {
  return {ModelParams::zeros(config), ModelParams::zeros(config), 0};
}

double he_uniform_bound(std::size_t fan_in) { return std::sqrt(6.0 / static_cast<double>(fan_in)); }

ModelParams init_params(const ModelConfig& cfg, Rng& rng) {
  ModelParams p = ModelParams::zeros(cfg);
  auto fill = [&rng](Tensor& t, std::size_t fan_in) {
    const double b = he_uniform_bound(fan_in);
    for (double& v : t.values()) v = rng.uniform(-b, b);
  };
  fill(p.spatial, cfg.n_channels);
  fill(p.temporal, cfg.variant == Variant::LF ? cfg.filter_len : cfg.filter_len * cfg.n_latent);
  fill(p.out_weights, cfg.features());
  std::fill(p.temporal_bias.values().begin(), p.temporal_bias.values().end(), 0.1);
  std::fill(p.out_bias.values().begin(), p.out_bias.values().end(), 0.1);
  return p;
}

Model make_model(const ModelConfig& config, Rng& rng) {
  config.validate();
  return {config, init_params(config, rng), AdamState::zeros(config)};
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, const TrainConfig& cfg) {
  auto p = params.tensors();
  auto g = grads.tensors();
  auto m = state.first.tensors();
  auto v = state.second.tensors();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (g[i]->shape() != p[i]->shape() || m[i]->shape() != p[i]->shape() || v[i]->shape() != p[i]->shape()) {
      fail(ErrorCode::Dimension, std::string("adam_step shape mismatch in ") + ModelParams::kNames[i]);
    }
    if (!g[i]->all_finite()) fail(ErrorCode::NonFinite, std::string("gradient of ") + ModelParams::kNames[i]);
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < p.size(); ++i) {
    double* w = p[i]->data();
    const double* gi = g[i]->data();
    double* mi = m[i]->data();
    double* vi = v[i]->data();
    for (std::size_t j = 0; j < p[i]->size(); ++j) {
      mi[j] = cfg.beta1 * mi[j] + (1.0 - cfg.beta1) * gi[j];
      vi[j] = cfg.beta2 * vi[j] + (1.0 - cfg.beta2) * gi[j] * gi[j];
      const double mhat = mi[j] / c1;
      const double vhat = vi[j] / c2;
      w[j] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }
}

const char* to_string(StopReason r) { return r == StopReason::EarlyStop ? "early_stop" : "max_iter"; }

std::string report_csv(const TrainReport& report) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "iteration,val_cost,val_ce,val_acc\n";
  auto row = [&out](const ValidationPoint& p) {
    out << p.iteration << ',' << p.cost << ',' << p.cross_entropy << ',' << p.accuracy << '\n';
  };
  row(report.initial);
  for (const auto& p : report.history) row(p);
  return out.str();
}

namespace {

ValidationPoint validation_point(const Model& model, const EpochSet& val, std::size_t iteration, unsigned threads) {
  const Evaluation ev = evaluate(model.config, model.params, val, threads);
  return {iteration, ev.cost(), ev.mean_cross_entropy, ev.accuracy};
}

}  // namespace

TrainReport train(Model& model, const EpochSet& train_set, const EpochSet& val_set, const TrainConfig& cfg) {
  cfg.validate();
  model.config.validate();
  model.params.check_shapes(model.config);
  if (train_set.trials() == 0 || val_set.trials() == 0) fail(ErrorCode::Parameter, "training and validation sets must be nonempty");

  Rng batch_rng = Rng::substream(cfg.seed, {0x62617463ULL});   // batch order
  Rng dropout_rng = Rng::substream(cfg.seed, {0x64726f70ULL}); // dropout masks

  TrainReport report;
  report.initial = validation_point(model, val_set, 0, cfg.threads);

  Model checkpoint = model;
  double prev_ce = report.initial.cross_entropy;
  std::size_t checkpoint_iteration = 0;

  const std::size_t n = train_set.trials();
  const std::size_t batch = std::min(cfg.batch_size, n);
  std::vector<std::size_t> order = permutation(batch_rng, n);
  std::size_t cursor = 0;

  bool stopped = false;
  for (std::size_t it = 1; it <= cfg.max_iterations; ++it) {
    if (cursor + batch > n) {
      order = permutation(batch_rng, n);
      cursor = 0;
    }
    const std::span<const std::size_t> idx(order.data() + cursor, batch);
    cursor += batch;

    BatchGradient bg = batch_gradient(model.config, model.params, train_set, idx, dropout_rng, cfg.threads);
    if (!std::isfinite(bg.loss)) fail(ErrorCode::NonFinite, "training loss at iteration " + std::to_string(it));
    adam_step(model.params, bg.gradient, model.adam, cfg);
    report.iterations_run = it;

    if (it % cfg.eval_every == 0 || it == cfg.max_iterations) {
      const ValidationPoint vp = validation_point(model, val_set, it, cfg.threads);
      report.history.push_back(vp);
      const bool increased = vp.cross_entropy > prev_ce;
      const bool stalled = (prev_ce - vp.cross_entropy) < cfg.stop_delta;
      if (increased || stalled) {
        model = checkpoint;
        report.returned_iteration = checkpoint_iteration;
        report.stop_reason = StopReason::EarlyStop;
        stopped = true;
        break;
      }
      checkpoint = model;
      checkpoint_iteration = it;
      prev_ce = vp.cross_entropy;
    }
  }
  if (!stopped) {
    report.returned_iteration = report.iterations_run;
    report.stop_reason = StopReason::MaxIterations;
  }
  report.train_accuracy = evaluate(model.config, model.params, train_set, cfg.threads).accuracy;
  report.validation_accuracy = evaluate(model.config, model.params, val_set, cfg.threads).accuracy;
  return report;
}

double online_update(Model& model, const Tensor& epoch, int label, const TrainConfig& cfg, Rng& rng) {
  const Tensor mask = draw_dropout_mask(model.config, rng);
  const ForwardCache cache = forward(model.config, model.params, epoch, mask);
  const double before = loss(model.params, cache.probabilities, label, model.config.l1_lambda);
  const ModelParams grads = backward(model.config, model.params, cache, epoch, label);
  adam_step(model.params, grads, model.adam, cfg);
  return before;
}

}  // namespace megnet
