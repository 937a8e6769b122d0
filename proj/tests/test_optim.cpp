// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>

#include "doctest.h"
#include "megnet/modelio.hpp"
#include "megnet/optim.hpp"
#include "support.hpp"

using namespace megnet;
using testing::error_of;

namespace {

ModelConfig blob_config() {
  ModelConfig cfg;
  cfg.n_channels = 4;
  cfg.n_latent = 2;
  cfg.filter_len = 3;
  cfg.n_times = 12;
  cfg.n_classes = 2;
  cfg.dropout_rate = 0.2;
  cfg.l1_lambda = 1e-4;
  return cfg;
}

// Two classes whose epochs are Gaussian blobs around opposite patterns.
EpochSet blobs(std::size_t per_class, std::uint64_t seed) {
  Rng rng(seed);
  EpochSet set;
  set.n_classes = 2;
  set.sample_rate_hz = 125.0f;
  set.epochs = Tensor({2 * per_class, 4, 12});
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const int cls = static_cast<int>(i % 2);
    auto e = set.epochs.slice(i);
    for (std::size_t ch = 0; ch < 4; ++ch)
      for (std::size_t t = 0; t < 12; ++t) {
        const double centre = (cls == 0 ? 1.0 : -1.0) * (ch % 2 == 0 ? 1.0 : -1.0) * std::sin(0.5 * static_cast<double>(t));
        e[ch * 12 + t] = 2.0 * centre + 0.3 * rng.normal();
      }
    set.labels.push_back(cls);
    set.subjects.push_back(0);
  }
  return set;
}

}  // namespace

TEST_CASE("train config defaults") {
  const TrainConfig c;
  CHECK(c.learning_rate == 3e-4);
  CHECK(c.batch_size == 100);
  CHECK(c.beta1 == 0.9);
  CHECK(c.beta2 == 0.999);
  CHECK(c.adam_eps == 1e-8);
  CHECK(c.eval_every == 1000);
  CHECK(c.stop_delta == 1e-5);
  CHECK(c.max_iterations == 20000);
  TrainConfig bad;
  bad.beta1 = 1.0;
  CHECK(error_of([&] { bad.validate(); }) == ErrorCode::Parameter);
  bad = TrainConfig{};
  bad.batch_size = 0;
  CHECK(error_of([&] { bad.validate(); }) == ErrorCode::Parameter);
}

TEST_CASE("He-uniform initialisation") {
  ModelConfig cfg;
  cfg.n_channels = 64;
  cfg.n_times = 63;
  cfg.n_classes = 5;
  Rng rng(1);
  const ModelParams p = init_params(cfg, rng);
  for (double b : p.temporal_bias.values()) CHECK(b == 0.1);
  for (double b : p.out_bias.values()) CHECK(b == 0.1);
  auto within = [](const Tensor& t, double bound) {
    for (double v : t.values())
      if (std::abs(v) > bound) return false;
    return true;
  };
  CHECK(within(p.spatial, std::sqrt(6.0 / 64)));
  CHECK(within(p.temporal, std::sqrt(6.0 / 7)));
  CHECK(within(p.out_weights, std::sqrt(6.0 / static_cast<double>(cfg.features()))));

  cfg.variant = Variant::VAR;
  Rng rng2(1);
  CHECK(within(init_params(cfg, rng2).temporal, std::sqrt(6.0 / (7.0 * 32))));

  Rng a(9), b(9);
  CHECK(init_params(cfg, a) == init_params(cfg, b));
}

TEST_CASE("uniform draw spread matches b / sqrt(3)") {
  ModelConfig cfg;
  cfg.n_channels = 400;
  cfg.n_latent = 250;
  cfg.n_times = 10;
  cfg.n_classes = 2;
  Rng rng(2);
  const ModelParams p = init_params(cfg, rng);  // 10^5 spatial weights
  double sq = 0.0, mean = 0.0;
  for (double v : p.spatial.values()) mean += v;
  mean /= static_cast<double>(p.spatial.size());
  for (double v : p.spatial.values()) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / static_cast<double>(p.spatial.size() - 1));
  const double expected = he_uniform_bound(400) / std::sqrt(3.0);
  CHECK(std::abs(sd - expected) / expected < 0.03);
}

TEST_CASE("Adam step") {
  ModelConfig cfg = blob_config();
  Rng rng(3);
  ModelParams p = init_params(cfg, rng);
  const ModelParams before = p;
  AdamState state = AdamState::zeros(cfg);
  TrainConfig tc;
  adam_step(p, ModelParams::zeros(cfg), state, tc);
  CHECK(p == before);
  CHECK(state.step == 1);

  // Single coordinate with g = 1: m_hat = 1, v_hat = 1, delta = -lr / (1 + eps).
  ModelParams g = ModelParams::zeros(cfg);
  g.out_bias[0] = 1.0;
  AdamState fresh = AdamState::zeros(cfg);
  ModelParams q = before;
  adam_step(q, g, fresh, tc);
  const double m = (1 - tc.beta1) * 1.0, v = (1 - tc.beta2) * 1.0;
  const double mhat = m / (1 - tc.beta1), vhat = v / (1 - tc.beta2);
  const double expected = before.out_bias[0] - tc.learning_rate * mhat / (std::sqrt(vhat) + tc.adam_eps);
  CHECK(std::abs(q.out_bias[0] - expected) < 1e-12);
  CHECK(std::abs((q.out_bias[0] - before.out_bias[0]) + tc.learning_rate) < 1e-9);
  CHECK(q.out_bias[1] == before.out_bias[1]);
}

TEST_CASE("Adam rejects non-finite gradients and names the tensor") {
  ModelConfig cfg = blob_config();
  Rng rng(4);
  ModelParams p = init_params(cfg, rng);
  const ModelParams before = p;
  AdamState state = AdamState::zeros(cfg);
  ModelParams g = ModelParams::zeros(cfg);
  g.temporal[1] = std::numeric_limits<double>::quiet_NaN();
  try {
    adam_step(p, g, state, TrainConfig{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFinite);
    CHECK(std::string(e.what()).find("temporal") != std::string::npos);
  }
  CHECK(p == before);
  CHECK(state.step == 0);
}

TEST_CASE("Adam runs are reproducible") {
  ModelConfig cfg = blob_config();
  auto run = [&] {
    Rng rng(5);
    ModelParams p = init_params(cfg, rng);
    AdamState s = AdamState::zeros(cfg);
    for (int i = 0; i < 100; ++i) {
      ModelParams g = ModelParams::zeros(cfg);
      for (Tensor* t : g.tensors()) *t = rng_normal(rng, 0, 1, t->shape());
      adam_step(p, g, s, TrainConfig{});
    }
    return p;
  };
  CHECK(run() == run());
}

TEST_CASE("training on separable blobs") {
  const ModelConfig cfg = blob_config();
  const EpochSet tr = blobs(100, 1), va = blobs(20, 2);
  TrainConfig tc;
  tc.learning_rate = 1e-2;
  tc.batch_size = 20;
  tc.eval_every = 25;
  tc.max_iterations = 2000;
  tc.seed = 3;
  Rng rng(6);
  Model m = make_model(cfg, rng);
  const TrainReport r = train(m, tr, va, tc);
  CHECK(r.stop_reason == StopReason::EarlyStop);
  CHECK(r.train_accuracy == 1.0);
  CHECK(r.validation_accuracy == 1.0);
  CHECK(r.history.size() == (r.iterations_run + tc.eval_every - 1) / tc.eval_every);
  CHECK(r.returned_iteration < r.iterations_run);
  CHECK(r.returned_iteration == r.iterations_run - tc.eval_every);

  Rng again(6);
  Model m2 = make_model(cfg, again);
  const TrainReport r2 = train(m2, tr, va, tc);
  CHECK(m2 == m);
  CHECK(r2.history.size() == r.history.size());
}

TEST_CASE("infinite stop delta stops at the first check") {
  const ModelConfig cfg = blob_config();
  const EpochSet tr = blobs(30, 1), va = blobs(10, 2);
  TrainConfig tc;
  tc.batch_size = 10;
  tc.eval_every = 5;
  tc.stop_delta = std::numeric_limits<double>::infinity();
  Rng rng(7);
  Model m = make_model(cfg, rng);
  const Model initial = m;
  const TrainReport r = train(m, tr, va, tc);
  CHECK(r.iterations_run == 5);
  CHECK(r.history.size() == 1);
  CHECK(r.returned_iteration == 0);
  CHECK(m == initial);
}

TEST_CASE("steadily improving validation runs to max_iterations") {
  const ModelConfig cfg = blob_config();
  const EpochSet tr = blobs(30, 1), va = blobs(10, 2);
  TrainConfig tc;
  tc.learning_rate = 1e-3;
  tc.batch_size = 10;
  tc.eval_every = 10;
  tc.max_iterations = 30;
  tc.stop_delta = 0.0;  // only a rise stops training
  Rng rng(8);
  Model m = make_model(cfg, rng);
  const TrainReport r = train(m, tr, va, tc);
  bool improving = r.history.front().cross_entropy < r.initial.cross_entropy;
  for (std::size_t i = 1; i < r.history.size(); ++i)
    improving &= r.history[i].cross_entropy < r.history[i - 1].cross_entropy;
  REQUIRE(improving);
  CHECK(r.stop_reason == StopReason::MaxIterations);
  CHECK(r.iterations_run == 30);
  CHECK(r.returned_iteration == 30);
}

TEST_CASE("zero iterations leave the initialisation untouched") {
  const ModelConfig cfg = blob_config();
  TrainConfig tc;
  tc.max_iterations = 0;
  Rng rng(9);
  Model m = make_model(cfg, rng);
  const Model initial = m;
  const TrainReport r = train(m, blobs(10, 1), blobs(5, 2), tc);
  CHECK(m == initial);
  CHECK(r.iterations_run == 0);
  CHECK(r.history.empty());
}

TEST_CASE("training loss falls over the first iterations") {
  const ModelConfig cfg = blob_config();
  const EpochSet tr = blobs(50, 4);
  Rng rng(10);
  Model m = make_model(cfg, rng);
  std::vector<std::size_t> idx(tr.trials());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  TrainConfig tc;
  tc.learning_rate = 3e-3;
  std::vector<double> losses;
  Rng dropout(11);
  for (int it = 0; it < 50; ++it) {
    ModelConfig no_drop = cfg;
    no_drop.dropout_rate = 0.0;
    Rng fixed(0);
    losses.push_back(batch_gradient(no_drop, m.params, tr, idx, fixed).loss);
    BatchGradient bg = batch_gradient(cfg, m.params, tr, idx, dropout);
    adam_step(m.params, bg.gradient, m.adam, tc);
  }
  // Moving averages over windows of 10 decrease.
  for (std::size_t i = 10; i + 10 <= losses.size(); i += 10) {
    double a = 0.0, b = 0.0;
    for (std::size_t j = 0; j < 10; ++j) {
      a += losses[i - 10 + j];
      b += losses[i + j];
    }
    CHECK(b < a);
  }
}

TEST_CASE("online update") {
  const ModelConfig cfg = blob_config();
  const EpochSet set = blobs(5, 3);
  Rng rng(12);
  Model m = make_model(cfg, rng);
  TrainConfig tc;
  tc.learning_rate = 1e-3;

  // Zero learning rate leaves the weights alone.
  TrainConfig frozen = tc;
  frozen.learning_rate = 0.0;
  Model z = m;
  Rng r0(1);
  online_update(z, set.epoch_tensor(0), set.labels[0], frozen, r0);
  CHECK(z.params == m.params);

  // One step does not increase the loss on the same trial.
  ModelConfig no_drop = cfg;
  no_drop.dropout_rate = 0.0;
  Model d = m;
  d.config = no_drop;
  const Tensor x = set.epoch_tensor(1);
  const double before = loss(d.params, forward(no_drop, d.params, x).probabilities, set.labels[1], 0.0);
  Rng r1(2);
  online_update(d, x, set.labels[1], tc, r1);
  const double after = loss(d.params, forward(no_drop, d.params, x).probabilities, set.labels[1], 0.0);
  CHECK(after <= before);

  // Sequences of updates are reproducible and Adam state persists.
  auto run = [&] {
    Model c = m;
    Rng r(3);
    for (int i = 0; i < 20; ++i) online_update(c, set.epoch_tensor(static_cast<std::size_t>(i) % set.trials()), set.labels[static_cast<std::size_t>(i) % set.trials()], tc, r);
    return c;
  };
  const Model a = run(), b = run();
  CHECK(a == b);
  CHECK(a.adam.step == m.adam.step + 20);
}

TEST_CASE("model file round trip") {
  for (Variant v : {Variant::LF, Variant::VAR}) {
    ModelConfig cfg = blob_config();
    cfg.variant = v;
    Rng rng(13);
    Model m = make_model(cfg, rng);
    m.adam.step = 17;
    m.adam.first.spatial[0] = 0.25;
    const auto path = testing::temp_path(std::string("model-") + to_string(v) + ".megw");
    write_model(path, m);
    CHECK(read_model(path) == m);

    const Model bare = decode_model(encode_model(m, false));
    CHECK(bare.params == m.params);
    CHECK(bare.config == m.config);
    CHECK(bare.adam.step == 0);

    auto bytes = encode_model(m);
    bytes.pop_back();
    CHECK(error_of([&] { decode_model(bytes); }) == ErrorCode::Format);
    bytes = encode_model(m);
    bytes[1] = 'X';
    CHECK(error_of([&] { decode_model(bytes); }) == ErrorCode::Format);
  }
}

TEST_CASE("validation report CSV") {
  TrainReport r;
  r.initial = {0, 1.5, 1.4, 0.2};
  r.history = {{10, 1.0, 0.9, 0.5}};
  const std::string csv = report_csv(r);
  CHECK(csv.rfind("iteration,val_cost,val_ce,val_acc\n0,", 0) == 0);
  CHECK(csv.find("\n10,") != std::string::npos);
}
