// SPDX-License-Identifier: Apache-2.0
#include "megnet/megnet.h"

#include <cstring>
#include <exception>
#include <new>
#include <set>
#include <string>

#include "megnet/dataio.hpp"
#include "megnet/error.hpp"
#include "megnet/modelio.hpp"
#include "megnet/pipeline.hpp"

struct megnet_options {
  megnet::Options value;
};

struct megnet_dataset {
  megnet::EpochSet value;
};

struct megnet_model {
  megnet::Model value;
};

namespace {

thread_local std::string g_last_error;

megnet_status status_of(megnet::ErrorCode code) {
  using megnet::ErrorCode;
  switch (code) {
    case ErrorCode::Parameter: return MEGNET_E_PARAMETER;
    case ErrorCode::Dimension: return MEGNET_E_DIMENSION;
    case ErrorCode::Format: return MEGNET_E_FORMAT;
    case ErrorCode::Io: return MEGNET_E_IO;
    case ErrorCode::Singular: return MEGNET_E_SINGULAR;
    case ErrorCode::NonFinite: return MEGNET_E_NONFINITE;
    case ErrorCode::Stability: return MEGNET_E_STABILITY;
    case ErrorCode::Contract: return MEGNET_E_CONTRACT;
    case ErrorCode::InsufficientSamples: return MEGNET_E_INSUFFICIENT_SAMPLES;
  }
  return MEGNET_E_INTERNAL;
}

template <class F>
megnet_status guard(F&& body) {
  try {
    body();
    g_last_error.clear();
    return MEGNET_OK;
  } catch (const megnet::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return MEGNET_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MEGNET_E_INTERNAL;
  }
}

megnet_status null_argument(const char* name) {
  g_last_error = std::string("null argument: ") + name;
  return MEGNET_E_NULL_ARGUMENT;
}

char* copy_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <class F>
megnet_status run(const megnet_options* options, char** report, F command) {
  if (!options) return null_argument("options");
  if (!report) return null_argument("report");
  *report = nullptr;
  return guard([&] { *report = copy_string(command(options->value)); });
}

}  // namespace

extern "C" {

const char* megnet_last_error(void) { return g_last_error.c_str(); }

const char* megnet_status_name(megnet_status status) {
  switch (status) {
    case MEGNET_OK: return "ok";
    case MEGNET_E_PARAMETER: return "parameter error";
    case MEGNET_E_DIMENSION: return "dimension error";
    case MEGNET_E_FORMAT: return "format error";
    case MEGNET_E_IO: return "I/O error";
    case MEGNET_E_SINGULAR: return "singular matrix";
    case MEGNET_E_NONFINITE: return "non-finite value";
    case MEGNET_E_STABILITY: return "unstable process";
    case MEGNET_E_CONTRACT: return "contract violation";
    case MEGNET_E_INSUFFICIENT_SAMPLES: return "insufficient samples";
    case MEGNET_E_NULL_ARGUMENT: return "null argument";
    case MEGNET_E_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* megnet_version(void) { return "1.0.0"; }

void megnet_string_free(char* text) { delete[] text; }

megnet_status megnet_options_create(megnet_options** out) {
  if (!out) return null_argument("out");
  *out = nullptr;
  return guard([&] { *out = new megnet_options{}; });
}

void megnet_options_free(megnet_options* options) { delete options; }

megnet_status megnet_options_set(megnet_options* options, const char* key, const char* value) {
  if (!options) return null_argument("options");
  if (!key) return null_argument("key");
  if (!value) return null_argument("value");
  return guard([&] { options->value.set(key, value); });
}

megnet_status megnet_options_load(megnet_options* options, const char* path) {
  if (!options) return null_argument("options");
  if (!path) return null_argument("path");
  return guard([&] { options->value.load_file(path); });
}

megnet_status megnet_options_get(const megnet_options* options, const char* key, char** value) {
  if (!options) return null_argument("options");
  if (!key) return null_argument("key");
  if (!value) return null_argument("value");
  *value = nullptr;
  return guard([&] { *value = copy_string(options->value.get(key)); });
}

megnet_status megnet_options_dump(const megnet_options* options, char** text) {
  return run(options, text, [](const megnet::Options& o) { return o.dump(); });
}

megnet_status megnet_option_info(size_t index, const char** key, const char** default_value, const char** help) {
  const auto specs = megnet::option_specs();
  if (index >= specs.size()) {
    g_last_error = "option index out of range";
    return MEGNET_E_PARAMETER;
  }
  if (key) *key = specs[index].key;
  if (default_value) *default_value = specs[index].default_value;
  if (help) *help = specs[index].help;
  return MEGNET_OK;
}

megnet_status megnet_synth(const megnet_options* o, char** r) { return run(o, r, megnet::cmd_synth); }
megnet_status megnet_train(const megnet_options* o, char** r) { return run(o, r, megnet::cmd_train); }
megnet_status megnet_eval(const megnet_options* o, char** r) { return run(o, r, megnet::cmd_eval); }
megnet_status megnet_rtsim(const megnet_options* o, char** r) { return run(o, r, megnet::cmd_rtsim); }
megnet_status megnet_interpret(const megnet_options* o, char** r) { return run(o, r, megnet::cmd_interpret); }
megnet_status megnet_describe(const megnet_options* o, char** r) { return run(o, r, megnet::cmd_describe); }

megnet_status megnet_dataset_read(const char* path, megnet_dataset** out) {
  if (!path) return null_argument("path");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guard([&] { *out = new megnet_dataset{megnet::read_epochs(path)}; });
}

megnet_status megnet_dataset_info_get(const megnet_dataset* dataset, megnet_dataset_info* info) {
  if (!dataset) return null_argument("dataset");
  if (!info) return null_argument("info");
  const auto& d = dataset->value;
  info->trials = d.trials();
  info->channels = d.channels();
  info->times = d.times();
  info->classes = static_cast<size_t>(d.n_classes);
  info->subjects = megnet::distinct_subjects(d).size();
  info->sample_rate_hz = d.sample_rate_hz;
  return MEGNET_OK;
}

megnet_status megnet_dataset_epoch(const megnet_dataset* dataset, size_t index, double* buffer, size_t capacity,
                                   int* label, int* subject) {
  if (!dataset) return null_argument("dataset");
  if (!buffer) return null_argument("buffer");
  return guard([&] {
    const auto& d = dataset->value;
    if (index >= d.trials()) megnet::fail(megnet::ErrorCode::Parameter, "trial index out of range");
    const auto e = d.epoch(index);
    if (capacity < e.size()) megnet::fail(megnet::ErrorCode::Dimension, "buffer smaller than one epoch");
    std::memcpy(buffer, e.data(), e.size() * sizeof(double));
    if (label) *label = d.labels[index];
    if (subject) *subject = d.subjects[index];
  });
}

void megnet_dataset_free(megnet_dataset* dataset) { delete dataset; }

megnet_status megnet_model_read(const char* path, megnet_model** out) {
  if (!path) return null_argument("path");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guard([&] { *out = new megnet_model{megnet::read_model(path)}; });
}

megnet_status megnet_model_write(const megnet_model* model, const char* path) {
  if (!model) return null_argument("model");
  if (!path) return null_argument("path");
  return guard([&] { megnet::write_model(path, model->value); });
}

megnet_status megnet_model_describe(const megnet_model* model, char** text) {
  if (!model) return null_argument("model");
  if (!text) return null_argument("text");
  *text = nullptr;
  return guard([&] { *text = copy_string(megnet::describe(model->value.config)); });
}

megnet_status megnet_model_parameter_count(const megnet_model* model, size_t* total, size_t* temporal) {
  if (!model) return null_argument("model");
  return guard([&] {
    if (total) *total = model->value.params.count();
    if (temporal) *temporal = model->value.params.temporal.size();
  });
}

megnet_status megnet_model_predict(const megnet_model* model, const double* epoch, size_t channels, size_t times,
                                   int* label, double* probabilities, size_t n_probabilities) {
  if (!model) return null_argument("model");
  if (!epoch) return null_argument("epoch");
  return guard([&] {
    const auto& m = model->value;
    if (channels != m.config.n_channels || times != m.config.n_times)
      megnet::fail(megnet::ErrorCode::Dimension, "epoch is " + std::to_string(channels) + " x " + std::to_string(times) +
                                                     ", model expects " + std::to_string(m.config.n_channels) + " x " +
                                                     std::to_string(m.config.n_times));
    megnet::Tensor x({channels, times}, std::vector<double>(epoch, epoch + channels * times));
    const auto cache = megnet::forward(m.config, m.params, x);
    const auto& p = cache.probabilities;
    std::size_t best = 0;
    for (std::size_t c = 1; c < p.size(); ++c)
      if (p[c] > p[best]) best = c;
    if (label) *label = static_cast<int>(best);
    if (probabilities) {
      if (n_probabilities < p.size()) megnet::fail(megnet::ErrorCode::Dimension, "probability buffer too small");
      std::memcpy(probabilities, p.data(), p.size() * sizeof(double));
    }
  });
}

void megnet_model_free(megnet_model* model) { delete model; }

}  // extern "C"
