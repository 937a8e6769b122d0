// SPDX-License-Identifier: Apache-2.0
// Shared helpers for the unit tests: naive loop oracles that do not reuse any
// library kernel, and small fixtures.
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "megnet/error.hpp"
#include "megnet/model.hpp"
#include "megnet/rng.hpp"
#include "megnet/tensor.hpp"

namespace testing {

using megnet::ErrorCode;
using megnet::Tensor;

template <class F>
std::optional<ErrorCode> error_of(F&& f) {
  try {
    f();
  } catch (const megnet::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor c({a.dim(0), b.dim(1)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < b.dim(1); ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < a.dim(1); ++r) s += a(i, r) * b(r, j);
      c(i, j) = s;
    }
  return c;
}

inline std::vector<double> naive_conv(const std::vector<double>& x, const std::vector<double>& k) {
  std::vector<double> out(x.size() - k.size() + 1, 0.0);
  for (std::size_t i = 0; i < out.size(); ++i)
    for (std::size_t j = 0; j < k.size(); ++j) out[i] += x[i + j] * k[j];
  return out;
}

struct NaivePool {
  std::vector<double> values;
  std::vector<std::size_t> argmax;
};

inline NaivePool naive_pool(const std::vector<double>& x, std::size_t factor, std::size_t stride) {
  NaivePool p;
  for (std::size_t start = 0; start + factor <= x.size(); start += stride) {
    std::size_t best = start;
    for (std::size_t j = start + 1; j < start + factor; ++j)
      if (x[j] > x[best]) best = j;
    p.values.push_back(x[best]);
    p.argmax.push_back(best);
  }
  return p;
}

inline std::vector<double> naive_softmax(const std::vector<double>& z) {
  std::vector<double> e(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += e[i] = std::exp(z[i]);
  for (double& v : e) v /= s;
  return e;
}

// Probabilities of the network computed with plain loops from the
// architecture definition (no dropout).
inline std::vector<double> naive_network(const megnet::ModelConfig& cfg, const megnet::ModelParams& p,
                                         const Tensor& x) {
  const std::size_t n = cfg.n_channels, k = cfg.n_latent, t = cfg.n_times, l = cfg.filter_len;
  std::vector<std::vector<double>> latent(k, std::vector<double>(t, 0.0));
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t s = 0; s < t; ++s)
      for (std::size_t i = 0; i < n; ++i) latent[c][s] += p.spatial(i, c) * x(i, s);
  std::vector<double> features;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> conv(t - l + 1, p.temporal_bias[c]);
    for (std::size_t s = 0; s < conv.size(); ++s)
      for (std::size_t j = 0; j < l; ++j) {
        if (cfg.variant == megnet::Variant::LF) {
          conv[s] += latent[c][s + j] * p.temporal(c, j);
        } else {
          for (std::size_t c2 = 0; c2 < k; ++c2) conv[s] += latent[c2][s + j] * p.temporal(c, j, c2);
        }
      }
    for (double& v : conv) v = std::max(0.0, v);
    const auto pooled = naive_pool(conv, cfg.pool_factor, cfg.pool_stride);
    features.insert(features.end(), pooled.values.begin(), pooled.values.end());
  }
  std::vector<double> logits(cfg.n_classes);
  for (std::size_t cls = 0; cls < cfg.n_classes; ++cls) {
    logits[cls] = p.out_bias[cls];
    for (std::size_t f = 0; f < features.size(); ++f) logits[cls] += features[f] * p.out_weights(f, cls);
  }
  return naive_softmax(logits);
}

inline std::filesystem::path temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "megnet-tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace testing
