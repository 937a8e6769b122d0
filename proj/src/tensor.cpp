// SPDX-License-Identifier: Apache-2.0
#include "megnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "megnet/error.hpp"

namespace megnet {

namespace {

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) fail(ErrorCode::Dimension, "zero-sized dimension in shape " + shape_string(shape));
    n *= d;
  }
  return shape.empty() ? 0 : n;
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    fail(ErrorCode::Dimension, std::string(op) + " expects rank " + std::to_string(rank) +
                                   ", got shape " + shape_string(t.shape()));
  }
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  data_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (element_count(shape_) != data_.size()) {
    fail(ErrorCode::Dimension, "shape " + shape_string(shape_) + " does not match " +
                                   std::to_string(data_.size()) + " elements");
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::vector(std::vector<double> values) {
  std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t r = rows.size();
  std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) fail(ErrorCode::Dimension, "ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

std::span<double> Tensor::slice(std::size_t i) {
  std::size_t stride = data_.size() / shape_.at(0);
  return std::span<double>(data_).subspan(i * stride, stride);
}

std::span<const double> Tensor::slice(std::size_t i) const {
  std::size_t stride = data_.size() / shape_.at(0);
  return std::span<const double>(data_).subspan(i * stride, stride);
}

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void ensure_finite(const Tensor& t, const std::string& what) {
  if (!t.all_finite()) fail(ErrorCode::NonFinite, what);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.dim(1) != b.dim(0)) {
    fail(ErrorCode::Dimension, "matmul inner dimensions differ: " + shape_string(a.shape()) +
                                   " x " + shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
  Tensor c({m, p});
  for (std::size_t i = 0; i < m; ++i) {
    double* out = c.data() + i * p;
    for (std::size_t r = 0; r < k; ++r) {
      const double s = a(i, r);
      const double* brow = b.data() + r * p;
      for (std::size_t j = 0; j < p; ++j) out[j] += s * brow[j];
    }
  }
  ensure_finite(c, "matmul result");
  return c;
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  Tensor t({a.dim(1), a.dim(0)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < a.dim(1); ++j) t(j, i) = a(i, j);
  return t;
}

Tensor conv1d_valid(const Tensor& signal, const Tensor& kernel) {
  require_rank(signal, 1, "conv1d_valid");
  require_rank(kernel, 1, "conv1d_valid");
  const std::size_t t = signal.size(), l = kernel.size();
  if (l > t) {
    fail(ErrorCode::Dimension, "kernel of length " + std::to_string(l) +
                                   " is longer than signal of length " + std::to_string(t));
  }
  Tensor out({t - l + 1});
  for (std::size_t j = 0; j < l; ++j) {
    const double w = kernel[j];
    for (std::size_t i = 0; i + l <= t; ++i) out[i] += w * signal[i + j];
  }
  ensure_finite(out, "conv1d_valid result");
  return out;
}

std::size_t pooled_length(std::size_t length, std::size_t factor, std::size_t stride) {
  if (factor == 0 || stride == 0) fail(ErrorCode::Parameter, "pool factor and stride must be >= 1");
  if (length < factor) return 0;
  return (length - factor) / stride + 1;
}

PoolResult max_pool1d(std::span<const double> x, std::size_t factor, std::size_t stride) {
  const std::size_t n = pooled_length(x.size(), factor, stride);
  if (n == 0) fail(ErrorCode::Dimension, "input shorter than pool window");
  PoolResult r{Tensor({n}), std::vector<std::size_t>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = i * stride;
    for (std::size_t m = 1; m < factor; ++m) {
      if (x[i * stride + m] > x[best]) best = i * stride + m;
    }
    r.values[i] = x[best];
    r.argmax[i] = best;
  }
  return r;
}

Tensor softmax(const Tensor& logits) {
  require_rank(logits, 1, "softmax");
  ensure_finite(logits, "softmax input");
  const double top = *std::max_element(logits.values().begin(), logits.values().end());
  Tensor p({logits.size()});
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - top);
    total += p[i];
  }
  for (double& v : p.values()) v /= total;
  return p;
}

Tensor covariance(const Tensor& x) {
  require_rank(x, 2, "covariance");
  const std::size_t n = x.dim(0), t = x.dim(1);
  if (t < 2) fail(ErrorCode::InsufficientSamples, "covariance needs at least 2 samples");
  Tensor centred = x;
  for (std::size_t i = 0; i < n; ++i) {
    auto row = centred.slice(i);
    const double mean = std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(t);
    for (double& v : row) v -= mean;
  }
  Tensor c({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    auto ri = centred.slice(i);
    for (std::size_t j = i; j < n; ++j) {
      auto rj = centred.slice(j);
      double s = std::inner_product(ri.begin(), ri.end(), rj.begin(), 0.0);
      c(i, j) = c(j, i) = s / static_cast<double>(t - 1);
    }
  }
  ensure_finite(c, "covariance result");
  return c;
}

Tensor sym_inverse(const Tensor& a, double ridge) {
  require_rank(a, 2, "sym_inverse");
  const std::size_t n = a.dim(0);
  if (a.dim(1) != n) fail(ErrorCode::Dimension, "sym_inverse needs a square matrix, got " + shape_string(a.shape()));
  ensure_finite(a, "sym_inverse input");

  // Cholesky a + ridge I = L L^T, lower triangle.
  Tensor lower({n, n});
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j) + ridge;
    for (std::size_t r = 0; r < j; ++r) d -= lower(j, r) * lower(j, r);
    if (!(d > 0.0)) {
      fail(ErrorCode::Singular, "matrix is not positive definite (pivot " + std::to_string(j) + ")");
    }
    lower(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = 0.5 * (a(i, j) + a(j, i));
      for (std::size_t r = 0; r < j; ++r) s -= lower(i, r) * lower(j, r);
      lower(i, j) = s / lower(j, j);
    }
  }
  // Invert L by forward substitution, then inverse = L^-T L^-1.
  Tensor linv({n, n});
  for (std::size_t j = 0; j < n; ++j) {
    linv(j, j) = 1.0 / lower(j, j);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = 0.0;
      for (std::size_t r = j; r < i; ++r) s -= lower(i, r) * linv(r, j);
      linv(i, j) = s / lower(i, i);
    }
  }
  Tensor inv({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t r = i; r < n; ++r) s += linv(r, i) * linv(r, j);
      inv(i, j) = inv(j, i) = s;
    }
  }
  ensure_finite(inv, "sym_inverse result");
  return inv;
}

std::vector<double> sym_eigenvalues(const Tensor& a) {
  require_rank(a, 2, "sym_eigenvalues");
  const std::size_t n = a.dim(0);
  Tensor m = a;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += m(p, q) * m(p, q);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (m(p, q) == 0.0) continue;
        const double theta = (m(q, q) - m(p, p)) / (2.0 * m(p, q));
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t r = 0; r < n; ++r) {
          const double mrp = m(r, p), mrq = m(r, q);
          m(r, p) = c * mrp - s * mrq;
          m(r, q) = s * mrp + c * mrq;
        }
        for (std::size_t r = 0; r < n; ++r) {
          const double mpr = m(p, r), mqr = m(q, r);
          m(p, r) = c * mpr - s * mqr;
          m(q, r) = s * mpr + c * mqr;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = m(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

double frobenius_norm(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return std::sqrt(s);
}

double l1_norm(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += std::abs(v);
  return s;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) fail(ErrorCode::Dimension, "pearson needs equal-length inputs of size >= 2");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace megnet
