// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace megnet {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

// Dense row-major array of doubles. A default-constructed tensor is the
// empty (rank-0, size-0) tensor; every other tensor has all dimensions >= 1.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor vector(std::initializer_list<double> values);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor identity(std::size_t n);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  // Contiguous slice over the leading axis (a row of a matrix, a trial of an
  // epoch stack).
  std::span<double> slice(std::size_t i);
  std::span<const double> slice(std::size_t i) const;

  Tensor reshaped(Shape shape) const;
  bool all_finite() const;

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Throws ErrorCode::NonFinite naming `what` if any element is NaN or Inf.
void ensure_finite(const Tensor& t, const std::string& what);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Cross-correlation with valid padding: out[i] = sum_j signal[i + j] * kernel[j].
Tensor conv1d_valid(const Tensor& signal, const Tensor& kernel);

struct PoolResult {
  Tensor values;
  std::vector<std::size_t> argmax;  // absolute index into the input
};

// Max over windows of `factor` samples taken every `stride` samples. Ties go
// to the first maximum.
PoolResult max_pool1d(std::span<const double> x, std::size_t factor, std::size_t stride);
std::size_t pooled_length(std::size_t length, std::size_t factor, std::size_t stride);

Tensor softmax(const Tensor& logits);

// Row-mean-centred sample covariance of an n x T matrix, divisor T - 1.
Tensor covariance(const Tensor& x);

// Inverse of (a + ridge * I) for symmetric a, via Cholesky.
Tensor sym_inverse(const Tensor& a, double ridge = 0.0);

// Symmetric eigenvalues by cyclic Jacobi, ascending. Used by checks, not by
// the training path.
std::vector<double> sym_eigenvalues(const Tensor& a);

double frobenius_norm(const Tensor& a);
double l1_norm(const Tensor& a);
double pearson(std::span<const double> a, std::span<const double> b);

}  // namespace megnet
