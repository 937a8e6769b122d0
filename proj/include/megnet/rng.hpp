// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <utility>
#include <vector>

#include "megnet/tensor.hpp"

namespace megnet {

// xoshiro256** seeded through splitmix64. The algorithm and constants are
// fixed so a seed reproduces the same stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  // Independent stream keyed by (seed, keys...), e.g. (seed, subject, trial).
  static Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  double uniform();  // [0, 1), 53 random bits
  double uniform(double low, double high);
  double normal();   // Marsaglia polar method
  double normal(double mean, double std) { return mean + std * normal(); }
  std::size_t below(std::size_t n);  // uniform integer in [0, n)

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

Tensor rng_uniform(Rng& rng, double low, double high, Shape shape);
Tensor rng_normal(Rng& rng, double mean, double std, Shape shape);

std::vector<std::size_t> permutation(Rng& rng, std::size_t n);

}  // namespace megnet
