// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <set>

#include "doctest.h"
#include "megnet/dataio.hpp"
#include "megnet/synthgen.hpp"
#include "support.hpp"

using namespace megnet;
using testing::error_of;

namespace {

EpochSet small_set(std::size_t subjects = 3, std::size_t per_class = 10, int classes = 3) {
  EpochSet set;
  set.n_classes = classes;
  set.sample_rate_hz = 125.0f;
  const std::size_t trials = subjects * per_class * static_cast<std::size_t>(classes);
  Rng rng(12);
  set.epochs = rng_normal(rng, 0, 1, {trials, 4, 9});
  for (std::size_t i = 0; i < trials; ++i) {
    set.labels.push_back(static_cast<int>(i % static_cast<std::size_t>(classes)));
    set.subjects.push_back(static_cast<int>(i / (per_class * static_cast<std::size_t>(classes))));
  }
  return set;
}

std::string format_error(std::span<const std::uint8_t> bytes) {
  try {
    decode_epochs(bytes);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Format);
    return e.what();
  }
  FAIL("expected a format error");
  return {};
}

}  // namespace

TEST_CASE("epoch file round trip") {
  const EpochSet set = small_set();
  const auto path = testing::temp_path("roundtrip.megb");
  write_epochs(path, set);
  CHECK(read_epochs(path) == set);
  const auto bytes = encode_epochs(set);
  CHECK(bytes.size() == EpochFileHeader::kBytes + 4 * set.trials() + 8 * set.epochs.size());
  CHECK(bytes[0] == 'M');
  CHECK(bytes[3] == 'B');
}

TEST_CASE("32-bit payload round trip is float-exact") {
  EpochSet set = small_set(2, 2, 2);
  for (double& v : set.epochs.values()) v = static_cast<float>(v);
  CHECK(decode_epochs(encode_epochs(set, false)) == set);
}

TEST_CASE("corrupted epoch files are format errors naming the field") {
  const EpochSet set = small_set();
  auto bytes = encode_epochs(set);

  auto truncated = bytes;
  truncated.pop_back();
  CHECK(format_error(truncated).find("payload") != std::string::npos);

  auto magic = bytes;
  magic[0] = 'X';
  CHECK(format_error(magic).find("magic") != std::string::npos);

  auto version = bytes;
  version[4] = 9;
  CHECK(format_error(version).find("version") != std::string::npos);

  auto zero = bytes;
  zero[6] = zero[7] = zero[8] = zero[9] = 0;
  CHECK(format_error(zero).find("n_trials") != std::string::npos);

  auto extra = bytes;
  extra.push_back(0);
  format_error(extra);

  auto label = bytes;
  label[EpochFileHeader::kBytes] = 7;  // class 7 of 3
  CHECK(format_error(label).find("label") != std::string::npos);

  CHECK(format_error(std::span<const std::uint8_t>(bytes.data(), 10)).find("truncated") != std::string::npos);
}

TEST_CASE("missing files are I/O errors") {
  CHECK(error_of([] { read_epochs("/nonexistent/dir/file.megb"); }) == ErrorCode::Io);
}

TEST_CASE("baseline scaling") {
  // One channel with baseline {1, 3}: mean 2, std sqrt(2).
  const Tensor e = Tensor::matrix({{1, 3, 5}});
  const Tensor s = baseline_scale(e, 2);
  CHECK(s(0, 2) == doctest::Approx((5.0 - 2.0) / std::sqrt(2.0)));
  CHECK(s(0, 0) == doctest::Approx(-1.0 / std::sqrt(2.0)));

  const Tensor constant({3, 5}, 4.0);
  const Tensor z = baseline_scale(constant, 3);
  for (double v : z.values()) CHECK(v == 0.0);

  CHECK(error_of([&] { baseline_scale(e, 0); }) == ErrorCode::Parameter);
  CHECK(error_of([&] { baseline_scale(e, 4); }) == ErrorCode::Parameter);
}

TEST_CASE("baseline already standard is left unchanged") {
  const Tensor e = Tensor::matrix({{1, -1, 7}, {1, -1, -2}});  // baseline values 1,-1,1,-1: mean 0
  Tensor scaled_input = e;
  // std of {1,-1,1,-1} with divisor 3 is sqrt(4/3); rescale so it is 1.
  const double sd = std::sqrt(4.0 / 3.0);
  for (double& v : scaled_input.values()) v /= sd;
  const Tensor s = baseline_scale(scaled_input, 2);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(s[i] == doctest::Approx(scaled_input[i]).epsilon(1e-12));
}

TEST_CASE("baseline scaling is affine invariant") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = rng_normal(rng, 0, 1, {5, 12});
    const double a = rng.uniform(0.1, 10), b = rng.uniform(-5, 5);
    Tensor y = x;
    for (double& v : y.values()) v = a * v + b;
    const Tensor sx = baseline_scale(x, 4), sy = baseline_scale(y, 4);
    for (std::size_t i = 0; i < sx.size(); ++i) CHECK(std::abs(sx[i] - sy[i]) < 1e-10);
  }
}

TEST_CASE("decimation") {
  const Tensor e = Tensor::matrix({{0, 1, 2, 3, 4, 5, 6, 7}});
  CHECK(decimate(e, 1) == e);
  CHECK(decimate(e, 2) == Tensor::matrix({{0, 2, 4, 6}}));
  CHECK(decimate(e, 3) == Tensor::matrix({{0, 3, 6}}));
  CHECK(error_of([&] { decimate(e, 0); }) == ErrorCode::Parameter);

  EpochSet set = small_set(1, 1, 2);
  set.sample_rate_hz = 1000.0f;
  const EpochSet d = decimate(set, 8);
  CHECK(d.sample_rate_hz == 125.0f);
  CHECK(d.times() == 2);
}

TEST_CASE("preprocess drops the baseline") {
  const EpochSet set = small_set(1, 2, 2);
  const EpochSet p = preprocess(set, 3);
  CHECK(p.times() == set.times() - 3);
  const Tensor full = baseline_scale(set.epoch_tensor(1), 3);
  const Tensor cut = p.epoch_tensor(1);
  for (std::size_t ch = 0; ch < 4; ++ch)
    for (std::size_t t = 0; t < cut.dim(1); ++t) CHECK(cut(ch, t) == full(ch, t + 3));
}

TEST_CASE("split by subject") {
  const EpochSet set = small_set(7, 10, 5);
  Rng rng(1);
  const Split s = split(set, {3, 0.1}, rng);
  CHECK(s.test.trials() == 50);
  for (int subj : s.test.subjects) CHECK(subj == 3);
  for (int subj : s.train.subjects) CHECK(subj != 3);
  for (int subj : s.validation.subjects) CHECK(subj != 3);
  CHECK(s.validation.trials() == 30);  // round(0.1 * 300)
  CHECK(s.train.trials() + s.validation.trials() + s.test.trials() == set.trials());

  std::vector<int> per_class(5, 0);
  for (int l : s.validation.labels) per_class[static_cast<std::size_t>(l)]++;
  for (int c : per_class) CHECK(std::abs(c - 6) <= 1);

  Rng again(1);
  const Split t = split(set, {3, 0.1}, again);
  CHECK(t.train == s.train);
  CHECK(t.validation == s.validation);

  Rng r(1);
  CHECK(error_of([&] { split(set, {9, 0.1}, r); }) == ErrorCode::Parameter);
  CHECK(error_of([&] { split(set, {3, 1.0}, r); }) == ErrorCode::Parameter);
}

TEST_CASE("split never duplicates or loses a trial") {
  EpochSet set = small_set(4, 7, 3);
  // Make every epoch unique so trials can be traced through the split.
  for (std::size_t i = 0; i < set.trials(); ++i) set.epochs.slice(i)[0] = static_cast<double>(i);
  Rng rng(5);
  for (int held = 0; held < 4; ++held) {
    const Split s = split(set, {held, 0.2}, rng);
    std::multiset<double> ids;
    for (const EpochSet* part : {&s.train, &s.validation, &s.test})
      for (std::size_t i = 0; i < part->trials(); ++i) ids.insert(part->epoch(i)[0]);
    CHECK(ids.size() == set.trials());
    CHECK(std::set<double>(ids.begin(), ids.end()).size() == set.trials());
  }
}
