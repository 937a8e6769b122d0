// SPDX-License-Identifier: Apache-2.0
#include "megnet/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>

#include "megnet/error.hpp"

namespace megnet {

namespace {

constexpr char kMagic[4] = {'M', 'E', 'G', 'B'};

class ByteWriter {
 public:
  explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  template <class T>
  void put(T value) {
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    out_.insert(out_.end(), raw, raw + sizeof(T));
  }

 private:
  std::vector<std::uint8_t>& out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  template <class T>
  T get(const char* field) {
    if (pos_ + sizeof(T) > in_.size()) fail(ErrorCode::Format, std::string("truncated file while reading ") + field);
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, in_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }

  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_epochs(const EpochSet& set, bool payload_64bit) {
  set.validate();
  for (int s : set.subjects)
    if (s > 0xFFFF) fail(ErrorCode::Parameter, "subject id does not fit in 16 bits");
  if (set.n_classes > 0xFFFF) fail(ErrorCode::Parameter, "n_classes does not fit in 16 bits");

  std::vector<std::uint8_t> out;
  const std::size_t values = set.epochs.size();
  out.reserve(EpochFileHeader::kBytes + 4 * set.trials() + values * (payload_64bit ? 8 : 4));
  ByteWriter w(out);
  out.insert(out.end(), kMagic, kMagic + 4);
  w.put<std::uint16_t>(EpochFileHeader::kVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(set.trials()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(set.channels()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(set.times()));
  w.put<float>(set.sample_rate_hz);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(set.n_classes));
  w.put<std::uint16_t>(payload_64bit ? EpochFileHeader::kFlag64Bit : 0);
  for (int l : set.labels) w.put<std::uint16_t>(static_cast<std::uint16_t>(l));
  for (int s : set.subjects) w.put<std::uint16_t>(static_cast<std::uint16_t>(s));
  for (double v : set.epochs.values()) {
    if (payload_64bit) {
      w.put<double>(v);
    } else {
      w.put<float>(static_cast<float>(v));
    }
  }
  return out;
}

EpochSet decode_epochs(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) fail(ErrorCode::Format, "bad magic (expected MEGB)");
  ByteReader r(bytes.subspan(4));
  EpochFileHeader h;
  h.version = r.get<std::uint16_t>("version");
  if (h.version != EpochFileHeader::kVersion) fail(ErrorCode::Format, "unsupported version " + std::to_string(h.version));
  h.n_trials = r.get<std::uint32_t>("n_trials");
  h.n_channels = r.get<std::uint32_t>("n_channels");
  h.n_times = r.get<std::uint32_t>("n_times");
  h.sample_rate_hz = r.get<float>("sample_rate_hz");
  h.n_classes = r.get<std::uint16_t>("n_classes");
  h.flags = r.get<std::uint16_t>("flags");
  if (h.n_trials == 0) fail(ErrorCode::Format, "n_trials is 0");
  if (h.n_channels == 0) fail(ErrorCode::Format, "n_channels is 0");
  if (h.n_times == 0) fail(ErrorCode::Format, "n_times is 0");
  if (h.n_classes == 0) fail(ErrorCode::Format, "n_classes is 0");
  if (!(h.sample_rate_hz > 0.0f) || !std::isfinite(h.sample_rate_hz)) fail(ErrorCode::Format, "sample_rate_hz is not positive");
  if (h.flags & ~EpochFileHeader::kFlag64Bit) fail(ErrorCode::Format, "unknown bits in flags");

  const bool wide = h.flags & EpochFileHeader::kFlag64Bit;
  const std::uint64_t values = std::uint64_t{h.n_trials} * h.n_channels * h.n_times;
  const std::uint64_t expected = 4ull * h.n_trials + values * (wide ? 8 : 4);
  if (r.remaining() < expected) fail(ErrorCode::Format, "truncated payload (declared sizes exceed file length)");
  if (r.remaining() > expected) fail(ErrorCode::Format, "payload longer than declared sizes");

  EpochSet set;
  set.sample_rate_hz = h.sample_rate_hz;
  set.n_classes = h.n_classes;
  set.labels.resize(h.n_trials);
  set.subjects.resize(h.n_trials);
  for (auto& l : set.labels) {
    l = r.get<std::uint16_t>("labels");
    if (l >= h.n_classes) fail(ErrorCode::Format, "label out of range in labels");
  }
  for (auto& s : set.subjects) s = r.get<std::uint16_t>("subjects");
  std::vector<double> data(values);
  for (auto& v : data) v = wide ? r.get<double>("epochs") : static_cast<double>(r.get<float>("epochs"));
  set.epochs = Tensor({h.n_trials, h.n_channels, h.n_times}, std::move(data));
  return set;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

void write_epochs(const std::filesystem::path& path, const EpochSet& set, bool payload_64bit) {
  write_file(path, encode_epochs(set, payload_64bit));
}

EpochSet read_epochs(const std::filesystem::path& path) { return decode_epochs(read_file(path)); }

Tensor baseline_scale(const Tensor& epoch, std::size_t baseline_len, double eps) {
  if (epoch.rank() != 2) fail(ErrorCode::Dimension, "baseline_scale expects channels x time");
  const std::size_t n = epoch.dim(0), t = epoch.dim(1);
  if (baseline_len < 1 || baseline_len > t) fail(ErrorCode::Parameter, "baseline_len must be in [1, n_times]");
  const double count = static_cast<double>(n * baseline_len);
  double sum = 0.0;
  for (std::size_t ch = 0; ch < n; ++ch)
    for (std::size_t x = 0; x < baseline_len; ++x) sum += epoch(ch, x);
  const double mean = sum / count;
  double ss = 0.0;
  for (std::size_t ch = 0; ch < n; ++ch)
    for (std::size_t x = 0; x < baseline_len; ++x) ss += (epoch(ch, x) - mean) * (epoch(ch, x) - mean);
  const double sd = count > 1.0 ? std::sqrt(ss / (count - 1.0)) : 0.0;
  const double denom = std::max(sd, eps);
  Tensor out = epoch;
  for (double& v : out.values()) v = (v - mean) / denom;
  ensure_finite(out, "baseline_scale result");
  return out;
}

Tensor decimate(const Tensor& epoch, std::size_t factor) {
  if (factor < 1) fail(ErrorCode::Parameter, "decimation factor must be >= 1");
  if (epoch.rank() != 2) fail(ErrorCode::Dimension, "decimate expects channels x time");
  const std::size_t n = epoch.dim(0), t = epoch.dim(1);
  const std::size_t out_t = (t + factor - 1) / factor;
  Tensor out({n, out_t});
  for (std::size_t ch = 0; ch < n; ++ch)
    for (std::size_t x = 0; x < out_t; ++x) out(ch, x) = epoch(ch, x * factor);
  return out;
}

EpochSet decimate(const EpochSet& set, std::size_t factor) {
  if (factor < 1) fail(ErrorCode::Parameter, "decimation factor must be >= 1");
  EpochSet out = set;
  const std::size_t out_t = (set.times() + factor - 1) / factor;
  out.epochs = Tensor({set.trials(), set.channels(), out_t});
  for (std::size_t i = 0; i < set.trials(); ++i) {
    Tensor d = decimate(set.epoch_tensor(i), factor);
    std::copy(d.values().begin(), d.values().end(), out.epochs.slice(i).begin());
  }
  out.sample_rate_hz = set.sample_rate_hz / static_cast<float>(factor);
  return out;
}

EpochSet preprocess(const EpochSet& raw, std::size_t baseline_len, double eps) {
  raw.validate();
  if (baseline_len >= raw.times()) fail(ErrorCode::Parameter, "baseline must be shorter than the epoch");
  const std::size_t n = raw.channels(), t = raw.times() - baseline_len;
  EpochSet out = raw;
  out.epochs = Tensor({raw.trials(), n, t});
  for (std::size_t i = 0; i < raw.trials(); ++i) {
    const Tensor scaled = baseline_scale(raw.epoch_tensor(i), baseline_len, eps);
    auto dst = out.epochs.slice(i);
    for (std::size_t ch = 0; ch < n; ++ch)
      for (std::size_t x = 0; x < t; ++x) dst[ch * t + x] = scaled(ch, baseline_len + x);
  }
  return out;
}

namespace {

Split split_rest(const EpochSet& set, const std::vector<std::size_t>& rest, double validation_fraction, Rng& rng) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    fail(ErrorCode::Parameter, "validation_fraction must be in (0, 1)");
  }
  if (rest.size() < 2) fail(ErrorCode::Parameter, "need at least two non-test trials to split");

  const std::size_t n_rest = rest.size();
  std::size_t n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n_rest)));
  n_val = std::clamp<std::size_t>(n_val, 1, n_rest - 1);

  // Per-class pools, shuffled.
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(set.n_classes));
  for (std::size_t i : rest) by_class[static_cast<std::size_t>(set.labels[i])].push_back(i);
  for (auto& pool : by_class) rng.shuffle(pool);

  // Largest-remainder apportionment of n_val across classes.
  const std::size_t nc = by_class.size();
  std::vector<std::size_t> quota(nc);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < nc; ++c) {
    const double exact = static_cast<double>(n_val) * static_cast<double>(by_class[c].size()) / static_cast<double>(n_rest);
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n_val; ++i) {
    const std::size_t c = remainders[i % nc].second;
    if (quota[c] < by_class[c].size()) {
      ++quota[c];
      ++assigned;
    }
  }

  std::vector<std::size_t> train, val;
  for (std::size_t c = 0; c < nc; ++c) {
    val.insert(val.end(), by_class[c].begin(), by_class[c].begin() + static_cast<std::ptrdiff_t>(quota[c]));
    train.insert(train.end(), by_class[c].begin() + static_cast<std::ptrdiff_t>(quota[c]), by_class[c].end());
  }
  rng.shuffle(train);
  rng.shuffle(val);
  return Split{subset(set, train), subset(set, val), {}};
}

}  // namespace

Split split(const EpochSet& set, const SplitSpec& spec, Rng& rng) {
  set.validate();
  std::vector<std::size_t> test, rest;
  for (std::size_t i = 0; i < set.trials(); ++i) (set.subjects[i] == spec.held_out_subject ? test : rest).push_back(i);
  if (test.empty()) fail(ErrorCode::Parameter, "held-out subject " + std::to_string(spec.held_out_subject) + " not present");
  Split out = split_rest(set, rest, spec.validation_fraction, rng);
  out.test = subset(set, test);
  return out;
}

Split split_train_validation(const EpochSet& set, double validation_fraction, Rng& rng) {
  set.validate();
  std::vector<std::size_t> all(set.trials());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return split_rest(set, all, validation_fraction, rng);
}

}  // namespace megnet
