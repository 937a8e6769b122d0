// SPDX-License-Identifier: Apache-2.0
#include "megnet/modelio.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <string>

#include "megnet/dataio.hpp"
#include "megnet/error.hpp"

namespace megnet {

namespace {

constexpr char kMagic[4] = {'M', 'E', 'G', 'W'};

template <class T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

struct Reader {
  std::span<const std::uint8_t> in;
  std::size_t pos = 0;

  template <class T>
  T get(const std::string& field) {
    if (pos + sizeof(T) > in.size()) fail(ErrorCode::Format, "truncated model file while reading " + field);
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, in.data() + pos, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos += sizeof(T);
    T v;
    std::memcpy(&v, raw, sizeof(T));
    return v;
  }
};

void put_params(std::vector<std::uint8_t>& out, const ModelParams& p) {
  for (const Tensor* t : p.tensors()) {
    put<std::uint64_t>(out, t->size());
    for (double v : t->values()) put<double>(out, v);
  }
}

void get_params(Reader& r, ModelParams& p, const char* prefix) {
  auto tensors = p.tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const std::string name = std::string(prefix) + ModelParams::kNames[i];
    const auto count = r.get<std::uint64_t>(name + " count");
    if (count != tensors[i]->size()) fail(ErrorCode::Format, name + " size disagrees with the config block");
    for (double& v : tensors[i]->values()) v = r.get<double>(name);
  }
}

}  // namespace

std::vector<std::uint8_t> encode_model(const Model& model, bool with_optimizer_state) {
  model.config.validate();
  model.params.check_shapes(model.config);
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put<std::uint16_t>(out, kModelFileVersion);
  put<std::uint16_t>(out, with_optimizer_state ? 1 : 0);
  const ModelConfig& c = model.config;
  put<std::uint16_t>(out, c.variant == Variant::LF ? 0 : 1);
  for (std::size_t v : {c.n_channels, c.n_latent, c.filter_len, c.n_times, c.pool_factor, c.pool_stride, c.n_classes}) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  }
  put<double>(out, c.dropout_rate);
  put<double>(out, c.l1_lambda);
  put_params(out, model.params);
  if (with_optimizer_state) {
    put<std::uint64_t>(out, model.adam.step);
    put_params(out, model.adam.first);
    put_params(out, model.adam.second);
  }
  return out;
}

Model decode_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) fail(ErrorCode::Format, "bad magic (expected MEGW)");
  Reader r{bytes, 4};
  const auto version = r.get<std::uint16_t>("version");
  if (version != kModelFileVersion) fail(ErrorCode::Format, "unsupported model file version " + std::to_string(version));
  const auto flags = r.get<std::uint16_t>("flags");
  if (flags & ~1u) fail(ErrorCode::Format, "unknown bits in flags");
  Model m;
  const auto variant = r.get<std::uint16_t>("variant");
  if (variant > 1) fail(ErrorCode::Format, "unknown variant code");
  m.config.variant = variant == 0 ? Variant::LF : Variant::VAR;
  m.config.n_channels = r.get<std::uint32_t>("n_channels");
  m.config.n_latent = r.get<std::uint32_t>("n_latent");
  m.config.filter_len = r.get<std::uint32_t>("filter_len");
  m.config.n_times = r.get<std::uint32_t>("n_times");
  m.config.pool_factor = r.get<std::uint32_t>("pool_factor");
  m.config.pool_stride = r.get<std::uint32_t>("pool_stride");
  m.config.n_classes = r.get<std::uint32_t>("n_classes");
  m.config.dropout_rate = r.get<double>("dropout_rate");
  m.config.l1_lambda = r.get<double>("l1_lambda");
  try {
    m.config.validate();
  } catch (const Error& e) {
    fail(ErrorCode::Format, std::string("invalid config block: ") + e.what());
  }
  m.params = ModelParams::zeros(m.config);
  get_params(r, m.params, "");
  m.adam = AdamState::zeros(m.config);
  if (flags & 1u) {
    m.adam.step = r.get<std::uint64_t>("adam step");
    get_params(r, m.adam.first, "adam first moment ");
    get_params(r, m.adam.second, "adam second moment ");
  }
  if (r.pos != bytes.size()) fail(ErrorCode::Format, "trailing bytes after model payload");
  for (const Tensor* t : m.params.tensors()) ensure_finite(*t, "model weights");
  return m;
}

void write_model(const std::filesystem::path& path, const Model& model, bool with_optimizer_state) {
  write_file(path, encode_model(model, with_optimizer_state));
}

Model read_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

}  // namespace megnet
