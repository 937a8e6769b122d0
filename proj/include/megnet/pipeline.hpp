// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>

#include "megnet/epochset.hpp"
#include "megnet/evalharness.hpp"
#include "megnet/interpret.hpp"
#include "megnet/model.hpp"
#include "megnet/optim.hpp"
#include "megnet/synthgen.hpp"

namespace megnet {

struct OptionSpec {
  const char* key;
  const char* default_value;
  const char* help;
};

// Every recognised key with its default, in display order. Keys double as
// command-line flag names (--key) and config-file keys (key = value).
std::span<const OptionSpec> option_specs();

// Flat string-valued run configuration. Unknown keys and malformed values are
// ErrorCode::Parameter.
class Options {
 public:
  Options();

  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  bool was_set(const std::string& key) const;

  // key = value lines; '#' starts a comment. Values already set explicitly
  // are kept, so flags applied before loading still win.
  void load_text(const std::string& text, const std::string& origin = "config");
  void load_file(const std::filesystem::path& path);
  std::string dump() const;

  std::string text(const std::string& key) const { return get(key); }
  std::int64_t integer(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  std::uint64_t u64(const std::string& key) const;
  double real(const std::string& key) const;
  bool flag(const std::string& key) const;

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> explicit_;
};

GenConfig gen_config(const Options& options);
ModelConfig model_config(const Options& options, const EpochSet& data);
TrainConfig train_config(const Options& options);
LosoOptions loso_options(const Options& options);
InterpretOptions interpret_options(const Options& options);

// Subcommands. Each writes its artifacts and returns the text meant for stdout.
std::string cmd_synth(const Options& options);
std::string cmd_train(const Options& options);
std::string cmd_eval(const Options& options);
std::string cmd_rtsim(const Options& options);
std::string cmd_interpret(const Options& options);
std::string cmd_describe(const Options& options);

}  // namespace megnet
