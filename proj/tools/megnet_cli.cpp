// SPDX-License-Identifier: Apache-2.0
// megnet command-line front end. Talks to the library only through megnet.h.
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "megnet/megnet.h"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

using Command = megnet_status (*)(const megnet_options*, char**);

struct Subcommand {
  const char* name;
  const char* help;
  Command run;
};

const Subcommand kSubcommands[] = {
    {"synth", "generate a synthetic epoch file", megnet_synth},
    {"train", "train a network and write a model file", megnet_train},
    {"eval", "leave-one-subject-out evaluation", megnet_eval},
    {"rtsim", "pseudo-real-time session on a held-out subject", megnet_rtsim},
    {"interpret", "activation patterns, spectra and informative components", megnet_interpret},
    {"describe", "print the model and optimizer configuration", megnet_describe},
};

int fail_status(megnet_status status) {
  std::fprintf(stderr, "megnet: %s\n", megnet_last_error());
  return status == MEGNET_E_PARAMETER ? kExitUsage : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatiotemporal CNN decoders for synthetic MEG epochs"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", megnet_version());

  struct Slot {
    std::string key;
    std::string value;
    bool toggle = false;
    bool flag_value = false;
  };
  std::map<std::string, std::vector<Slot>> slots;
  std::map<std::string, std::string> config_path;
  std::map<std::string, CLI::App*> apps;

  for (const auto& sc : kSubcommands) {
    CLI::App* sub = app.add_subcommand(sc.name, sc.help);
    apps[sc.name] = sub;
    auto& list = slots[sc.name];
    const char* key = nullptr;
    const char* def = nullptr;
    const char* help = nullptr;
    std::size_t count = 0;
    while (megnet_option_info(count, &key, &def, &help) == MEGNET_OK) ++count;
    list.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      megnet_option_info(i, &key, &def, &help);
      Slot& s = list[i];
      s.key = key;
      s.toggle = std::string(def) == "false";
      if (s.toggle) {
        sub->add_flag("--" + s.key, s.flag_value, help);
      } else {
        sub->add_option("--" + s.key, s.value, std::string(help) + " (default " + (*def ? def : "unset") + ")");
      }
    }
    sub->add_option("--config", config_path[sc.name], "key = value file; flags take precedence")
        ->check(CLI::ExistingFile);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  for (const auto& sc : kSubcommands) {
    CLI::App* sub = apps[sc.name];
    if (!sub->parsed()) continue;

    megnet_options* options = nullptr;
    if (megnet_options_create(&options) != MEGNET_OK) return fail_status(MEGNET_E_INTERNAL);
    int exit_code = 0;
    megnet_status status = MEGNET_OK;
    for (const Slot& s : slots[sc.name]) {
      if (sub->count("--" + s.key) == 0) continue;
      status = megnet_options_set(options, s.key.c_str(), s.toggle ? (s.flag_value ? "true" : "false") : s.value.c_str());
      if (status != MEGNET_OK) break;
    }
    if (status == MEGNET_OK && !config_path[sc.name].empty())
      status = megnet_options_load(options, config_path[sc.name].c_str());
    char* report = nullptr;
    if (status == MEGNET_OK) status = sc.run(options, &report);
    if (status == MEGNET_OK) {
      std::fputs(report, stdout);
    } else {
      exit_code = fail_status(status);
    }
    megnet_string_free(report);
    megnet_options_free(options);
    return exit_code;
  }
  return kExitUsage;
}
