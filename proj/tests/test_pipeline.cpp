// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "megnet/dataio.hpp"
#include "megnet/modelio.hpp"
#include "megnet/pipeline.hpp"
#include "support.hpp"

using namespace megnet;
using testing::error_of;

namespace {

std::string value_of(const std::string& report, const std::string& key) {
  std::istringstream in(report);
  std::string line;
  while (std::getline(in, line))
    if (line.rfind(key + "=", 0) == 0) return line.substr(key.size() + 1);
  return {};
}

// Options for a small dataset that trains in well under a second.
Options small(const std::filesystem::path& dir) {
  Options o;
  o.set("seed", "5");
  o.set("n-channels", "12");
  o.set("n-times", "30");
  o.set("n-subjects", "3");
  o.set("trials", "6");
  o.set("k", "4");
  o.set("batch", "10");
  o.set("max-iter", "10");
  o.set("eval-every", "5");
  o.set("lr", "1e-3");
  o.set("out", (dir / "data.megb").string());
  o.set("data", (dir / "data.megb").string());
  o.set("model", (dir / "model.megw").string());
  return o;
}

}  // namespace

TEST_CASE("option defaults and parsing") {
  Options o;
  CHECK(option_specs().size() == 44);
  CHECK(o.get("k") == "32");
  CHECK(o.real("lr") == 3e-4);
  CHECK(o.flag("realtime"));
  CHECK_FALSE(o.was_set("k"));
  o.set("k", "8");
  CHECK(o.was_set("k"));
  CHECK(o.count("k") == 8);
  CHECK(error_of([&] { o.set("bogus", "1"); }) == ErrorCode::Parameter);
  o.set("k", "eight");
  CHECK(error_of([&] { (void)o.count("k"); }) == ErrorCode::Parameter);
  o.set("k", "-1");
  CHECK(error_of([&] { (void)o.count("k"); }) == ErrorCode::Parameter);
  o.set("raw", "maybe");
  CHECK(error_of([&] { (void)o.flag("raw"); }) == ErrorCode::Parameter);
}

TEST_CASE("explicit values win over the config file") {
  Options o;
  o.set("k", "8");
  o.load_text("# comment\nk = 16\nlr = 0.01  # trailing\n\n");
  CHECK(o.count("k") == 8);
  CHECK(o.real("lr") == 0.01);
  CHECK(error_of([&] { o.load_text("nonsense\n"); }) == ErrorCode::Parameter);
  CHECK(error_of([&] { o.load_text("unknown = 1\n"); }) == ErrorCode::Parameter);
  CHECK(error_of([&] { o.load_file("/nonexistent/config.txt"); }) == ErrorCode::Parameter);

  Options round;
  round.load_text(o.dump());
  CHECK(round.dump() == o.dump());
}

TEST_CASE("generator configuration from options") {
  Options o;
  o.set("n-channels", "20");
  const GenConfig g = gen_config(o);
  CHECK(g.n_channels == 20);
  CHECK(g.n_classes == 5);
  o.set("n-latent", "12");
  CHECK(gen_config(o).n_latent == 12);
  CHECK(gen_config(o).sources.size() == 12);
  o.set("n-latent", "20");
  CHECK(error_of([&] { gen_config(o); }) == ErrorCode::Parameter);
  o.set("n-latent", "auto");
  o.set("preset", "induced");
  CHECK(gen_config(o).n_classes == 3);
  o.set("preset", "other");
  CHECK(error_of([&] { gen_config(o); }) == ErrorCode::Parameter);
}

TEST_CASE("synth is deterministic and writes preprocessed epochs") {
  const auto dir = testing::temp_path("pipeline_synth");
  std::filesystem::create_directories(dir);
  Options o = small(dir);
  const std::string report = cmd_synth(o);
  CHECK(report.find("trials 90") != std::string::npos);
  const EpochSet a = read_epochs(dir / "data.megb");
  CHECK(a.times() == 30);
  CHECK(a.channels() == 12);
  o.set("out", (dir / "again.megb").string());
  cmd_synth(o);
  CHECK(read_epochs(dir / "again.megb") == a);
  o.set("raw", "true");
  o.set("out", (dir / "raw.megb").string());
  cmd_synth(o);
  CHECK(read_epochs(dir / "raw.megb").times() > 30);
  std::filesystem::remove_all(dir);
}

TEST_CASE("train with zero iterations keeps the initialization") {
  const auto dir = testing::temp_path("pipeline_train0");
  std::filesystem::create_directories(dir);
  Options o = small(dir);
  cmd_synth(o);
  o.set("max-iter", "0");
  o.set("report", (dir / "train.csv").string());
  const std::string report = cmd_train(o);
  CHECK(value_of(report, "iterations_run") == "0");
  const Model m = read_model(dir / "model.megw");
  const EpochSet data = read_epochs(dir / "data.megb");
  ModelConfig mc = model_config(o, data);
  Rng rng = Rng::substream(5, {0x696e6974});
  CHECK(m.params == init_params(mc, rng));
  std::filesystem::remove_all(dir);
}

TEST_CASE("rtsim at zero learning rate reproduces the initial test accuracy") {
  const auto dir = testing::temp_path("pipeline_rtsim");
  std::filesystem::create_directories(dir);
  Options o = small(dir);
  cmd_synth(o);
  o.set("held-out", "2");
  const std::string trained = cmd_train(o);
  o.set("lr0", "true");
  const std::string rt = cmd_rtsim(o);
  CHECK(value_of(rt, "initial_accuracy") == value_of(rt, "realtime_accuracy"));
  CHECK(std::stod(value_of(trained, "test_accuracy")) == doctest::Approx(std::stod(value_of(rt, "initial_accuracy"))));

  // eval on the same fold trains the same network.
  o.set("report", (dir / "eval.csv").string());
  o.set("realtime", "false");
  cmd_eval(o);
  std::ifstream csv(dir / "eval.csv");
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  CHECK(row.rfind("LF-CNN,2,ok,", 0) == 0);
  std::stringstream fields(row);
  std::string cell;
  for (int i = 0; i < 5; ++i) std::getline(fields, cell, ',');
  CHECK(std::stod(cell) == std::stod(value_of(rt, "initial_accuracy")));

  o.set("held-out", "none");
  CHECK(error_of([&] { cmd_rtsim(o); }) == ErrorCode::Parameter);
  std::filesystem::remove_all(dir);
}

TEST_CASE("leave-one-subject-out eval with the baseline") {
  const auto dir = testing::temp_path("pipeline_eval");
  std::filesystem::create_directories(dir);
  Options o = small(dir);
  cmd_synth(o);
  o.set("loso", "true");
  o.set("baseline", "true");
  o.set("svm-epochs", "1");
  o.set("report", (dir / "eval.csv").string());
  const std::string table = cmd_eval(o);
  CHECK(table.find("LF-CNN (mean +/- SD)") != std::string::npos);
  CHECK(table.find("Linear SVM (mean +/- SD)") != std::string::npos);
  std::ifstream csv(dir / "eval.csv");
  std::size_t rows = 0;
  for (std::string line; std::getline(csv, line);) ++rows;
  CHECK(rows == 1 + 2 * (3 + 2));
  o.set("held-out", "1");
  CHECK(error_of([&] { cmd_eval(o); }) == ErrorCode::Parameter);
  std::filesystem::remove_all(dir);
}

TEST_CASE("interpret writes one pattern row per attributed class") {
  const auto dir = testing::temp_path("pipeline_interpret");
  std::filesystem::create_directories(dir);
  Options o = small(dir);
  cmd_synth(o);
  cmd_train(o);
  o.set("report-dir", (dir / "interp").string());
  const std::string summary = cmd_interpret(o);
  CHECK(summary.find("least informative") != std::string::npos);
  std::ifstream csv(dir / "interp" / "patterns.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header.rfind("class,component,ch0,", 0) == 0);
  std::size_t rows = 0;
  for (std::string line; std::getline(csv, line);) ++rows;
  CHECK(rows >= 1);
  CHECK(rows <= 5);
  CHECK(std::filesystem::exists(dir / "interp" / "spectra.csv"));
  o.set("variant", "var");
  cmd_train(o);
  CHECK(error_of([&] { cmd_interpret(o); }) == ErrorCode::Parameter);
  std::filesystem::remove_all(dir);
}

TEST_CASE("describe reports the architecture") {
  Options o;
  o.set("n-channels", "10");
  o.set("n-times", "20");
  o.set("k", "4");
  const std::string d = cmd_describe(o);
  CHECK(d.find("variant=") != std::string::npos);
  o.set("filter-len", "30");
  CHECK(error_of([&] { cmd_describe(o); }).has_value());
}
