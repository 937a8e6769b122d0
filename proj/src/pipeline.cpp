// SPDX-License-Identifier: Apache-2.0
#include "megnet/pipeline.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "megnet/dataio.hpp"
#include "megnet/error.hpp"
#include "megnet/modelio.hpp"

namespace megnet {

namespace {

constexpr std::uint64_t kExtraSourceStream = 0x6578747261ULL;
constexpr std::uint64_t kPooledSplitStream = 0x706f6f6cULL;

constexpr std::array<OptionSpec, 44> kSpecs = {{
    {"seed", "0", "master seed; all randomness derives from it"},
    {"threads", "1", "worker threads"},
    {"data", "", "input epoch file (MEGB)"},
    {"out", "", "output epoch file written by synth"},
    {"model", "", "model file (MEGW), written by train and read by rtsim/interpret"},
    {"report", "", "CSV report path"},
    {"report-dir", "", "directory for interpretation outputs"},
    {"preset", "evoked", "synthetic task: evoked or induced"},
    {"n-channels", "64", "sensor count"},
    {"n-latent", "auto", "latent source count (auto = preset)"},
    {"n-times", "125", "post-stimulus samples per epoch"},
    {"n-subjects", "7", "subjects"},
    {"trials", "auto", "trials per class per subject (auto = preset)"},
    {"snr", "1", "target signal-to-noise ratio"},
    {"jitter", "1", "per-subject mixing perturbation"},
    {"raw", "false", "write epochs with the baseline prefix, unscaled"},
    {"payload-32bit", "false", "store epoch samples as 32-bit floats"},
    {"variant", "lf", "network variant: lf or var"},
    {"k", "32", "latent sources of the network"},
    {"filter-len", "7", "temporal filter taps"},
    {"pool-factor", "2", "max-pool window"},
    {"pool-stride", "2", "max-pool stride"},
    {"dropout", "0.5", "dropout rate on the output layer"},
    {"l1", "3e-4", "l1 penalty on weights"},
    {"lr", "3e-4", "Adam learning rate"},
    {"batch", "100", "mini-batch size"},
    {"beta1", "0.9", "Adam first-moment decay"},
    {"beta2", "0.999", "Adam second-moment decay"},
    {"adam-eps", "1e-8", "Adam epsilon"},
    {"max-iter", "20000", "maximum training iterations"},
    {"eval-every", "1000", "iterations between validation checks"},
    {"stop-delta", "1e-5", "minimum validation improvement"},
    {"validation-fraction", "0.1", "share of training trials held for validation"},
    {"held-out", "none", "test subject id, or none"},
    {"loso", "false", "evaluate every subject in turn"},
    {"baseline", "false", "also evaluate the linear SVM"},
    {"svm-epochs", "5", "passes of the SVM solver"},
    {"realtime", "true", "run the pseudo-real-time session in eval"},
    {"update-policy", "all", "online updates: all or correct-only"},
    {"rt-batch", "20", "trials per pseudo-real-time batch"},
    {"lr0", "false", "pseudo-real-time without updates (learning rate 0)"},
    {"mode", "evoked", "interpretation: evoked or induced"},
    {"precision", "false", "multiply patterns by the latent precision"},
    {"ridge", "1e-6", "ridge added to the latent covariance"},
}};

const OptionSpec* find_spec(const std::string& key) {
  for (const auto& s : kSpecs)
    if (key == s.key) return &s;
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = first + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last || value.empty())
    fail(ErrorCode::Parameter, "option '" + key + "': cannot parse '" + value + "'");
  return out;
}

void require_path(const Options& o, const std::string& key) {
  const std::string& p = o.get(key);
  if (p.empty()) fail(ErrorCode::Parameter, "--" + key + " is required");
}

void require_existing(const Options& o, const std::string& key) {
  require_path(o, key);
  if (!std::filesystem::exists(o.get(key))) fail(ErrorCode::Parameter, "--" + key + ": no such file '" + o.get(key) + "'");
}

std::optional<int> held_out(const Options& o) {
  const std::string& v = o.get("held-out");
  if (v == "none" || v.empty()) return std::nullopt;
  return static_cast<int>(o.integer("held-out"));
}

EpochSet load_data(const Options& o) {
  require_existing(o, "data");
  return read_epochs(o.get("data"));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// Appends uninformative AR(1) sources so the config has `n_latent` sources.
void extend_sources(GenConfig& cfg, std::size_t n_latent) {
  if (n_latent >= cfg.n_channels) fail(ErrorCode::Parameter, "n-latent must be smaller than n-channels");
  if (n_latent < cfg.n_latent)
    fail(ErrorCode::Parameter, "the " + std::string(cfg.n_classes == 5 ? "evoked" : "induced") + " preset needs at least " +
                                   std::to_string(cfg.n_latent) + " latent sources");
  if (n_latent == cfg.n_latent) return;
  Rng rng = Rng::substream(cfg.seed, {kExtraSourceStream});
  const Tensor extra = random_mixing(cfg.n_channels, n_latent - cfg.n_latent, rng);
  Tensor mixing({cfg.n_channels, n_latent});
  for (std::size_t i = 0; i < cfg.n_channels; ++i) {
    for (std::size_t j = 0; j < cfg.n_latent; ++j) mixing(i, j) = cfg.base_mixing(i, j);
    for (std::size_t j = cfg.n_latent; j < n_latent; ++j) mixing(i, j) = extra(i, j - cfg.n_latent);
  }
  for (std::size_t j = cfg.n_latent; j < n_latent; ++j) {
    LatentSourceSpec s;
    s.ar_coeffs = {0.8};
    s.innovation_std = std::sqrt(1.0 - 0.64);
    cfg.sources.push_back(s);
  }
  cfg.base_mixing = std::move(mixing);
  cfg.n_latent = n_latent;
}

}  // namespace

std::span<const OptionSpec> option_specs() { return kSpecs; }

Options::Options() {
  for (const auto& s : kSpecs) values_[s.key] = s.default_value;
}

void Options::set(const std::string& key, const std::string& value) {
  if (!find_spec(key)) fail(ErrorCode::Parameter, "unknown option '" + key + "'");
  values_[key] = value;
  explicit_[key] = true;
}

const std::string& Options::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) fail(ErrorCode::Parameter, "unknown option '" + key + "'");
  return it->second;
}

bool Options::was_set(const std::string& key) const {
  get(key);
  return explicit_.count(key) > 0;
}

void Options::load_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::Parameter, origin + ":" + std::to_string(number) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!find_spec(key)) fail(ErrorCode::Parameter, origin + ":" + std::to_string(number) + ": unknown key '" + key + "'");
    if (was_set(key)) continue;
    values_[key] = value;
  }
}

void Options::load_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::Parameter, "config file '" + path.string() + "' not found");
  const auto bytes = read_file(path);
  load_text(std::string(bytes.begin(), bytes.end()), path.string());
}

std::string Options::dump() const {
  std::ostringstream out;
  for (const auto& s : kSpecs) out << s.key << " = " << values_.at(s.key) << '\n';
  return out.str();
}

std::int64_t Options::integer(const std::string& key) const { return parse_number<std::int64_t>(key, get(key)); }

std::size_t Options::count(const std::string& key) const {
  const std::int64_t v = integer(key);
  if (v < 0) fail(ErrorCode::Parameter, "option '" + key + "' must be >= 0");
  return static_cast<std::size_t>(v);
}

std::uint64_t Options::u64(const std::string& key) const { return parse_number<std::uint64_t>(key, get(key)); }

double Options::real(const std::string& key) const {
  const double v = parse_number<double>(key, get(key));
  if (!std::isfinite(v)) fail(ErrorCode::Parameter, "option '" + key + "' must be finite");
  return v;
}

bool Options::flag(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(ErrorCode::Parameter, "option '" + key + "': expected true or false, got '" + v + "'");
}

GenConfig gen_config(const Options& o) {
  const std::string preset = o.get("preset");
  const std::uint64_t seed = o.u64("seed");
  const std::size_t n_channels = o.count("n-channels");
  if (o.get("n-latent") != "auto" && o.count("n-latent") >= n_channels)
    fail(ErrorCode::Parameter, "n-latent must be smaller than n-channels");
  GenConfig cfg;
  if (preset == "evoked") {
    EvokedPresetOptions p;
    p.n_channels = n_channels;
    p.n_times = o.count("n-times");
    p.n_subjects = o.count("n-subjects");
    if (o.get("trials") != "auto") p.trials_per_class_per_subject = o.count("trials");
    p.target_snr = o.real("snr");
    p.jitter = o.real("jitter");
    if (p.n_channels <= 8) fail(ErrorCode::Parameter, "the evoked preset needs more than 8 channels");
    cfg = evoked_preset(seed, p);
  } else if (preset == "induced") {
    InducedPresetOptions p;
    p.n_channels = n_channels;
    p.n_times = o.count("n-times");
    p.n_subjects = o.count("n-subjects");
    if (o.get("trials") != "auto") p.trials_per_class_per_subject = o.count("trials");
    p.target_snr = o.real("snr");
    p.jitter = o.real("jitter");
    if (p.n_channels <= 6) fail(ErrorCode::Parameter, "the induced preset needs more than 6 channels");
    cfg = induced_preset(seed, p);
  } else {
    fail(ErrorCode::Parameter, "unknown preset '" + preset + "' (expected evoked or induced)");
  }
  if (o.get("n-latent") != "auto") extend_sources(cfg, o.count("n-latent"));
  cfg.validate();
  return cfg;
}

ModelConfig model_config(const Options& o, const EpochSet& data) {
  ModelConfig cfg;
  cfg.variant = parse_variant(o.get("variant"));
  cfg.n_channels = data.channels();
  cfg.n_times = data.times();
  cfg.n_classes = static_cast<std::size_t>(data.n_classes);
  cfg.n_latent = o.count("k");
  cfg.filter_len = o.count("filter-len");
  cfg.pool_factor = o.count("pool-factor");
  cfg.pool_stride = o.count("pool-stride");
  cfg.dropout_rate = o.real("dropout");
  cfg.l1_lambda = o.real("l1");
  cfg.validate();
  return cfg;
}

TrainConfig train_config(const Options& o) {
  TrainConfig cfg;
  cfg.learning_rate = o.real("lr");
  cfg.batch_size = o.count("batch");
  cfg.beta1 = o.real("beta1");
  cfg.beta2 = o.real("beta2");
  cfg.adam_eps = o.real("adam-eps");
  cfg.max_iterations = o.count("max-iter");
  cfg.eval_every = o.count("eval-every");
  cfg.stop_delta = o.real("stop-delta");
  cfg.seed = o.u64("seed");
  const std::int64_t threads = o.integer("threads");
  if (threads < 1) fail(ErrorCode::Parameter, "threads must be >= 1");
  cfg.threads = static_cast<unsigned>(threads);
  cfg.validate();
  return cfg;
}

LosoOptions loso_options(const Options& o) {
  LosoOptions l;
  l.validation_fraction = o.real("validation-fraction");
  l.seed = o.u64("seed");
  l.run_realtime = o.flag("realtime");
  l.realtime.batch = o.count("rt-batch");
  l.realtime.policy = parse_update_policy(o.get("update-policy"));
  return l;
}

InterpretOptions interpret_options(const Options& o) {
  InterpretOptions i;
  i.mode = parse_interpret_mode(o.get("mode"));
  i.use_precision = o.flag("precision");
  i.ridge = o.real("ridge");
  return i;
}

std::string cmd_synth(const Options& o) {
  require_path(o, "out");
  const GenConfig cfg = gen_config(o);
  EpochSet data = generate(cfg);
  if (!o.flag("raw")) data = preprocess(data, cfg.baseline_samples);
  write_epochs(o.get("out"), data, !o.flag("payload-32bit"));
  const SnrBreakdown snr = analytic_snr(cfg);
  std::ostringstream out;
  out << "wrote " << o.get("out") << '\n'
      << "trials " << data.trials() << "\nchannels " << data.channels() << "\ntimes " << data.times() << "\nsample_rate_hz "
      << data.sample_rate_hz << "\nclasses " << data.n_classes << "\nsubjects " << distinct_subjects(data).size()
      << "\nlatent_sources " << cfg.n_latent << "\nnoise_std " << cfg.noise_std << "\nsnr_estimate " << snr.snr()
      << '\n';
  return out.str();
}

std::string cmd_train(const Options& o) {
  require_path(o, "model");
  const EpochSet data = load_data(o);
  const ModelConfig mcfg = model_config(o, data);
  TrainConfig tcfg = train_config(o);
  const double fraction = o.real("validation-fraction");

  Split parts;
  if (auto s = held_out(o)) {
    parts = loso_split(data, *s, tcfg.seed, fraction);
    tcfg.seed = fold_seed(tcfg.seed, *s);
  } else {
    Rng rng = Rng::substream(tcfg.seed, {kPooledSplitStream});
    parts = split_train_validation(data, fraction, rng);
  }
  CnnClassifier clf(mcfg, tcfg);
  clf.fit(parts.train, parts.validation);
  write_model(o.get("model"), clf.model());
  if (!o.get("report").empty()) write_text(o.get("report"), report_csv(clf.report()));

  const TrainReport& r = clf.report();
  std::ostringstream out;
  out << describe(mcfg) << describe(tcfg) << "iterations_run=" << r.iterations_run
      << "\nreturned_iteration=" << r.returned_iteration << "\nstop_reason=" << to_string(r.stop_reason)
      << "\ntrain_accuracy=" << r.train_accuracy << "\nvalidation_accuracy=" << r.validation_accuracy << '\n';
  if (parts.test.trials() > 0) {
    const Evaluation e = evaluate(clf.model().config, clf.model().params, parts.test, tcfg.threads);
    out << "test_accuracy=" << e.accuracy << '\n';
  }
  out << "wrote " << o.get("model") << '\n';
  return out.str();
}

std::string cmd_eval(const Options& o) {
  const EpochSet data = load_data(o);
  const ModelConfig mcfg = model_config(o, data);
  const TrainConfig tcfg = train_config(o);
  LosoOptions lopt = loso_options(o);
  if (auto s = held_out(o)) {
    if (o.flag("loso")) fail(ErrorCode::Parameter, "--loso and --held-out are mutually exclusive");
    lopt.subjects = {*s};
  }

  std::vector<EvalReport> reports;
  reports.push_back(loso_evaluate(
      data,
      [&](std::uint64_t seed) {
        TrainConfig t = tcfg;
        t.seed = seed;
        return std::make_unique<CnnClassifier>(mcfg, t);
      },
      lopt));
  if (o.flag("baseline")) {
    const std::size_t epochs = o.count("svm-epochs");
    reports.push_back(loso_evaluate(
        data,
        [&](std::uint64_t seed) {
          SvmOptions s;
          s.seed = seed;
          s.epochs = epochs;
          return std::make_unique<LinearSvmClassifier>(s);
        },
        lopt));
  }
  if (!o.get("report").empty()) write_text(o.get("report"), eval_csv(reports));

  std::ostringstream out;
  out << eval_table(reports);
  for (const auto& r : reports)
    for (const auto& f : r.folds)
      if (!f.ok) out << r.model << " subject " << f.subject << " failed: " << f.error << '\n';
  return out.str();
}

std::string cmd_rtsim(const Options& o) {
  require_existing(o, "model");
  const EpochSet data = load_data(o);
  const auto s = held_out(o);
  if (!s) fail(ErrorCode::Parameter, "--held-out is required");
  Model model = read_model(o.get("model"));
  if (model.config.n_channels != data.channels() || model.config.n_times != data.times())
    fail(ErrorCode::Dimension, "model expects " + std::to_string(model.config.n_channels) + " x " +
                                   std::to_string(model.config.n_times) + " epochs, data has " +
                                   std::to_string(data.channels()) + " x " + std::to_string(data.times()));
  TrainConfig tcfg = train_config(o);
  if (o.flag("lr0")) tcfg.learning_rate = 0.0;
  const std::uint64_t seed = tcfg.seed;
  tcfg.seed = fold_seed(seed, *s);
  const Split parts = loso_split(data, *s, seed, o.real("validation-fraction"));

  const Evaluation initial = evaluate(model.config, model.params, parts.test, tcfg.threads);
  CnnClassifier clf(std::move(model), tcfg);
  RealtimeOptions rt;
  rt.batch = o.count("rt-batch");
  rt.policy = parse_update_policy(o.get("update-policy"));
  rt.seed = tcfg.seed;
  const RealtimeTrace trace = pseudo_realtime(clf, parts.test, rt);
  if (!o.get("report").empty()) write_text(o.get("report"), trace_csv(trace));

  std::ostringstream out;
  out << std::setprecision(17) << "subject=" << *s << "\ntrials=" << parts.test.trials()
      << "\nlearning_rate=" << tcfg.learning_rate << "\nupdate_policy=" << to_string(rt.policy)
      << "\ninitial_accuracy=" << initial.accuracy << "\nrealtime_accuracy=" << trace.accuracy
      << "\nupdates=" << trace.updates << '\n';
  return out.str();
}

std::string cmd_interpret(const Options& o) {
  require_existing(o, "model");
  require_path(o, "report-dir");
  EpochSet data = load_data(o);
  if (auto s = held_out(o)) {
    const auto idx = trials_of_subject(data, *s);
    if (idx.empty()) fail(ErrorCode::Parameter, "subject " + std::to_string(*s) + " not present");
    data = subset(data, idx);
  }
  const Model model = read_model(o.get("model"));
  InterpretOptions iopt = interpret_options(o);
  const InterpretationReport report = interpret(model.config, model.params, data, iopt);
  const std::filesystem::path dir = o.get("report-dir");
  std::filesystem::create_directories(dir);
  write_text(dir / "patterns.csv", patterns_csv(report));
  write_text(dir / "spectra.csv", spectra_csv(report));
  const std::string summary = summary_text(report);
  write_text(dir / "summary.txt", summary);
  return summary + "wrote " + dir.string() + "/{patterns.csv,spectra.csv,summary.txt}\n";
}

std::string cmd_describe(const Options& o) {
  ModelConfig mcfg;
  mcfg.variant = parse_variant(o.get("variant"));
  mcfg.n_channels = o.count("n-channels");
  mcfg.n_times = o.count("n-times");
  mcfg.n_classes = o.get("preset") == "induced" ? 3 : 5;
  mcfg.n_latent = o.count("k");
  mcfg.filter_len = o.count("filter-len");
  mcfg.pool_factor = o.count("pool-factor");
  mcfg.pool_stride = o.count("pool-stride");
  mcfg.dropout_rate = o.real("dropout");
  mcfg.l1_lambda = o.real("l1");
  mcfg.validate();
  return describe(mcfg) + describe(train_config(o));
}

}  // namespace megnet
