// SPDX-License-Identifier: Apache-2.0
#include "megnet/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "megnet/error.hpp"
#include "megnet/parallel.hpp"

namespace megnet {

namespace {

constexpr std::uint64_t kSplitStream = 0x73706c6974ULL;
constexpr std::uint64_t kOnlineStream = 0x6f6e6c696e65ULL;
constexpr std::uint64_t kOrderStream = 0x6f72646572ULL;
constexpr std::uint64_t kSvmStream = 0x73766dULL;

std::string percent(double v) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(1) << 100.0 * v;
  return out.str();
}

std::string percent(const MeanSd& m) { return percent(m.mean) + " +/- " + percent(m.sd); }

template <class F>
MeanSd fold_stat(const EvalReport& r, F field) {
  std::vector<double> v;
  for (const auto& f : r.folds)
    if (f.ok) v.push_back(field(f));
  return mean_sd(v);
}

}  // namespace

CnnClassifier::CnnClassifier(ModelConfig config, TrainConfig train_config)
    : train_config_(train_config), update_rng_(Rng::substream(train_config.seed, {kOnlineStream})) {
  model_.config = config;
}

CnnClassifier::CnnClassifier(Model model, TrainConfig train_config)
    : train_config_(train_config), model_(std::move(model)), update_rng_(Rng::substream(train_config.seed, {kOnlineStream})) {}

std::string CnnClassifier::name() const { return model_.config.variant == Variant::LF ? "LF-CNN" : "VAR-CNN"; }

void CnnClassifier::fit(const EpochSet& train_set, const EpochSet& validation) {
  ModelConfig cfg = model_.config;
  cfg.n_channels = train_set.channels();
  cfg.n_times = train_set.times();
  cfg.n_classes = static_cast<std::size_t>(train_set.n_classes);
  Rng init_rng = Rng::substream(train_config_.seed, {0x696e6974ULL});
  model_ = make_model(cfg, init_rng);
  report_ = train(model_, train_set, validation, train_config_);
}

int CnnClassifier::predict(const Tensor& epoch) const { return megnet::predict(model_.config, model_.params, epoch); }

void CnnClassifier::update(const Tensor& epoch, int label) { online_update(model_, epoch, label, train_config_, update_rng_); }

std::vector<double> log_spaced(double low, double high, std::size_t count) {
  if (count == 1) return {low};
  std::vector<double> v(count);
  const double a = std::log10(low), b = std::log10(high);
  for (std::size_t i = 0; i < count; ++i) v[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
  return v;
}

std::vector<double> svm_margins(const LinearSvmParams& params, std::span<const double> x) {
  const std::size_t nc = params.weights.dim(0), d = params.weights.dim(1);
  if (x.size() + 1 != d) fail(ErrorCode::Dimension, "feature length does not match the SVM");
  std::vector<double> m(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    const double* w = params.weights.data() + c * d;
    double s = w[d - 1];
    for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * x[i];
    m[c] = s;
  }
  return m;
}

int svm_predict(const LinearSvmParams& params, std::span<const double> x) {
  const auto m = svm_margins(params, x);
  return static_cast<int>(std::max_element(m.begin(), m.end()) - m.begin());
}

void svm_update(LinearSvmParams& params, std::span<const double> x, int label) {
  const std::size_t nc = params.weights.dim(0), d = params.weights.dim(1);
  const double lambda = 1.0 / params.c_value;
  params.steps += 1;
  const double eta = 1.0 / (lambda * static_cast<double>(params.steps));
  const auto margins = svm_margins(params, x);
  const double radius = 1.0 / std::sqrt(lambda);
  for (std::size_t c = 0; c < nc; ++c) {
    const double y = static_cast<int>(c) == label ? 1.0 : -1.0;
    double* w = params.weights.data() + c * d;
    const double shrink = 1.0 - eta * lambda;
    for (std::size_t i = 0; i < d; ++i) w[i] *= shrink;
    if (y * margins[c] < 1.0) {
      for (std::size_t i = 0; i < x.size(); ++i) w[i] += eta * y * x[i];
      w[d - 1] += eta * y;
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < d; ++i) norm += w[i] * w[i];
    norm = std::sqrt(norm);
    if (norm > radius) {
      const double s = radius / norm;
      for (std::size_t i = 0; i < d; ++i) w[i] *= s;
    }
  }
}

LinearSvmParams svm_fit(const EpochSet& train_set, double c_value, std::size_t epochs, Rng& rng) {
  if (!(c_value > 0.0)) fail(ErrorCode::Parameter, "C must be positive");
  std::vector<int> classes(train_set.labels.begin(), train_set.labels.end());
  std::sort(classes.begin(), classes.end());
  if (classes.empty() || classes.front() == classes.back()) fail(ErrorCode::Parameter, "SVM training set has a single class");
  LinearSvmParams p;
  p.c_value = c_value;
  p.weights = Tensor({static_cast<std::size_t>(train_set.n_classes), train_set.channels() * train_set.times() + 1});
  for (std::size_t e = 0; e < epochs; ++e) {
    for (std::size_t i : permutation(rng, train_set.trials())) svm_update(p, train_set.epoch(i), train_set.labels[i]);
  }
  return p;
}

LinearSvmParams svm_train(const EpochSet& train_set, const EpochSet& validation, const SvmOptions& options,
                          double* best_validation_accuracy) {
  if (options.c_grid.empty()) fail(ErrorCode::Parameter, "empty C grid");
  LinearSvmParams best;
  double best_acc = -1.0;
  for (std::size_t g = 0; g < options.c_grid.size(); ++g) {
    Rng rng = Rng::substream(options.seed, {kSvmStream, g});
    LinearSvmParams p = svm_fit(train_set, options.c_grid[g], options.epochs, rng);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < validation.trials(); ++i)
      if (svm_predict(p, validation.epoch(i)) == validation.labels[i]) ++correct;
    const double acc = static_cast<double>(correct) / static_cast<double>(validation.trials());
    if (acc > best_acc) {
      best_acc = acc;
      best = std::move(p);
    }
  }
  if (best_validation_accuracy) *best_validation_accuracy = best_acc;
  return best;
}

void LinearSvmClassifier::fit(const EpochSet& train_set, const EpochSet& validation) {
  params_ = svm_train(train_set, validation, options_, &validation_accuracy_);
}

const char* to_string(UpdatePolicy p) { return p == UpdatePolicy::All ? "all" : "correct-only"; }

UpdatePolicy parse_update_policy(const std::string& name) {
  if (name == "all") return UpdatePolicy::All;
  if (name == "correct-only" || name == "correct") return UpdatePolicy::CorrectOnly;
  fail(ErrorCode::Parameter, "unknown update policy '" + name + "' (expected all or correct-only)");
}

RealtimeTrace pseudo_realtime(Classifier& classifier, const EpochSet& test, const RealtimeOptions& options) {
  if (options.batch < 1) fail(ErrorCode::Parameter, "batch size must be >= 1");
  if (test.trials() == 0) fail(ErrorCode::Parameter, "empty test set");
  RealtimeTrace trace;
  Rng rng = Rng::substream(options.seed, {kOrderStream});
  trace.order = permutation(rng, test.trials());
  trace.predictions.reserve(test.trials());

  for (std::size_t start = 0; start < trace.order.size(); start += options.batch) {
    const std::size_t end = std::min(trace.order.size(), start + options.batch);
    // Predict the whole batch before any update touches the classifier.
    std::vector<int> predicted;
    std::size_t correct = 0;
    for (std::size_t i = start; i < end; ++i) {
      const std::size_t trial = trace.order[i];
      const int p = classifier.predict(test.epoch_tensor(trial));
      predicted.push_back(p);
      if (p == test.labels[trial]) ++correct;
    }
    trace.predictions.insert(trace.predictions.end(), predicted.begin(), predicted.end());
    trace.batch_sizes.push_back(end - start);
    trace.batch_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(end - start));
    trace.correct += correct;

    for (std::size_t i = start; i < end; ++i) {
      const std::size_t trial = trace.order[i];
      const bool hit = predicted[i - start] == test.labels[trial];
      if (options.policy == UpdatePolicy::CorrectOnly && !hit) continue;
      classifier.update(test.epoch_tensor(trial), test.labels[trial]);
      ++trace.updates;
    }
  }
  trace.accuracy = static_cast<double>(trace.correct) / static_cast<double>(test.trials());
  return trace;
}

std::string trace_csv(const RealtimeTrace& trace) {
  std::ostringstream out;
  out << std::setprecision(17) << "batch,size,accuracy\n";
  for (std::size_t b = 0; b < trace.batch_accuracy.size(); ++b)
    out << b << ',' << trace.batch_sizes[b] << ',' << trace.batch_accuracy[b] << '\n';
  out << "overall," << trace.order.size() << ',' << trace.accuracy << '\n';
  return out.str();
}

MeanSd mean_sd(std::span<const double> values) {
  MeanSd r;
  if (values.empty()) return r;
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return r;
}

MeanSd EvalReport::validation() const { return fold_stat(*this, [](const FoldResult& f) { return f.validation_accuracy; }); }
MeanSd EvalReport::initial_test() const { return fold_stat(*this, [](const FoldResult& f) { return f.initial_test_accuracy; }); }
MeanSd EvalReport::realtime() const { return fold_stat(*this, [](const FoldResult& f) { return f.realtime_accuracy; }); }

std::uint64_t fold_seed(std::uint64_t seed, int subject) {
  return Rng::substream(seed, {0x666f6c64ULL, static_cast<std::uint64_t>(subject)}).next_u64();
}

Split loso_split(const EpochSet& dataset, int subject, std::uint64_t seed, double validation_fraction) {
  Rng rng = Rng::substream(fold_seed(seed, subject), {kSplitStream});
  return split(dataset, SplitSpec{subject, validation_fraction}, rng);
}

std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const int> truth, std::span<const int> predicted, int n_classes) {
  if (truth.size() != predicted.size()) fail(ErrorCode::Dimension, "confusion matrix inputs differ in length");
  std::vector<std::vector<std::size_t>> m(static_cast<std::size_t>(n_classes), std::vector<std::size_t>(static_cast<std::size_t>(n_classes)));
  for (std::size_t i = 0; i < truth.size(); ++i) m.at(static_cast<std::size_t>(truth[i])).at(static_cast<std::size_t>(predicted[i]))++;
  return m;
}

FoldResult evaluate_fold(const EpochSet& dataset, int subject, const ClassifierFactory& factory, const LosoOptions& options) {
  FoldResult r;
  r.subject = subject;
  try {
    const std::uint64_t seed = fold_seed(options.seed, subject);
    const Split parts = loso_split(dataset, subject, options.seed, options.validation_fraction);
    std::unique_ptr<Classifier> clf = factory(seed);
    clf->fit(parts.train, parts.validation);
    r.validation_accuracy = clf->validation_accuracy();

    std::vector<int> predicted(parts.test.trials());
    for (std::size_t i = 0; i < parts.test.trials(); ++i) predicted[i] = clf->predict(parts.test.epoch_tensor(i));
    r.confusion = confusion_matrix(parts.test.labels, predicted, dataset.n_classes);
    r.test_trials = parts.test.trials();
    for (std::size_t i = 0; i < predicted.size(); ++i)
      if (predicted[i] == parts.test.labels[i]) ++r.test_correct;
    r.initial_test_accuracy = static_cast<double>(r.test_correct) / static_cast<double>(r.test_trials);

    if (options.run_realtime) {
      RealtimeOptions rt = options.realtime;
      rt.seed = seed;
      r.realtime_accuracy = pseudo_realtime(*clf, parts.test, rt).accuracy;
    }
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  return r;
}

EvalReport loso_evaluate(const EpochSet& dataset, const ClassifierFactory& factory, const LosoOptions& options) {
  std::vector<int> subjects = options.subjects.empty() ? distinct_subjects(dataset) : options.subjects;
  if (distinct_subjects(dataset).size() < 2) fail(ErrorCode::Parameter, "leave-one-subject-out needs at least two subjects");
  EvalReport report;
  report.seed = options.seed;
  report.folds.resize(subjects.size());
  parallel_for(subjects.size(), options.fold_threads, [&](std::size_t i) {
    report.folds[i] = evaluate_fold(dataset, subjects[i], factory, options);
  });
  report.model = factory(0)->name();
  return report;
}

std::string eval_csv(std::span<const EvalReport> reports) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "model,subject,status,validation,initial_test,pseudo_realtime,test_trials\n";
  for (const auto& r : reports) {
    for (const auto& f : r.folds) {
      out << r.model << ',' << f.subject << ',' << (f.ok ? "ok" : "failed") << ',' << f.validation_accuracy << ','
          << f.initial_test_accuracy << ',' << f.realtime_accuracy << ',' << f.test_trials << '\n';
    }
    const MeanSd v = r.validation(), t = r.initial_test(), p = r.realtime();
    out << r.model << ",mean,," << v.mean << ',' << t.mean << ',' << p.mean << ",\n";
    out << r.model << ",sd,," << v.sd << ',' << t.sd << ',' << p.sd << ",\n";
  }
  return out.str();
}

std::string eval_table(std::span<const EvalReport> reports) {
  const std::vector<std::string> header = {"Model", "Validation (%)", "Initial test (%)", "Pseudo-real-time (%)"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : reports) {
    for (const auto& f : r.folds) {
      if (!f.ok) {
        rows.push_back({r.model + " / subject " + std::to_string(f.subject), "failed", "failed", "failed"});
        continue;
      }
      rows.push_back({r.model + " / subject " + std::to_string(f.subject), percent(f.validation_accuracy),
                      percent(f.initial_test_accuracy), percent(f.realtime_accuracy)});
    }
    rows.push_back({r.model + " (mean +/- SD)", percent(r.validation()), percent(r.initial_test()), percent(r.realtime())});
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& row : rows) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == 0) {
        out << std::left << std::setw(static_cast<int>(width[c])) << cells[c];
      } else {
        out << " | " << std::right << std::setw(static_cast<int>(width[c])) << cells[c];
      }
    }
    out << '\n';
  };
  line(header);
  std::size_t total = 0;
  for (std::size_t w : width) total += w;
  out << std::string(total + 3 * (width.size() - 1), '-') << '\n';
  for (const auto& row : rows) line(row);
  return out.str();
}

double binomial_upper_tail(std::size_t k, std::size_t n, double p) {
  if (k == 0) return 1.0;
  if (k > n) return 0.0;
  double total = 0.0;
  const double lp = std::log(p), lq = std::log1p(-p);
  for (std::size_t i = k; i <= n; ++i) {
    const double li = std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(i) + 1.0) -
                      std::lgamma(static_cast<double>(n - i) + 1.0) + static_cast<double>(i) * lp +
                      static_cast<double>(n - i) * lq;
    total += std::exp(li);
  }
  return std::min(1.0, total);
}

}  // namespace megnet
