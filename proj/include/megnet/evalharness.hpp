// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "megnet/dataio.hpp"
#include "megnet/epochset.hpp"
#include "megnet/optim.hpp"

namespace megnet {

// Anything that can be fitted on pooled subjects, then predict and be
// updated one trial at a time on a new subject.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::string name() const = 0;
  virtual void fit(const EpochSet& train, const EpochSet& validation) = 0;
  virtual int predict(const Tensor& epoch) const = 0;
  virtual void update(const Tensor& epoch, int label) = 0;
  virtual double validation_accuracy() const = 0;
};

class CnnClassifier final : public Classifier {
 public:
  CnnClassifier(ModelConfig config, TrainConfig train_config);
  // Wraps an already trained model; fit() would retrain it from scratch.
  CnnClassifier(Model model, TrainConfig train_config);

  std::string name() const override;
  void fit(const EpochSet& train, const EpochSet& validation) override;
  int predict(const Tensor& epoch) const override;
  void update(const Tensor& epoch, int label) override;
  double validation_accuracy() const override { return report_.validation_accuracy; }

  const Model& model() const { return model_; }
  const TrainReport& report() const { return report_; }

 private:
  TrainConfig train_config_;
  Model model_;
  TrainReport report_;
  Rng update_rng_;
};

// One-vs-rest linear SVMs over flattened channel x time features plus a
// constant feature, trained by Pegasos-style stochastic subgradient descent
// on lambda/2 |w|^2 + mean hinge loss with lambda = 1/C.
struct LinearSvmParams {
  Tensor weights;  // n_classes x (features + 1)
  double c_value = 0.0;
  std::uint64_t steps = 0;
};

std::vector<double> log_spaced(double low, double high, std::size_t count);

struct SvmOptions {
  std::vector<double> c_grid = log_spaced(1e3, 1e5, 5);
  std::size_t epochs = 5;
  std::uint64_t seed = 0;
};

LinearSvmParams svm_fit(const EpochSet& train, double c_value, std::size_t epochs, Rng& rng);
// Fits one model per C and keeps the one with the highest validation
// accuracy (first in grid order on ties).
LinearSvmParams svm_train(const EpochSet& train, const EpochSet& validation, const SvmOptions& options,
                          double* best_validation_accuracy = nullptr);
std::vector<double> svm_margins(const LinearSvmParams& params, std::span<const double> epoch);
// Arg-max margin; the lowest class index wins ties.
int svm_predict(const LinearSvmParams& params, std::span<const double> epoch);
// One subgradient step per class on a single labelled trial.
void svm_update(LinearSvmParams& params, std::span<const double> epoch, int label);

class LinearSvmClassifier final : public Classifier {
 public:
  explicit LinearSvmClassifier(SvmOptions options) : options_(std::move(options)) {}
  std::string name() const override { return "Linear SVM"; }
  void fit(const EpochSet& train, const EpochSet& validation) override;
  int predict(const Tensor& epoch) const override { return svm_predict(params_, epoch.values()); }
  void update(const Tensor& epoch, int label) override { svm_update(params_, epoch.values(), label); }
  double validation_accuracy() const override { return validation_accuracy_; }
  const LinearSvmParams& params() const { return params_; }

 private:
  SvmOptions options_;
  LinearSvmParams params_;
  double validation_accuracy_ = 0.0;
};

enum class UpdatePolicy { All, CorrectOnly };
const char* to_string(UpdatePolicy p);
UpdatePolicy parse_update_policy(const std::string& name);

struct RealtimeOptions {
  std::size_t batch = 20;
  UpdatePolicy policy = UpdatePolicy::All;
  std::uint64_t seed = 0;  // presentation order of the test trials
};

struct RealtimeTrace {
  std::vector<std::size_t> order;  // presentation order (trial indices)
  std::vector<double> batch_accuracy;
  std::vector<std::size_t> batch_sizes;
  std::vector<int> predictions;    // in presentation order
  std::size_t correct = 0;
  std::size_t updates = 0;
  double accuracy = 0.0;           // over all presented trials
};

// Predicts each batch of `batch` trials, records the batch accuracy, then
// updates the classifier on the batch's trials with their true labels.
RealtimeTrace pseudo_realtime(Classifier& classifier, const EpochSet& test, const RealtimeOptions& options);

std::string trace_csv(const RealtimeTrace& trace);

struct FoldResult {
  int subject = 0;
  bool ok = false;
  std::string error;
  double validation_accuracy = 0.0;
  double initial_test_accuracy = 0.0;
  double realtime_accuracy = 0.0;
  std::size_t test_trials = 0;
  std::size_t test_correct = 0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // divisor m - 1
};
MeanSd mean_sd(std::span<const double> values);

struct EvalReport {
  std::string model;
  std::uint64_t seed = 0;
  std::vector<FoldResult> folds;

  MeanSd validation() const;
  MeanSd initial_test() const;
  MeanSd realtime() const;
};

using ClassifierFactory = std::function<std::unique_ptr<Classifier>(std::uint64_t fold_seed)>;

struct LosoOptions {
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
  bool run_realtime = true;
  RealtimeOptions realtime;
  std::vector<int> subjects;  // empty = every subject
  unsigned fold_threads = 1;
};

// Per-fold seed used for splitting and for the classifier factory.
std::uint64_t fold_seed(std::uint64_t seed, int subject);
// The split evaluate_fold uses for `subject`.
Split loso_split(const EpochSet& dataset, int subject, std::uint64_t seed, double validation_fraction);

FoldResult evaluate_fold(const EpochSet& dataset, int subject, const ClassifierFactory& factory, const LosoOptions& options);
EvalReport loso_evaluate(const EpochSet& dataset, const ClassifierFactory& factory, const LosoOptions& options);

std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const int> truth, std::span<const int> predicted,
                                                       int n_classes);

// CSV: model,subject,status,validation,initial_test,pseudo_realtime,test_trials
// plus one mean and one sd row per model.
std::string eval_csv(std::span<const EvalReport> reports);
// Aligned table: Model | Validation (%) | Initial test (%) | Pseudo-real-time (%),
// followed by per-subject rows for each model.
std::string eval_table(std::span<const EvalReport> reports);

// P(X >= k) for X ~ Binomial(n, p).
double binomial_upper_tail(std::size_t k, std::size_t n, double p);

}  // namespace megnet
