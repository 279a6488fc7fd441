#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "semloop/corpus.hpp"
#include "semloop/explainers.hpp"
#include "semloop/learner.hpp"
#include "semloop/oracle.hpp"
#include "semloop/topic_model.hpp"

namespace semloop {

/// Unweighted mean of per-class F1 over classes 0..num_classes-1.
double macro_f1(std::span<const ClassId> predictions, std::span<const ClassId> truths,
                std::size_t num_classes);

/// Labeled documents borrowed from a corpus.
struct TestView {
  std::vector<const Document*> docs;
  std::vector<ClassId> labels;

  std::size_t size() const { return docs.size(); }
  static TestView of(const LabeledCorpus& corpus, std::span<const std::size_t> indices);
};

std::vector<ClassId> predict_all(const ProbabilisticClassifier& f, const TestView& test);

double macro_f1(const ProbabilisticClassifier& f, const TestView& test, std::size_t num_classes);

/// Mean of P(y_hat | x) - P(y | x).
double avg_classification_margin(const ProbabilisticClassifier& f, const TestView& test);

struct LocalExplanation {
  Explanation explanation;
  std::optional<TopicAssignment> assignment;  // set for topic explanations
};

/// Explains test instance `index` for `target`.
using ExplainerFn =
    std::function<LocalExplanation(std::size_t index, const Document& x, ClassId target)>;

/// LIME with a per-instance seed derived from cfg.seed.
ExplainerFn make_lime_explainer(const ProbabilisticClassifier& f, PerturbationConfig cfg);

/// topicLIME over precomputed inferences, one per test instance.
ExplainerFn make_topiclime_explainer(const ProbabilisticClassifier& f, const LdaModel& lda,
                                     std::vector<Inference> inferences, PerturbationConfig cfg);

/// Number of top features CRI removes: 0 for k = 0, otherwise at least one.
std::size_t cri_removal_count(std::size_t num_features, double k_fraction);

/// Mean |f(x)[target] - g(x)| for explanations of the predicted class.
double mlae(const ProbabilisticClassifier& f, const ExplainerFn& explain, const TestView& test);

double mean_r2(const ProbabilisticClassifier& f, const ExplainerFn& explain, const TestView& test);

double cri(const ProbabilisticClassifier& f, const ExplainerFn& explain, const TestView& test,
           double k_fraction);

struct FidelityReport {
  double mlae = 0.0;
  double mean_r2 = 0.0;
  double cri = 0.0;
  std::size_t instances = 0;

  nlohmann::json to_json() const;
};

/// All three fidelity measures from one explanation per instance.
FidelityReport fidelity(const ProbabilisticClassifier& f, const ExplainerFn& explain,
                        const TestView& test, double k_fraction);

struct EaConfig {
  double k_fraction = 0.1;
  std::size_t num_samples = 1000;
  double kernel_width = 0.0;
  std::uint64_t seed = 0;
};

struct EaResult {
  double value = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;  // empty local Gold Standard
};

/// |GS_local ∩ explanation words| / |GS_local| averaged over instances with
/// a non-empty local Gold Standard. LIME explains the true class with
/// complexity |GS_local|.
EaResult explanatory_accuracy(const ProbabilisticClassifier& f, const GoldStandard& gs,
                              const TestView& test, const EaConfig& cfg);

/// Recall of `local` words among the explanation features.
double explanation_recall(std::span<const WordId> local, const Explanation& explanation);

class MetricSeries {
 public:
  explicit MetricSeries(std::string name) : name_(std::move(name)) {}

  const std::string& name() const { return name_; }
  const std::vector<std::pair<std::size_t, double>>& points() const { return points_; }
  bool empty() const { return points_.empty(); }
  double last() const { return points_.back().second; }
  std::optional<double> at(std::size_t iteration) const;

  /// Iterations must be strictly increasing.
  void add(std::size_t iteration, double value);

  nlohmann::json to_json() const;

 private:
  std::string name_;
  std::vector<std::pair<std::size_t, double>> points_;
};

/// Round-trippable fixed formatting used for every metric file.
std::string format_metric(double value);

/// "iteration,metric,value" rows ordered by iteration, then series order.
std::string metrics_csv(std::span<const MetricSeries> series);

}  // namespace semloop
