#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "semloop/corpus.hpp"
#include "semloop/explainers.hpp"
#include "semloop/learner.hpp"
#include "semloop/metrics.hpp"
#include "semloop/oracle.hpp"
#include "semloop/strategies.hpp"
#include "semloop/topic_model.hpp"

namespace semloop {

inline constexpr int kRecordSchemaVersion = 1;

struct LoopConfig {
  Strategy strategy = Strategy::semantic_push;
  std::size_t iterations = 100;
  StrategyConfig strategy_cfg;
  LearnerParams learner;
  std::size_t lime_samples = 1000;
  std::size_t topiclime_samples = 500;
  double kernel_width = 0.0;  // <= 0: per-explainer default
  InferenceParams inference;
  std::size_t margin_every = 10;  // 0 disables
  std::size_t ea_every = 20;      // 0 disables
  double ea_k_fraction = 0.1;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Borrowed inputs of one loop; the corpus, topic model and Gold Standards
/// must outlive it.
struct LoopData {
  const LabeledCorpus* corpus = nullptr;
  std::vector<std::size_t> train;
  std::vector<std::size_t> pool;
  std::vector<std::size_t> test;
  const LdaModel* lda = nullptr;          // required by SemanticPush
  const GoldStandard* word_gs = nullptr;  // CAIPI oracle and explanatory accuracy
  const GoldStandard* topic_gs = nullptr; // SemanticPush oracle
};

struct MetricSnapshot {
  double macro_f1 = 0.0;
  std::optional<double> margin;
  std::optional<double> explanatory_accuracy;

  nlohmann::json to_json() const;
};

/// The query awaiting a correction.
struct PendingQuery {
  std::size_t iteration = 0;  // 1-based
  std::size_t instance = 0;   // corpus index
  ClassId predicted = 0;
  ClassDistribution proba;
  std::optional<Explanation> lime;        // predicted class
  std::optional<Inference> inference;     // topic strategies
  std::vector<Explanation> topic_explanations;  // one per class, topic strategies
};

struct IterationRecord {
  std::size_t iteration = 0;
  std::size_t instance = 0;
  std::string doc_id;
  ClassId predicted = 0;
  ClassId truth = 0;
  std::optional<Explanation> explanation;  // the explanation the strategy consumed
  std::optional<CorrectionFeedback> correction;
  PushBranch branch = PushBranch::none;
  std::vector<Counterexample> counterexamples;
  bool fallback = false;
  std::size_t train_size = 0;
  std::size_t pool_size = 0;
  MetricSnapshot metrics;

  nlohmann::json to_json(const Vocabulary& vocab) const;
};

/// One explain-correct-retrain loop, split so that a human or a simulated
/// oracle can answer each query.
class InteractionLoop {
 public:
  InteractionLoop(LoopData data, LoopConfig cfg);

  const LoopConfig& config() const { return cfg_; }
  const LoopData& data() const { return data_; }

  /// Budget exhausted or pool empty.
  bool finished() const;
  std::size_t iteration() const { return records_.size(); }

  /// Selects and explains the next query if none is pending.
  const PendingQuery& pending();
  bool has_pending() const { return pending_.has_value(); }

  /// Gold-Standard answer to the pending query.
  CorrectionFeedback simulated_feedback();

  /// Generates counterexamples, updates L and U, retrains and records.
  const IterationRecord& apply(const CorrectionFeedback& feedback);

  const SoftmaxRegression& model() const { return *model_; }
  std::size_t train_size() const { return train_.size(); }
  std::size_t pool_size() const { return pool_.size(); }
  const std::vector<IterationRecord>& records() const { return records_; }
  const MetricSeries& f1_series() const { return f1_; }
  const MetricSeries& margin_series() const { return margin_; }
  const MetricSeries& ea_series() const { return ea_; }
  std::vector<MetricSeries> series() const { return {f1_, margin_, ea_}; }

 private:
  void refit();
  MetricSnapshot measure(std::size_t iteration);
  PerturbationConfig explainer_cfg(FeatureKind kind, std::uint64_t seed) const;

  LoopData data_;
  LoopConfig cfg_;
  TestView test_;
  TrainSet train_;
  std::vector<std::size_t> pool_;  // ascending corpus indices
  std::unique_ptr<SoftmaxRegression> model_;
  std::optional<PendingQuery> pending_;
  std::vector<IterationRecord> records_;
  MetricSeries f1_{"macro_f1"};
  MetricSeries margin_{"margin"};
  MetricSeries ea_{"explanatory_accuracy"};
};

struct LoopResult {
  std::vector<IterationRecord> records;
  std::vector<MetricSeries> series;
};

/// Runs the loop with the simulated oracle until the budget or pool runs out.
LoopResult run_loop(LoopData data, LoopConfig cfg,
                    const std::function<void(const IterationRecord&)>& observer = {});

/// JSON lines, one record per iteration.
std::string records_jsonl(const std::vector<IterationRecord>& records, const Vocabulary& vocab);

}  // namespace semloop
