#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "semloop/corpus.hpp"
#include "semloop/loop.hpp"
#include "semloop/metrics.hpp"
#include "semloop/oracle.hpp"
#include "semloop/strategies.hpp"
#include "semloop/synthetic.hpp"
#include "semloop/topic_model.hpp"

namespace semloop {

inline constexpr int kConfigSchemaVersion = 1;

struct DatasetSpec {
  std::string source = "synthetic";  // "synthetic" or "file"
  std::filesystem::path path;
  DatasetFormat format = DatasetFormat::ag_news_csv;
  std::size_t max_documents = 2000;  // seeded subsample; 0 keeps all
  SyntheticNewsConfig synthetic;
};

struct SplitFractions {
  double train = 0.01;
  double pool = 0.79;
  double test = 0.20;

  void validate() const;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  SplitFractions split;
  std::vector<Strategy> strategies{Strategy::active_learning, Strategy::caipi_d,
                                   Strategy::caipi_dc, Strategy::semantic_push};
  std::size_t iterations = 200;
  StrategyConfig strategy;
  bool counterexample_length_from_corpus = true;
  std::optional<std::size_t> num_topics;  // fixed K; otherwise select from k_candidates
  std::vector<std::size_t> k_candidates{5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
  LdaParams lda;
  CoherenceParams coherence;
  InferenceParams inference;
  LearnerParams learner;
  double word_gs_regularization = 1e-3;
  double topic_gs_regularization = 1e-3;
  double gs_holdout_fraction = 0.2;
  std::size_t lime_samples = 1000;
  std::size_t topiclime_samples = 500;
  double kernel_width = 0.0;
  std::size_t margin_every = 10;
  std::size_t ea_every = 20;
  double ea_k_fraction = 0.1;
  double cri_k_fraction = 0.1;
  std::uint64_t seed = 1;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
};

/// Replaces the seed with SEMLOOP_SEED when that variable is set.
void apply_seed_override(ExperimentConfig& cfg);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> pool;
  std::vector<std::size_t> test;
};

/// Per class: ceil(train share), then round(test share) capped by what is
/// left, the remainder to the pool. Indices ascending within each part.
Split stratified_split(const LabeledCorpus& corpus, const SplitFractions& fractions,
                       std::uint64_t seed);

/// Corpus, topic model, Gold Standards and split shared by every strategy.
struct PreparedExperiment {
  ExperimentConfig config;
  LabeledCorpus corpus;
  std::optional<LdaModel> lda;
  std::vector<KCandidate> k_candidates;
  GoldStandard word_gs;
  GoldStandard topic_gs;
  Split split;

  LoopData loop_data() const;
  LoopConfig loop_config(Strategy strategy) const;
};

/// Loads (or generates) the corpus and builds everything a run needs.
std::shared_ptr<PreparedExperiment> prepare_experiment(const ExperimentConfig& cfg);

/// Raw records for a dataset spec (synthetic ones go through the CSV reader).
LabeledCorpus load_corpus(const DatasetSpec& spec, std::uint64_t seed);

struct StrategyRun {
  Strategy strategy;
  std::vector<IterationRecord> records;
  std::vector<MetricSeries> series;
};

struct ResultLog {
  nlohmann::ordered_json config;
  std::vector<StrategyRun> runs;
  nlohmann::ordered_json summary;
  double wall_clock_seconds = 0.0;
};

/// Runs every configured strategy from the same split and initial model.
/// Writes config.json, <strategy>/records.jsonl, <strategy>/metrics.csv and
/// report.json under out_dir when given.
ResultLog run_experiment(const ExperimentConfig& cfg,
                         const std::optional<std::filesystem::path>& out_dir = std::nullopt);

ResultLog run_experiment(const PreparedExperiment& prepared,
                         const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Final values and F1 at fixed iterations per strategy.
nlohmann::ordered_json summarize_runs(const std::vector<StrategyRun>& runs, std::size_t iterations);

struct FidelityTable {
  FidelityReport lime;
  FidelityReport topiclime;
  std::size_t num_topics = 0;

  nlohmann::ordered_json to_json() const;
  std::string to_text() const;
};

/// LIME and topicLIME fidelity for a model trained on train and pool,
/// explaining its predictions on the test split.
FidelityTable run_fidelity(const PreparedExperiment& prepared);

/// Re-reads an output directory and returns report.json's summary plus a
/// plot-ready long CSV of every strategy's metrics.
struct ReportFiles {
  nlohmann::ordered_json summary;
  std::string curves_csv;  // strategy,iteration,metric,value
};

ReportFiles build_report(const std::filesystem::path& out_dir);

}  // namespace semloop
