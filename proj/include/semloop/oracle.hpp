#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "semloop/corpus.hpp"
#include "semloop/explainers.hpp"
#include "semloop/learner.hpp"
#include "semloop/topic_model.hpp"

namespace semloop {

/// Weights at or below this magnitude count as "no entry" for a class.
inline constexpr double kGsMembershipThreshold = 1e-6;

/// Per-class signed feature weights standing in for expert knowledge.
/// Each class list is sorted by weight descending; ties break on the
/// feature name (words) or the feature id (topics).
class GoldStandard {
 public:
  GoldStandard() = default;
  GoldStandard(FeatureKind kind, std::vector<std::vector<FeatureWeight>> per_class,
               std::vector<std::string> feature_names, double source_f1);

  /// Keeps entries with |w| > kGsMembershipThreshold from a classes x
  /// features weight matrix.
  static GoldStandard from_weights(FeatureKind kind, const Eigen::MatrixXd& weights,
                                   std::vector<std::string> feature_names, double source_f1);

  FeatureKind kind() const { return kind_; }
  std::size_t num_classes() const { return per_class_.size(); }
  double source_f1() const { return source_f1_; }
  const std::vector<std::string>& feature_names() const { return names_; }

  const std::vector<FeatureWeight>& weights(ClassId y) const;
  std::vector<FeatureWeight> positive_part(ClassId y) const;
  std::vector<FeatureWeight> negative_part(ClassId y) const;
  bool contains(ClassId y, FeatureId feature) const;
  std::optional<double> weight_of(ClassId y, FeatureId feature) const;

  nlohmann::json to_json() const;
  static GoldStandard from_json(const nlohmann::json& j);

 private:
  FeatureKind kind_ = FeatureKind::word;
  std::vector<std::vector<FeatureWeight>> per_class_;
  std::vector<std::string> names_;
  double source_f1_ = 0.0;
};

/// Sorts by weight descending, ties by name when names are given, else by id.
void sort_by_relevance(std::vector<FeatureWeight>& weights,
                       const std::vector<std::string>& feature_names);

struct GsParams {
  double regularization = 1e-3;  // L1 strength
  double holdout_fraction = 0.2;
  std::size_t max_epochs = 300;
  std::uint64_t seed = 1;
};

/// L1-penalized softmax regression on l2-normalized bags of words over all
/// documents; source_f1 comes from a separate fit scored on a held-out fold.
GoldStandard build_word_gs(const LabeledCorpus& corpus, const GsParams& params);

/// Same over the K topic proportions inferred for each document.
GoldStandard build_topic_gs(const LabeledCorpus& corpus, const LdaModel& lda,
                            const GsParams& params, const InferenceParams& inference = {});

/// Topic-proportion rows for the regression, one inference per document.
std::vector<TopicMixture> infer_corpus_mixtures(const LabeledCorpus& corpus, const LdaModel& lda,
                                                const InferenceParams& inference,
                                                std::uint64_t seed);

struct LocalGoldStandard {
  std::string instance_id;
  std::vector<WordId> relevant_words;  // ascending
};

/// Top ceil(k * |ranking|) features of `positive_ranking` that occur in x,
/// ascending by id.
std::vector<WordId> top_k_support(std::span<const FeatureWeight> positive_ranking,
                                  const Document& x, double k_fraction);

LocalGoldStandard local_gs(const GoldStandard& gs, const Document& x, ClassId y,
                           double k_fraction);

enum class FeedbackSource { simulated, human };

const char* to_string(FeedbackSource source);

/// One correction round: the label, the features judged irrelevant, and the
/// per-class knowledge the strategies read.
struct CorrectionFeedback {
  ClassId true_label = 0;
  FeatureKind kind = FeatureKind::word;
  std::vector<FeatureId> destructive;  // ascending
  /// Positive (relevant) features per class, in relevance order.
  std::map<ClassId, std::vector<FeatureWeight>> constructive;
  /// Signed knowledge per class; a feature without an entry is irrelevant.
  std::map<ClassId, std::vector<FeatureWeight>> relevance;
  FeedbackSource source = FeedbackSource::simulated;

  nlohmann::json to_json() const;
  static CorrectionFeedback from_json(const nlohmann::json& j);

  bool operator==(const CorrectionFeedback&) const = default;
};

/// Answers a query from the Gold Standard.
CorrectionFeedback simulated_correction(const GoldStandard& gs, const Document& x, ClassId y,
                                        ClassId predicted, const Explanation& explanation);

}  // namespace semloop
