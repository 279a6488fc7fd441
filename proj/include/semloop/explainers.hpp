#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "semloop/corpus.hpp"
#include "semloop/learner.hpp"
#include "semloop/topic_model.hpp"

namespace semloop {

enum class FeatureKind { word, topic };

const char* to_string(FeatureKind kind);
FeatureKind parse_feature_kind(std::string_view name);

/// A feature id is a WordId or a TopicId depending on the kind.
using FeatureId = std::int32_t;

struct FeatureWeight {
  FeatureId feature;
  double weight;

  bool operator==(const FeatureWeight&) const = default;
};

/// Signed local attributions from a surrogate model, sorted by |weight|
/// descending with unique feature ids.
struct Explanation {
  ClassId target_class = 0;
  FeatureKind kind = FeatureKind::word;
  std::vector<FeatureWeight> features;
  double surrogate_r2 = 0.0;
  double intercept = 0.0;
  double model_prediction = 0.0;  // f(x) for the target class
  double local_prediction = 0.0;  // g(x) at the unperturbed instance

  std::vector<FeatureWeight> positive_part() const;
  std::vector<FeatureWeight> negative_part() const;
  bool contains(FeatureId feature) const;
  std::optional<double> weight_of(FeatureId feature) const;

  nlohmann::json to_json() const;
  static Explanation from_json(const nlohmann::json& j);

  bool operator==(const Explanation&) const = default;
};

struct PerturbationConfig {
  std::size_t num_samples = 1000;
  double kernel_width = 0.0;  // <= 0: 0.75 * sqrt(#interpretable features)
  std::uint64_t seed = 0;
  std::size_t complexity = 7;
  double ridge = 1.0;

  void validate() const;
};

/// Masked copies of a document with their interpretable indicator vectors.
/// Sample 0 is always the unperturbed instance.
struct Neighborhood {
  FeatureKind kind = FeatureKind::word;
  std::vector<FeatureId> features;  // distinct words or active topics, ascending
  std::vector<std::vector<std::uint8_t>> indicators;
  std::vector<std::vector<WordId>> documents;
};

/// Keeps the tokens whose interpretable feature is switched on. For topic
/// features a token belongs to its assigned topic.
std::vector<WordId> apply_mask(std::span<const WordId> tokens, std::span<const FeatureId> features,
                               std::span<const std::uint8_t> indicator, FeatureKind kind,
                               const TopicAssignment* assignment);

Neighborhood perturbation_neighborhood(const Document& x, FeatureKind kind,
                                       const TopicAssignment* assignment, std::size_t num_samples,
                                       std::uint64_t seed);

/// Fits the weighted ridge surrogate to f's target-class probability over a
/// neighborhood.
Explanation explain_neighborhood(const ProbabilisticClassifier& f, const Neighborhood& hood,
                                 ClassId target_class, const PerturbationConfig& cfg);

Explanation lime_explain(const ProbabilisticClassifier& f, const Document& x, ClassId target_class,
                         const PerturbationConfig& cfg);

Explanation topiclime_explain(const ProbabilisticClassifier& f, const Document& x,
                              ClassId target_class, const LdaModel& lda,
                              const TopicAssignment& assignment, const PerturbationConfig& cfg);

/// Removes every token carrying one of `features` (all occurrences of a
/// word, or all tokens assigned to a topic).
std::vector<WordId> remove_features(std::span<const WordId> tokens,
                                    std::span<const FeatureId> features, FeatureKind kind,
                                    const TopicAssignment* assignment);

}  // namespace semloop
