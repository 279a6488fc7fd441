#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "semloop/corpus.hpp"
#include "semloop/explainers.hpp"
#include "semloop/learner.hpp"
#include "semloop/oracle.hpp"
#include "semloop/topic_model.hpp"

namespace semloop {

enum class Strategy { active_learning, caipi_d, caipi_dc, semantic_push };

const char* to_string(Strategy s);
Strategy parse_strategy(std::string_view name);

enum class Provenance {
  caipi_masked,
  caipi_constructive,
  semantic_completion,
  semantic_correction_true,
  semantic_correction_pred,
};

const char* to_string(Provenance p);

struct Counterexample {
  std::vector<WordId> tokens;
  ClassId label = 0;
  Provenance provenance = Provenance::caipi_masked;
  std::vector<TopicId> topics;  // per-token topic for SemanticPush output, else empty

  nlohmann::json to_json(const Vocabulary& vocab) const;
};

struct StrategyConfig {
  std::size_t M = 10;
  double lambda = 0.95;
  std::size_t counterexample_length = 25;
  std::size_t lime_features = 7;
  std::size_t topiclime_features = 3;
  double k_fraction = 0.1;  // top share of GS_y+ used by CAIPI_d/c
  std::uint64_t seed = 1;

  void validate() const;
};

/// Pool entry (a document index) with the highest 1 - P(y_hat | x); ties go
/// to the smallest index.
std::size_t select_query(const ProbabilisticClassifier& f, const std::vector<Document>& docs,
                         std::span<const std::size_t> pool);

/// x with every occurrence of the destructive words removed, replicated M
/// times. Empty unless predicted == y and the masked document is non-empty.
std::vector<Counterexample> caipi_destructive(const Document& x, ClassId y, ClassId predicted,
                                              std::span<const FeatureId> destructive,
                                              std::size_t M);

/// M documents of `length` words drawn uniformly with replacement from
/// `support`. Empty when predicted == y or the support is empty.
std::vector<Counterexample> caipi_constructive(ClassId y, ClassId predicted,
                                               std::span<const WordId> support, std::size_t M,
                                               std::size_t length, std::uint64_t seed);

/// Same, with the support taken as the local Gold Standard of x.
std::vector<Counterexample> caipi_constructive(const Document& x, ClassId y, ClassId predicted,
                                               const GoldStandard& gs, double k_fraction,
                                               std::size_t M, std::size_t length,
                                               std::uint64_t seed);

/// Weight of `feature` in a per-class knowledge list, if it has an entry.
std::optional<double> knowledge_weight(std::span<const FeatureWeight> knowledge, FeatureId feature);

enum class TopicCase { keep, increase, decrease };

const char* to_string(TopicCase c);

/// Mixture-manipulation case of one topic given its explanation weight
/// (nullopt: not in the explanation) and its knowledge weight (nullopt:
/// no entry).
TopicCase topic_case(std::optional<double> explanation_weight, std::optional<double> knowledge);

struct MixtureManipulation {
  std::vector<TopicCase> cases;
  std::vector<double> pre_psi;       // manipulated, unnormalized
  std::vector<double> distribution;  // psi(pre_psi), or psi(GS+) on fallback
  bool fallback = false;
};

/// Applies the per-topic case table to theta. Throws DegenerateMixture when
/// every topic is zeroed and the knowledge has no positive entry.
MixtureManipulation manipulate_mixture(std::span<const double> theta,
                                       std::span<const FeatureWeight> knowledge,
                                       const Explanation& explanation, double lambda);

/// Topic distribution used by the completion sampler; empty when no
/// relevant topic is missing from the explanation's positive part.
std::vector<double> completion_distribution(std::span<const double> theta,
                                            std::span<const FeatureWeight> knowledge,
                                            const Explanation& explanation, double lambda);

std::vector<WordId> semantic_completion(std::span<const double> theta,
                                        std::span<const FeatureWeight> knowledge,
                                        const Explanation& explanation, double lambda,
                                        const LdaModel& lda, std::size_t n_tokens,
                                        std::uint64_t seed, std::vector<TopicId>* topics = nullptr);

struct CorrectionSample {
  std::vector<WordId> tokens;
  std::vector<TopicId> topics;
  MixtureManipulation manipulation;
};

CorrectionSample semantic_correction(std::span<const double> theta,
                                     std::span<const FeatureWeight> knowledge,
                                     const Explanation& explanation, double lambda,
                                     const LdaModel& lda, std::size_t length, std::uint64_t seed);

enum class PushBranch { none, partially_wrong_reasons, false_prediction };

const char* to_string(PushBranch b);

struct PushInput {
  const Document* x = nullptr;
  const Inference* inference = nullptr;
  ClassId y = 0;
  ClassId predicted = 0;
  const Explanation* explanation_y = nullptr;
  const Explanation* explanation_predicted = nullptr;  // required when predicted != y
  std::span<const FeatureWeight> knowledge_y;
  std::span<const FeatureWeight> knowledge_predicted;
};

struct PushResult {
  PushBranch branch = PushBranch::none;
  std::vector<FeatureId> destructive;  // C_dest, ascending
  std::vector<Counterexample> counterexamples;
  bool fallback = false;  // a degenerate mixture fell back to psi(GS+)
};

PushResult semantic_push(const PushInput& in, const LdaModel& lda, const StrategyConfig& cfg,
                         std::uint64_t seed);

}  // namespace semloop
