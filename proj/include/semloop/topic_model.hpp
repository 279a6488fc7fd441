#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "semloop/corpus.hpp"

namespace semloop {

using TopicId = std::int32_t;

/// Multinomial over K topics for one document.
class TopicMixture {
 public:
  TopicMixture() = default;
  /// Validates non-negativity and sum-to-one within `tolerance`.
  explicit TopicMixture(std::vector<double> theta, double tolerance = 1e-9);

  static TopicMixture uniform(std::size_t num_topics);

  std::size_t size() const { return theta_.size(); }
  double operator[](std::size_t t) const { return theta_[t]; }
  std::span<const double> values() const { return theta_; }

 private:
  std::vector<double> theta_;
};

/// Per-token topic indices for one document.
struct TopicAssignment {
  std::vector<TopicId> topics;

  /// Topics holding at least one token, ascending.
  std::vector<TopicId> active_topics() const;
};

struct LdaParams {
  std::size_t num_topics = 10;
  double alpha = -1.0;  // <= 0 selects 1/K
  double beta = 0.01;
  std::size_t iterations = 500;
  std::uint64_t seed = 1;

  double resolved_alpha() const {
    return alpha > 0.0 ? alpha : 1.0 / static_cast<double>(num_topics);
  }
};

struct InferenceParams {
  std::size_t burn_in = 100;
  std::size_t samples = 50;
};

struct Inference {
  TopicMixture mixture;
  TopicAssignment assignment;  // final sweep, aligned with the document tokens
};

/// Count tables exposed after each Gibbs sweep (for conservation checks).
struct GibbsCounts {
  std::size_t sweep;
  std::size_t num_topics;
  std::span<const int> word_topic;  // |V| x K, row-major by word
  std::span<const int> topic_totals;
};

class LdaModel {
 public:
  LdaModel(std::size_t num_topics, double alpha, double beta,
           std::vector<double> phi, std::uint64_t vocabulary_hash, std::uint64_t seed);

  std::size_t num_topics() const { return num_topics_; }
  std::size_t vocabulary_size() const { return vocab_size_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t vocabulary_hash() const { return vocab_hash_; }

  /// p(w | topic), length |V|.
  std::span<const double> topic_words(TopicId topic) const;
  double phi(TopicId topic, WordId word) const {
    return phi_[static_cast<std::size_t>(topic) * vocab_size_ + static_cast<std::size_t>(word)];
  }

  /// Highest-probability words of a topic (ties by smaller id).
  std::vector<WordId> top_words(TopicId topic, std::size_t n) const;

  /// Topic mixture of a document under fixed topics, by Gibbs sampling
  /// over its token assignments. Invariant under token reordering.
  Inference infer(std::span<const WordId> tokens, const InferenceParams& params,
                  std::uint64_t seed) const;

  /// Draws `length` words: z ~ Mult(theta), w ~ Mult(phi[z]).
  std::vector<WordId> sample_document(const TopicMixture& theta, std::size_t length,
                                      std::uint64_t seed) const;

  /// Raw-vector variant; rejects inputs off the simplex by more than 1e-6.
  /// Fills `topics` with the drawn z when given.
  std::vector<WordId> sample_document(std::span<const double> theta, std::size_t length,
                                      std::uint64_t seed,
                                      std::vector<TopicId>* topics = nullptr) const;

  /// Final topic-word counts from training; empty for deserialized models.
  const std::vector<int>& word_topic_counts() const { return word_topic_counts_; }
  void set_word_topic_counts(std::vector<int> counts) { word_topic_counts_ = std::move(counts); }

  nlohmann::json to_json() const;
  static LdaModel from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static LdaModel load(const std::string& path);

 private:
  std::size_t num_topics_;
  std::size_t vocab_size_;
  double alpha_;
  double beta_;
  std::vector<double> phi_;  // K x |V| row-major
  std::vector<double> cdf_;  // cumulative phi rows
  std::uint64_t vocab_hash_;
  std::uint64_t seed_;
  std::vector<int> word_topic_counts_;
};

using SweepObserver = std::function<void(const GibbsCounts&)>;

LdaModel fit_lda(const LabeledCorpus& corpus, const LdaParams& params,
                 const SweepObserver& observer = {});

/// Convenience wrapper around LdaModel::infer for a document.
Inference infer_mixture(const LdaModel& model, const Document& doc,
                        const InferenceParams& params, std::uint64_t seed);

struct CoherenceParams {
  std::size_t top_n = 10;
  std::size_t window = 110;
};

struct CoherenceReport {
  std::vector<double> per_topic;
  double mean = 0.0;
};

/// Simplified C_v: boolean sliding-window probabilities, NPMI context
/// vectors over each topic's top words, and the mean cosine between every
/// word vector and the topic's summed vector.
CoherenceReport cv_coherence(const LdaModel& model, const LabeledCorpus& corpus,
                             const CoherenceParams& params);

struct KCandidate {
  std::size_t k;
  CoherenceReport coherence;
};

struct KSelection {
  std::size_t best_k;
  std::vector<KCandidate> candidates;  // in the order given
  LdaModel best_model;
};

/// argmax over candidates of mean C_v; ties go to the smaller K.
KSelection select_k(const LabeledCorpus& corpus, const std::vector<std::size_t>& k_candidates,
                    const LdaParams& lda_params, const CoherenceParams& coherence_params);

/// Renormalizes non-negative weights onto the simplex. Returns an empty
/// vector when the total is zero.
std::vector<double> normalize_weights(std::span<const double> weights);

}  // namespace semloop
