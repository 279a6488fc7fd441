#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "semloop/corpus.hpp"

namespace semloop {

/// Deterministic pronounceable token, distinct per index, left unchanged by
/// lower-casing, the stopword filter and the Porter stemmer.
std::string pseudo_word(std::size_t index);

/// Four-class news-like corpus from an LDA-style generator: each class owns
/// a few topics, background topics are shared, and a share of documents
/// borrow a topic from another class. A document draws on only a few of
/// the topics available to it.
struct SyntheticNewsConfig {
  std::size_t documents = 2000;
  std::size_t topics_per_class = 3;
  std::size_t background_topics = 4;
  std::size_t words_per_topic = 50;
  std::size_t class_topics_per_document = 2;       // at most; at least one
  std::size_t background_topics_per_document = 1;
  std::size_t min_length = 15;
  std::size_t max_length = 35;
  double class_mass = 0.55;        // expected share of class-topic tokens
  double cross_class_rate = 0.35;  // documents mixing in another class's topic
  double cross_class_mass = 0.25;
  double zipf_exponent = 1.0;
  std::uint64_t seed = 7;
};

/// Records labeled with the AG News class names.
std::vector<RawRecord> synthetic_news(const SyntheticNewsConfig& cfg);

/// AG News CSV: "class index","title","description".
void write_ag_news_csv(std::ostream& out, const std::vector<RawRecord>& records);

/// Class c documents contain the marker word "m<c>" once among filler words
/// shared by all classes.
LabeledCorpus marker_corpus(std::size_t num_classes, std::size_t docs_per_class,
                            std::size_t length, std::size_t filler_words, std::uint64_t seed);

/// Topic t owns words_per_topic words; class c documents draw a `purity`
/// share of their tokens from topic c and the rest uniformly from the others.
LabeledCorpus topic_corpus(std::size_t num_topics, std::size_t words_per_topic,
                           std::size_t docs_per_class, std::size_t length, double purity,
                           std::uint64_t seed);

}  // namespace semloop
