#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace semloop {

using WordId = std::int32_t;
using ClassId = std::int32_t;

enum class Stemmer { none, porter };

struct PreprocessConfig {
  bool lowercase = true;
  std::set<std::string> stopwords;
  Stemmer stemmer = Stemmer::porter;
  std::size_t min_token_length = 2;
  std::size_t min_document_frequency = 2;

  /// Lower-casing, the bundled English stopword list, Porter stemming.
  static PreprocessConfig english();

  void validate() const;
};

/// The bundled 127-entry English stopword list (data/stopwords_en_v1.txt).
const std::set<std::string>& english_stopwords();

/// Porter (1980) suffix-stripping stemmer over lower-case ASCII words.
std::string porter_stem(std::string_view word);

std::vector<std::string> preprocess(std::string_view raw,
                                    const PreprocessConfig& cfg);

/// Insertion-ordered bijection between terms and dense ids.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> terms);

  WordId add(const std::string& term);
  std::optional<WordId> find(std::string_view term) const;
  const std::string& term(WordId id) const { return terms_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return terms_.size(); }
  const std::vector<std::string>& terms() const { return terms_; }

  /// FNV-1a over the ordered term list; identifies the vocabulary in
  /// serialized models.
  std::uint64_t hash() const;

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, WordId> index_;
};

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& docs,
                            const PreprocessConfig& cfg);

/// Sparse term counts sorted by word id.
using BagOfWords = std::vector<std::pair<WordId, int>>;

BagOfWords to_bow(std::span<const WordId> tokens);

struct Document {
  std::string id;
  std::string raw;
  std::vector<WordId> tokens;
  BagOfWords bow;

  bool empty() const { return tokens.empty(); }
};

/// Builds a document over `vocab`; out-of-vocabulary tokens are dropped.
Document make_document(std::string id, std::string raw,
                       const std::vector<std::string>& tokens,
                       const Vocabulary& vocab);

/// Same, from already-mapped ids.
Document make_document(std::string id, std::vector<WordId> tokens);

struct LabeledCorpus {
  std::shared_ptr<const Vocabulary> vocabulary;
  std::vector<Document> documents;
  std::vector<ClassId> labels;
  std::vector<std::string> classes;

  std::size_t size() const { return documents.size(); }
  std::size_t num_classes() const { return classes.size(); }
  const Vocabulary& vocab() const { return *vocabulary; }

  double mean_document_length() const;
  void validate() const;

  /// JSON lines {id, label, tokens}, one document per line.
  std::string to_jsonl() const;

  /// Sub-corpus over `indices`, sharing the vocabulary and class set.
  LabeledCorpus subset(std::span<const std::size_t> indices) const;
};

enum class DatasetFormat { ag_news_csv, reuters_labeled_text };

DatasetFormat parse_dataset_format(std::string_view name);
const char* to_string(DatasetFormat format);

/// Raw labeled records before preprocessing.
struct RawRecord {
  std::string id;
  std::string text;
  std::string label;
};

std::vector<RawRecord> read_ag_news_csv(std::istream& in);
std::vector<RawRecord> read_reuters_labeled_text(std::istream& in);

/// Preprocesses records, builds the vocabulary and maps labels onto
/// `classes` (records whose label is not in `classes` are dropped).
LabeledCorpus build_corpus(const std::vector<RawRecord>& records,
                           const std::vector<std::string>& classes,
                           const PreprocessConfig& cfg);

/// AG News: the four class names in label-index order.
const std::vector<std::string>& ag_news_classes();

/// Keeps the `count` most frequent labels (ties by name), most frequent first.
std::vector<std::string> most_frequent_labels(const std::vector<RawRecord>& records,
                                              std::size_t count);

LabeledCorpus load_dataset(const std::filesystem::path& path, DatasetFormat format,
                           const PreprocessConfig& cfg);

}  // namespace semloop
