#include "semloop/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "semloop/error.hpp"

namespace semloop {
namespace {

#include "stopwords.inc"

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

}  // namespace

const std::set<std::string>& english_stopwords() {
  static const std::set<std::string> words(std::begin(kStopwordsV1), std::end(kStopwordsV1));
  return words;
}

PreprocessConfig PreprocessConfig::english() {
  PreprocessConfig cfg;
  cfg.stopwords = english_stopwords();
  return cfg;
}

void PreprocessConfig::validate() const {
  if (min_token_length < 1)
    throw Error(ErrorCode::InvalidConfig, "min_token_length must be >= 1");
  if (min_document_frequency < 1)
    throw Error(ErrorCode::InvalidConfig, "min_document_frequency must be >= 1");
}

std::vector<std::string> preprocess(std::string_view raw, const PreprocessConfig& cfg) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < raw.size()) {
    while (i < raw.size() && !is_word_char(raw[i])) ++i;
    const std::size_t start = i;
    while (i < raw.size() && is_word_char(raw[i])) ++i;
    if (start == i) continue;
    std::string token(raw.substr(start, i - start));
    if (cfg.lowercase) {
      for (auto& c : token) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    if (cfg.stopwords.contains(token)) continue;
    if (cfg.stemmer == Stemmer::porter) token = porter_stem(token);
    if (token.size() < cfg.min_token_length) continue;
    out.push_back(std::move(token));
  }
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> terms) {
  for (auto& t : terms) add(t);
}

WordId Vocabulary::add(const std::string& term) {
  if (auto it = index_.find(term); it != index_.end()) return it->second;
  const auto id = static_cast<WordId>(terms_.size());
  terms_.push_back(term);
  index_.emplace(term, id);
  return id;
}

std::optional<WordId> Vocabulary::find(std::string_view term) const {
  auto it = index_.find(std::string(term));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ULL;
  };
  for (const auto& t : terms_) {
    for (char c : t) mix(static_cast<unsigned char>(c));
    mix(0);
  }
  return h;
}

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& docs,
                            const PreprocessConfig& cfg) {
  cfg.validate();
  if (docs.empty()) throw Error(ErrorCode::EmptyCorpus, "no documents to build a vocabulary from");
  // First-occurrence order, filtered by document frequency.
  std::vector<std::string> order;
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& doc : docs) {
    std::set<std::string_view> seen;
    for (const auto& tok : doc) {
      if (!seen.insert(tok).second) continue;
      auto [it, inserted] = df.try_emplace(tok, 0);
      if (inserted) order.push_back(tok);
      ++it->second;
    }
  }
  Vocabulary vocab;
  for (const auto& term : order) {
    if (df[term] >= cfg.min_document_frequency) vocab.add(term);
  }
  if (vocab.size() == 0)
    throw Error(ErrorCode::EmptyVocabulary, "no term reaches the minimum document frequency");
  return vocab;
}

BagOfWords to_bow(std::span<const WordId> tokens) {
  std::vector<WordId> sorted(tokens.begin(), tokens.end());
  std::sort(sorted.begin(), sorted.end());
  BagOfWords bow;
  for (WordId w : sorted) {
    if (!bow.empty() && bow.back().first == w) {
      ++bow.back().second;
    } else {
      bow.emplace_back(w, 1);
    }
  }
  return bow;
}

Document make_document(std::string id, std::string raw,
                       const std::vector<std::string>& tokens,
                       const Vocabulary& vocab) {
  Document doc;
  doc.id = std::move(id);
  doc.raw = std::move(raw);
  for (const auto& t : tokens) {
    if (auto w = vocab.find(t)) doc.tokens.push_back(*w);
  }
  doc.bow = to_bow(doc.tokens);
  return doc;
}

Document make_document(std::string id, std::vector<WordId> tokens) {
  Document doc;
  doc.id = std::move(id);
  doc.tokens = std::move(tokens);
  doc.bow = to_bow(doc.tokens);
  return doc;
}

double LabeledCorpus::mean_document_length() const {
  if (documents.empty()) return 0.0;
  double total = 0.0;
  for (const auto& d : documents) total += static_cast<double>(d.tokens.size());
  return total / static_cast<double>(documents.size());
}

void LabeledCorpus::validate() const {
  if (classes.empty()) throw Error(ErrorCode::InvalidArgument, "corpus has no classes");
  if (documents.size() != labels.size())
    throw Error(ErrorCode::LengthMismatch, "documents and labels differ in length");
  for (ClassId y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes.size())
      throw Error(ErrorCode::InvalidArgument, "label outside the class set");
  }
}

std::string LabeledCorpus::to_jsonl() const {
  std::string out;
  for (std::size_t i = 0; i < documents.size(); ++i) {
    nlohmann::json tokens = nlohmann::json::array();
    for (WordId w : documents[i].tokens) tokens.push_back(vocab().term(w));
    nlohmann::ordered_json line;
    line["id"] = documents[i].id;
    line["label"] = classes[static_cast<std::size_t>(labels[i])];
    line["tokens"] = std::move(tokens);
    out += line.dump();
    out += '\n';
  }
  return out;
}

LabeledCorpus LabeledCorpus::subset(std::span<const std::size_t> indices) const {
  LabeledCorpus out;
  out.vocabulary = vocabulary;
  out.classes = classes;
  out.documents.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    out.documents.push_back(documents.at(i));
    out.labels.push_back(labels.at(i));
  }
  return out;
}

DatasetFormat parse_dataset_format(std::string_view name) {
  if (name == "ag_news_csv") return DatasetFormat::ag_news_csv;
  if (name == "reuters_labeled_text") return DatasetFormat::reuters_labeled_text;
  throw Error(ErrorCode::UnknownFormat, "unknown dataset format '" + std::string(name) + "'");
}

const char* to_string(DatasetFormat format) {
  switch (format) {
    case DatasetFormat::ag_news_csv: return "ag_news_csv";
    case DatasetFormat::reuters_labeled_text: return "reuters_labeled_text";
  }
  return "unknown";
}

const std::vector<std::string>& ag_news_classes() {
  static const std::vector<std::string> names{"World", "Sports", "Business", "Sci/Tech"};
  return names;
}

std::vector<RawRecord> read_ag_news_csv(std::istream& in) {
  // RFC 4180 quoting; fields may span lines inside quotes.
  std::vector<RawRecord> records;
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  std::size_t line = 1;
  std::size_t record_line = 1;

  auto finish_record = [&]() {
    fields.push_back(std::move(field));
    field.clear();
    const bool blank = fields.size() == 1 && fields[0].empty() && !field_was_quoted;
    if (!blank) {
      if (fields.size() != 3)
        throw Error(ErrorCode::ParseError, "line " + std::to_string(record_line) +
                                               ": expected 3 columns, got " +
                                               std::to_string(fields.size()));
      const std::string& cls = fields[0];
      if (cls.size() != 1 || cls[0] < '1' || cls[0] > '4')
        throw Error(ErrorCode::ParseError, "line " + std::to_string(record_line) +
                                               ": class index must be 1..4, got '" + cls + "'");
      RawRecord rec;
      rec.id = std::to_string(records.size());
      rec.label = ag_news_classes()[static_cast<std::size_t>(cls[0] - '1')];
      rec.text = fields[1] + " " + fields[2];
      records.push_back(std::move(rec));
    }
    fields.clear();
    field_was_quoted = false;
  };

  char c;
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty())
          throw Error(ErrorCode::ParseError,
                      "line " + std::to_string(line) + ": stray quote inside unquoted field");
        in_quotes = true;
        field_was_quoted = true;
        break;
      case ',':
        fields.push_back(std::move(field));
        field.clear();
        break;
      case '\r':
        break;
      case '\n':
        finish_record();
        ++line;
        record_line = line;
        break;
      default:
        field += c;
    }
  }
  if (in_quotes)
    throw Error(ErrorCode::ParseError, "line " + std::to_string(record_line) + ": unterminated quote");
  if (!field.empty() || !fields.empty() || field_was_quoted) finish_record();
  return records;
}

std::vector<RawRecord> read_reuters_labeled_text(std::istream& in) {
  std::vector<RawRecord> records;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty()) continue;
    const auto tab = text.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": missing label prefix");
    RawRecord rec;
    rec.id = std::to_string(line - 1);
    rec.label = text.substr(0, tab);
    rec.text = text.substr(tab + 1);
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<std::string> most_frequent_labels(const std::vector<RawRecord>& records,
                                              std::size_t count) {
  std::map<std::string, std::size_t> freq;
  for (const auto& r : records) ++freq[r.label];
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && i < count; ++i) out.push_back(ranked[i].first);
  return out;
}

LabeledCorpus build_corpus(const std::vector<RawRecord>& records,
                           const std::vector<std::string>& classes,
                           const PreprocessConfig& cfg) {
  cfg.validate();
  std::unordered_map<std::string, ClassId> class_index;
  for (std::size_t i = 0; i < classes.size(); ++i)
    class_index.emplace(classes[i], static_cast<ClassId>(i));

  std::vector<const RawRecord*> kept;
  std::vector<std::vector<std::string>> token_lists;
  for (const auto& r : records) {
    if (!class_index.contains(r.label)) continue;
    kept.push_back(&r);
    token_lists.push_back(preprocess(r.text, cfg));
  }
  if (kept.empty()) throw Error(ErrorCode::EmptyCorpus, "no records with a known class");

  auto vocab = std::make_shared<Vocabulary>(build_vocabulary(token_lists, cfg));
  LabeledCorpus corpus;
  corpus.classes = classes;
  corpus.documents.reserve(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    corpus.documents.push_back(make_document(kept[i]->id, kept[i]->text, token_lists[i], *vocab));
    corpus.labels.push_back(class_index.at(kept[i]->label));
  }
  corpus.vocabulary = std::move(vocab);
  corpus.validate();
  return corpus;
}

LabeledCorpus load_dataset(const std::filesystem::path& path, DatasetFormat format,
                           const PreprocessConfig& cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  switch (format) {
    case DatasetFormat::ag_news_csv:
      return build_corpus(read_ag_news_csv(in), ag_news_classes(), cfg);
    case DatasetFormat::reuters_labeled_text: {
      auto records = read_reuters_labeled_text(in);
      return build_corpus(records, most_frequent_labels(records, 10), cfg);
    }
  }
  throw Error(ErrorCode::UnknownFormat, "unsupported dataset format");
}

}  // namespace semloop
