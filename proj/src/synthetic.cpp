#include "semloop/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string_view>

#include "semloop/error.hpp"
#include "semloop/rng.hpp"

namespace semloop {

namespace {

constexpr std::string_view kOnsets = "bdfgklmnprtvz";
constexpr std::string_view kVowels = "aiou";
constexpr std::string_view kCodas = "kpbgm";

std::string syllable(std::size_t i) {
  std::string s;
  s += kOnsets[i % kOnsets.size()];
  s += kVowels[(i / kOnsets.size()) % kVowels.size()];
  return s;
}

// Dirichlet(1) draw via normalized exponentials.
std::vector<double> flat_dirichlet(Rng& rng, std::size_t n) {
  std::vector<double> out(n);
  double total = 0.0;
  for (auto& v : out) {
    v = -std::log(1.0 - rng.uniform());
    total += v;
  }
  for (auto& v : out) v /= total;
  return out;
}

// `count` distinct indices below n, in draw order.
std::vector<std::size_t> pick_distinct(Rng& rng, std::size_t n, std::size_t count) {
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  count = std::min(count, n);
  for (std::size_t i = 0; i < count; ++i) std::swap(pool[i], pool[i + rng.below(n - i)]);
  pool.resize(count);
  return pool;
}

std::vector<std::string> ids_to_terms(const std::vector<std::size_t>& ids) {
  std::vector<std::string> out;
  for (auto i : ids) out.push_back(pseudo_word(i));
  return out;
}

LabeledCorpus assemble(std::vector<std::vector<std::string>> docs, std::vector<ClassId> labels,
                       std::size_t num_classes) {
  PreprocessConfig cfg;
  cfg.stemmer = Stemmer::none;
  cfg.min_document_frequency = 1;
  auto vocab = std::make_shared<Vocabulary>(build_vocabulary(docs, cfg));
  LabeledCorpus corpus;
  for (std::size_t c = 0; c < num_classes; ++c) corpus.classes.push_back("c" + std::to_string(c));
  for (std::size_t i = 0; i < docs.size(); ++i) {
    std::string raw;
    for (const auto& t : docs[i]) raw += (raw.empty() ? "" : " ") + t;
    corpus.documents.push_back(make_document("d" + std::to_string(i), raw, docs[i], *vocab));
  }
  corpus.labels = std::move(labels);
  corpus.vocabulary = std::move(vocab);
  corpus.validate();
  return corpus;
}

}  // namespace

std::string pseudo_word(std::size_t index) {
  const std::size_t syllables = kOnsets.size() * kVowels.size();
  std::string w = syllable(index % syllables);
  index /= syllables;
  w += syllable(index % syllables);
  index /= syllables;
  w += kCodas[index % kCodas.size()];
  index /= kCodas.size();
  // Longer words once the three-part space is used up.
  while (index > 0) {
    w = syllable(index % syllables) + w;
    index /= syllables;
  }
  return w;
}

std::vector<RawRecord> synthetic_news(const SyntheticNewsConfig& cfg) {
  const auto& classes = ag_news_classes();
  const std::size_t C = classes.size();
  const std::size_t class_topics = C * cfg.topics_per_class;
  const std::size_t K = class_topics + cfg.background_topics;
  if (cfg.topics_per_class < 1 || cfg.background_topics < 1 || cfg.words_per_topic < 1 ||
      cfg.class_topics_per_document < 1 || cfg.background_topics_per_document < 1 ||
      cfg.min_length < 1 || cfg.max_length < cfg.min_length)
    throw Error(ErrorCode::InvalidConfig, "invalid synthetic corpus shape");
  if (cfg.class_mass <= 0.0 || cfg.cross_class_mass < 0.0 || cfg.class_mass + cfg.cross_class_mass > 1.0)
    throw Error(ErrorCode::InvalidConfig, "class and cross-class mass must fit in one");

  // Zipf cdf shared by every topic over its own block of words.
  std::vector<double> cdf(cfg.words_per_topic);
  double acc = 0.0;
  for (std::size_t r = 0; r < cfg.words_per_topic; ++r) {
    acc += 1.0 / std::pow(static_cast<double>(r + 1), cfg.zipf_exponent);
    cdf[r] = acc;
  }
  // Scramble ranks so that topic blocks do not share a rank-to-word layout.
  std::vector<std::size_t> word_of(K * cfg.words_per_topic);
  Rng layout(derive_seed(cfg.seed, {1}));
  for (std::size_t i = 0; i < word_of.size(); ++i) word_of[i] = i;
  for (std::size_t i = word_of.size(); i > 1; --i) std::swap(word_of[i - 1], word_of[layout.below(i)]);

  std::vector<RawRecord> out;
  out.reserve(cfg.documents);
  for (std::size_t d = 0; d < cfg.documents; ++d) {
    Rng rng(derive_seed(cfg.seed, {2, d}));
    const std::size_t c = d % C;
    std::vector<double> theta(K, 0.0);
    const auto own_topics = pick_distinct(rng, cfg.topics_per_class, 1 + rng.below(cfg.class_topics_per_document));
    const auto own = flat_dirichlet(rng, own_topics.size());
    for (std::size_t j = 0; j < own_topics.size(); ++j)
      theta[c * cfg.topics_per_class + own_topics[j]] = cfg.class_mass * own[j];
    double rest = 1.0 - cfg.class_mass;
    if (rng.uniform() < cfg.cross_class_rate) {
      const std::size_t other = (c + 1 + rng.below(C - 1)) % C;
      theta[other * cfg.topics_per_class + rng.below(cfg.topics_per_class)] += cfg.cross_class_mass;
      rest -= cfg.cross_class_mass;
    }
    const auto bg_topics = pick_distinct(rng, cfg.background_topics, cfg.background_topics_per_document);
    const auto bg = flat_dirichlet(rng, bg_topics.size());
    for (std::size_t j = 0; j < bg_topics.size(); ++j) theta[class_topics + bg_topics[j]] += rest * bg[j];
    std::vector<double> theta_cdf(K);
    double t_acc = 0.0;
    for (std::size_t t = 0; t < K; ++t) theta_cdf[t] = (t_acc += theta[t]);

    const std::size_t length = cfg.min_length + rng.below(cfg.max_length - cfg.min_length + 1);
    std::string title, body;
    for (std::size_t n = 0; n < length; ++n) {
      const std::size_t t = rng.from_cdf(theta_cdf);
      const std::size_t r = rng.from_cdf(cdf);
      const std::string w = pseudo_word(word_of[t * cfg.words_per_topic + r]);
      std::string& part = n < 5 ? title : body;
      part += (part.empty() ? "" : " ") + w;
    }
    out.push_back(RawRecord{"syn" + std::to_string(d), title + " " + body, classes[c]});
  }
  return out;
}

void write_ag_news_csv(std::ostream& out, const std::vector<RawRecord>& records) {
  const auto& classes = ag_news_classes();
  auto quote = [](std::string_view s) {
    std::string q = "\"";
    for (char ch : s) {
      if (ch == '"') q += '"';
      q += ch;
    }
    return q + "\"";
  };
  for (const auto& r : records) {
    std::size_t index = 0;
    while (index < classes.size() && classes[index] != r.label) ++index;
    if (index == classes.size()) throw Error(ErrorCode::InvalidArgument, "label is not an AG News class");
    // Title is the first five words, description the rest.
    std::size_t pos = 0;
    for (int i = 0; i < 5 && pos != std::string::npos; ++i) pos = r.text.find(' ', pos + 1);
    const std::string title = pos == std::string::npos ? r.text : r.text.substr(0, pos);
    const std::string description = pos == std::string::npos ? "" : r.text.substr(pos + 1);
    out << quote(std::to_string(index + 1)) << ',' << quote(title) << ',' << quote(description) << '\n';
  }
}

LabeledCorpus marker_corpus(std::size_t num_classes, std::size_t docs_per_class,
                            std::size_t length, std::size_t filler_words, std::uint64_t seed) {
  if (num_classes < 2 || length < 2 || filler_words < 1)
    throw Error(ErrorCode::InvalidArgument, "marker corpus needs 2 classes, 2 tokens and filler words");
  std::vector<std::vector<std::string>> docs;
  std::vector<ClassId> labels;
  Rng rng(seed);
  for (std::size_t i = 0; i < docs_per_class; ++i) {
    for (std::size_t c = 0; c < num_classes; ++c) {
      std::vector<std::size_t> ids;
      for (std::size_t n = 0; n + 1 < length; ++n) ids.push_back(num_classes + rng.below(filler_words));
      auto terms = ids_to_terms(ids);
      terms.insert(terms.begin() + static_cast<std::ptrdiff_t>(rng.below(terms.size() + 1)),
                   "m" + std::to_string(c));
      docs.push_back(std::move(terms));
      labels.push_back(static_cast<ClassId>(c));
    }
  }
  return assemble(std::move(docs), std::move(labels), num_classes);
}

LabeledCorpus topic_corpus(std::size_t num_topics, std::size_t words_per_topic,
                           std::size_t docs_per_class, std::size_t length, double purity,
                           std::uint64_t seed) {
  if (num_topics < 2 || words_per_topic < 1 || length < 1 || purity < 0.0 || purity > 1.0)
    throw Error(ErrorCode::InvalidArgument, "invalid topic corpus shape");
  std::vector<std::vector<std::string>> docs;
  std::vector<ClassId> labels;
  Rng rng(seed);
  for (std::size_t i = 0; i < docs_per_class; ++i) {
    for (std::size_t c = 0; c < num_topics; ++c) {
      std::vector<std::size_t> ids;
      for (std::size_t n = 0; n < length; ++n) {
        std::size_t t = c;
        if (rng.uniform() >= purity) t = (c + 1 + rng.below(num_topics - 1)) % num_topics;
        ids.push_back(t * words_per_topic + rng.below(words_per_topic));
      }
      docs.push_back(ids_to_terms(ids));
      labels.push_back(static_cast<ClassId>(c));
    }
  }
  return assemble(std::move(docs), std::move(labels), num_topics);
}

}  // namespace semloop
