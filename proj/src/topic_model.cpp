#include "semloop/topic_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>

#include "semloop/error.hpp"
#include "semloop/rng.hpp"

namespace semloop {

namespace {

constexpr int kModelFormatVersion = 1;

}  // namespace

TopicMixture::TopicMixture(std::vector<double> theta, double tolerance) : theta_(std::move(theta)) {
  double total = 0.0;
  for (double v : theta_) {
    if (!(v >= 0.0)) throw Error(ErrorCode::InvalidMixture, "negative or NaN topic weight");
    total += v;
  }
  if (theta_.empty() || std::abs(total - 1.0) > tolerance)
    throw Error(ErrorCode::InvalidMixture, "topic mixture does not sum to one");
}

TopicMixture TopicMixture::uniform(std::size_t num_topics) {
  return TopicMixture(std::vector<double>(num_topics, 1.0 / static_cast<double>(num_topics)));
}

std::vector<TopicId> TopicAssignment::active_topics() const {
  std::vector<TopicId> out(topics.begin(), topics.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<double> normalize_weights(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) return {};
  std::vector<double> out(weights.begin(), weights.end());
  for (double& w : out) w /= total;
  return out;
}

LdaModel::LdaModel(std::size_t num_topics, double alpha, double beta, std::vector<double> phi,
                   std::uint64_t vocabulary_hash, std::uint64_t seed)
    : num_topics_(num_topics),
      vocab_size_(num_topics == 0 ? 0 : phi.size() / num_topics),
      alpha_(alpha),
      beta_(beta),
      phi_(std::move(phi)),
      vocab_hash_(vocabulary_hash),
      seed_(seed) {
  if (num_topics_ < 2) throw Error(ErrorCode::InvalidArgument, "LDA needs at least 2 topics");
  if (vocab_size_ == 0 || phi_.size() != num_topics_ * vocab_size_)
    throw Error(ErrorCode::DimensionMismatch, "phi is not K x |V|");
  cdf_.resize(phi_.size());
  for (std::size_t k = 0; k < num_topics_; ++k) {
    double acc = 0.0;
    for (std::size_t w = 0; w < vocab_size_; ++w) {
      acc += phi_[k * vocab_size_ + w];
      cdf_[k * vocab_size_ + w] = acc;
    }
  }
}

std::span<const double> LdaModel::topic_words(TopicId topic) const {
  return std::span<const double>(phi_).subspan(static_cast<std::size_t>(topic) * vocab_size_,
                                               vocab_size_);
}

std::vector<WordId> LdaModel::top_words(TopicId topic, std::size_t n) const {
  auto row = topic_words(topic);
  std::vector<WordId> ids(vocab_size_);
  std::iota(ids.begin(), ids.end(), 0);
  n = std::min(n, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n), ids.end(),
                    [&](WordId a, WordId b) {
                      if (row[static_cast<std::size_t>(a)] != row[static_cast<std::size_t>(b)])
                        return row[static_cast<std::size_t>(a)] > row[static_cast<std::size_t>(b)];
                      return a < b;
                    });
  ids.resize(n);
  return ids;
}

Inference LdaModel::infer(std::span<const WordId> tokens, const InferenceParams& params,
                          std::uint64_t seed) const {
  const std::size_t K = num_topics_;
  if (tokens.empty()) return {TopicMixture::uniform(K), {}};

  // Sampling runs over a canonical (word-sorted) order so that the result
  // does not depend on token order.
  std::vector<std::size_t> order(tokens.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return tokens[a] < tokens[b]; });

  Rng rng(seed);
  std::vector<int> doc_topic(K, 0);
  std::vector<TopicId> z(tokens.size());
  std::vector<double> p(K);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto w = static_cast<std::size_t>(tokens[order[i]]);
    if (w >= vocab_size_) throw Error(ErrorCode::DimensionMismatch, "token outside the model vocabulary");
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      p[k] = phi_[k * vocab_size_ + w];
      total += p[k];
    }
    z[i] = static_cast<TopicId>(rng.categorical(p, total));
    ++doc_topic[static_cast<std::size_t>(z[i])];
  }

  const std::size_t sweeps = params.burn_in + std::max<std::size_t>(params.samples, 1);
  const double n = static_cast<double>(tokens.size());
  std::vector<double> theta_sum(K, 0.0);
  std::size_t collected = 0;
  for (std::size_t s = 0; s < sweeps; ++s) {
    for (std::size_t i = 0; i < order.size(); ++i) {
      const auto w = static_cast<std::size_t>(tokens[order[i]]);
      --doc_topic[static_cast<std::size_t>(z[i])];
      double total = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        p[k] = (doc_topic[k] + alpha_) * phi_[k * vocab_size_ + w];
        total += p[k];
      }
      z[i] = static_cast<TopicId>(rng.categorical(p, total));
      ++doc_topic[static_cast<std::size_t>(z[i])];
    }
    if (s >= params.burn_in) {
      const double denom = n + static_cast<double>(K) * alpha_;
      for (std::size_t k = 0; k < K; ++k) theta_sum[k] += (doc_topic[k] + alpha_) / denom;
      ++collected;
    }
  }
  for (double& v : theta_sum) v /= static_cast<double>(collected);
  auto theta = normalize_weights(theta_sum);

  TopicAssignment assignment;
  assignment.topics.resize(tokens.size());
  for (std::size_t i = 0; i < order.size(); ++i) assignment.topics[order[i]] = z[i];
  return {TopicMixture(std::move(theta)), std::move(assignment)};
}

std::vector<WordId> LdaModel::sample_document(const TopicMixture& theta, std::size_t length,
                                              std::uint64_t seed) const {
  return sample_document(theta.values(), length, seed);
}

std::vector<WordId> LdaModel::sample_document(std::span<const double> theta, std::size_t length,
                                              std::uint64_t seed, std::vector<TopicId>* topics) const {
  if (theta.size() != num_topics_)
    throw Error(ErrorCode::InvalidMixture, "mixture length differs from K");
  double total = 0.0;
  for (double v : theta) {
    if (!(v >= 0.0)) throw Error(ErrorCode::InvalidMixture, "negative or NaN topic weight");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-6) throw Error(ErrorCode::InvalidMixture, "mixture off the simplex");

  Rng rng(seed);
  std::vector<WordId> out;
  out.reserve(length);
  if (topics) topics->clear();
  for (std::size_t i = 0; i < length; ++i) {
    const std::size_t topic = rng.categorical(theta, total);
    if (topics) topics->push_back(static_cast<TopicId>(topic));
    std::span<const double> row(cdf_.data() + topic * vocab_size_, vocab_size_);
    out.push_back(static_cast<WordId>(rng.from_cdf(row)));
  }
  return out;
}

nlohmann::json LdaModel::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "semloop.lda";
  j["version"] = kModelFormatVersion;
  j["num_topics"] = num_topics_;
  j["vocabulary_size"] = vocab_size_;
  j["alpha"] = alpha_;
  j["beta"] = beta_;
  j["vocabulary_hash"] = vocab_hash_;
  j["seed"] = seed_;
  j["phi"] = phi_;
  return j;
}

LdaModel LdaModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "semloop.lda" || j.at("version") != kModelFormatVersion)
      throw Error(ErrorCode::SchemaError, "not a version-1 LDA model file");
    return LdaModel(j.at("num_topics").get<std::size_t>(), j.at("alpha").get<double>(),
                    j.at("beta").get<double>(), j.at("phi").get<std::vector<double>>(),
                    j.at("vocabulary_hash").get<std::uint64_t>(), j.at("seed").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  }
}

void LdaModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << to_json().dump() << '\n';
}

LdaModel LdaModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  }
}

LdaModel fit_lda(const LabeledCorpus& corpus, const LdaParams& params, const SweepObserver& observer) {
  if (corpus.documents.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot fit LDA on no documents");
  if (params.num_topics < 2) throw Error(ErrorCode::InvalidArgument, "K must be at least 2");
  if (params.iterations < 1) throw Error(ErrorCode::InvalidArgument, "need at least one sweep");
  const std::size_t K = params.num_topics;
  const std::size_t V = corpus.vocab().size();
  if (V < K) throw Error(ErrorCode::DegenerateVocabulary, "vocabulary smaller than K");
  const double alpha = params.resolved_alpha();
  const double beta = params.beta;
  const double vbeta = static_cast<double>(V) * beta;

  Rng rng(params.seed);
  std::vector<int> word_topic(V * K, 0);
  std::vector<int> topic_totals(K, 0);
  std::vector<std::vector<TopicId>> z(corpus.size());
  std::vector<std::vector<int>> doc_topic(corpus.size(), std::vector<int>(K, 0));

  for (std::size_t d = 0; d < corpus.size(); ++d) {
    const auto& tokens = corpus.documents[d].tokens;
    z[d].resize(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const auto k = rng.below(K);
      z[d][i] = static_cast<TopicId>(k);
      ++word_topic[static_cast<std::size_t>(tokens[i]) * K + k];
      ++topic_totals[k];
      ++doc_topic[d][k];
    }
  }

  std::vector<double> p(K);
  for (std::size_t sweep = 0; sweep < params.iterations; ++sweep) {
    for (std::size_t d = 0; d < corpus.size(); ++d) {
      const auto& tokens = corpus.documents[d].tokens;
      auto& nd = doc_topic[d];
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        int* nw = &word_topic[static_cast<std::size_t>(tokens[i]) * K];
        auto k = static_cast<std::size_t>(z[d][i]);
        --nw[k];
        --topic_totals[k];
        --nd[k];
        double total = 0.0;
        for (std::size_t t = 0; t < K; ++t) {
          p[t] = (nd[t] + alpha) * (nw[t] + beta) / (topic_totals[t] + vbeta);
          total += p[t];
        }
        k = rng.categorical(p, total);
        z[d][i] = static_cast<TopicId>(k);
        ++nw[k];
        ++topic_totals[k];
        ++nd[k];
      }
    }
    if (observer) observer(GibbsCounts{sweep, K, word_topic, topic_totals});
  }

  std::vector<double> phi(K * V);
  for (std::size_t k = 0; k < K; ++k) {
    double row_total = 0.0;
    for (std::size_t w = 0; w < V; ++w) {
      const double v = (word_topic[w * K + k] + beta) / (topic_totals[k] + vbeta);
      phi[k * V + w] = v;
      row_total += v;
    }
    for (std::size_t w = 0; w < V; ++w) phi[k * V + w] /= row_total;
  }
  LdaModel model(K, alpha, beta, std::move(phi), corpus.vocab().hash(), params.seed);
  model.set_word_topic_counts(std::move(word_topic));
  return model;
}

Inference infer_mixture(const LdaModel& model, const Document& doc, const InferenceParams& params,
                        std::uint64_t seed) {
  return model.infer(doc.tokens, params, seed);
}

CoherenceReport cv_coherence(const LdaModel& model, const LabeledCorpus& corpus,
                             const CoherenceParams& params) {
  if (params.top_n < 2) throw Error(ErrorCode::InvalidArgument, "top_n must be at least 2");
  if (params.window < 1) throw Error(ErrorCode::InvalidArgument, "window must be at least 1");
  if (corpus.documents.empty()) throw Error(ErrorCode::EmptyCorpus, "coherence needs documents");

  const std::size_t K = model.num_topics();
  std::vector<std::vector<WordId>> tops(K);
  std::vector<int> slot(model.vocabulary_size(), -1);
  std::size_t R = 0;
  for (std::size_t k = 0; k < K; ++k) {
    tops[k] = model.top_words(static_cast<TopicId>(k), params.top_n);
    for (WordId w : tops[k]) {
      if (slot[static_cast<std::size_t>(w)] < 0) slot[static_cast<std::size_t>(w)] = static_cast<int>(R++);
    }
  }

  // Boolean sliding windows: a document shorter than the window is one window.
  std::vector<double> single(R, 0.0);
  std::vector<double> joint(R * R, 0.0);
  double windows = 0.0;
  std::vector<int> in_window(R, 0);
  std::vector<int> present;
  auto count_window = [&]() {
    windows += 1.0;
    present.clear();
    for (std::size_t r = 0; r < R; ++r)
      if (in_window[r] > 0) present.push_back(static_cast<int>(r));
    for (std::size_t a = 0; a < present.size(); ++a) {
      single[static_cast<std::size_t>(present[a])] += 1.0;
      for (std::size_t b = a + 1; b < present.size(); ++b) {
        joint[static_cast<std::size_t>(present[a]) * R + static_cast<std::size_t>(present[b])] += 1.0;
      }
    }
  };
  for (const auto& doc : corpus.documents) {
    const auto& toks = doc.tokens;
    if (toks.empty()) continue;
    std::fill(in_window.begin(), in_window.end(), 0);
    const std::size_t width = std::min(params.window, toks.size());
    for (std::size_t i = 0; i < width; ++i) {
      const int s = slot[static_cast<std::size_t>(toks[i])];
      if (s >= 0) ++in_window[static_cast<std::size_t>(s)];
    }
    count_window();
    for (std::size_t end = width; end < toks.size(); ++end) {
      const int out = slot[static_cast<std::size_t>(toks[end - width])];
      if (out >= 0) --in_window[static_cast<std::size_t>(out)];
      const int in = slot[static_cast<std::size_t>(toks[end])];
      if (in >= 0) ++in_window[static_cast<std::size_t>(in)];
      count_window();
    }
  }

  auto npmi = [&](std::size_t a, std::size_t b) -> double {
    const double pa = single[a] / windows;
    const double pb = single[b] / windows;
    if (pa <= 0.0 || pb <= 0.0) return 0.0;
    const double pab = (a == b ? single[a] : joint[std::min(a, b) * R + std::max(a, b)]) / windows;
    if (pab <= 0.0) return -1.0;
    if (pab >= 1.0) return 1.0;
    return std::log(pab / (pa * pb)) / -std::log(pab);
  };

  CoherenceReport report;
  report.per_topic.resize(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    const auto& words = tops[k];
    const std::size_t n = words.size();
    std::vector<std::vector<double>> vecs(n, std::vector<double>(n));
    std::vector<double> sum(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        vecs[i][j] = npmi(static_cast<std::size_t>(slot[static_cast<std::size_t>(words[i])]),
                          static_cast<std::size_t>(slot[static_cast<std::size_t>(words[j])]));
        sum[j] += vecs[i][j];
      }
    }
    double sum_norm = 0.0;
    for (double v : sum) sum_norm += v * v;
    sum_norm = std::sqrt(sum_norm);
    double score = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0, norm = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        dot += vecs[i][j] * sum[j];
        norm += vecs[i][j] * vecs[i][j];
      }
      norm = std::sqrt(norm);
      if (norm > 0.0 && sum_norm > 0.0) score += std::clamp(dot / (norm * sum_norm), -1.0, 1.0);
    }
    report.per_topic[k] = n > 0 ? score / static_cast<double>(n) : 0.0;
  }
  report.mean = std::accumulate(report.per_topic.begin(), report.per_topic.end(), 0.0) /
                static_cast<double>(K);
  return report;
}

KSelection select_k(const LabeledCorpus& corpus, const std::vector<std::size_t>& k_candidates,
                    const LdaParams& lda_params, const CoherenceParams& coherence_params) {
  if (k_candidates.empty()) throw Error(ErrorCode::InvalidArgument, "no K candidates");
  std::vector<KCandidate> reports;
  std::optional<LdaModel> best;
  std::size_t best_k = 0;
  double best_score = 0.0;
  for (std::size_t k : k_candidates) {
    LdaParams p = lda_params;
    p.num_topics = k;
    LdaModel model = fit_lda(corpus, p);
    auto report = cv_coherence(model, corpus, coherence_params);
    const double score = report.mean;
    if (!best || score > best_score || (score == best_score && k < best_k)) {
      best = std::move(model);
      best_k = k;
      best_score = score;
    }
    reports.push_back({k, std::move(report)});
  }
  return KSelection{best_k, std::move(reports), std::move(*best)};
}

}  // namespace semloop
