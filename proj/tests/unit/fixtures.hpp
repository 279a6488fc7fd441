#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "semloop/corpus.hpp"
#include "semloop/harness.hpp"
#include "semloop/session.hpp"
#include "semloop/learner.hpp"

namespace semloop::testing {

/// Two classes; P(1 | x) = base + sum of coefficients of the words present.
/// Linear in the presence indicators by construction.
class PresenceLinear final : public ProbabilisticClassifier {
 public:
  PresenceLinear(std::vector<double> coef, double base) : coef_(std::move(coef)), base_(base) {}

  std::size_t num_classes() const override { return 2; }
  std::size_t num_features() const override { return coef_.size(); }
  ClassDistribution predict_proba(const BagOfWords& x) const override {
    double p = base_;
    for (const auto& [w, c] : x) p += coef_[static_cast<std::size_t>(w)];
    p = std::clamp(p, 0.0, 1.0);
    return ClassDistribution({1.0 - p, p});
  }

 private:
  std::vector<double> coef_;
  double base_;
};

/// Two classes; P(1 | x) is high iff any word of `words` is present.
class WordSetIndicator final : public ProbabilisticClassifier {
 public:
  WordSetIndicator(std::set<WordId> words, std::size_t num_features)
      : words_(std::move(words)), num_features_(num_features) {}

  std::size_t num_classes() const override { return 2; }
  std::size_t num_features() const override { return num_features_; }
  ClassDistribution predict_proba(const BagOfWords& x) const override {
    const bool hit = std::any_of(x.begin(), x.end(), [&](const auto& e) { return words_.contains(e.first); });
    return ClassDistribution(hit ? std::vector<double>{0.1, 0.9} : std::vector<double>{0.9, 0.1});
  }

 private:
  std::set<WordId> words_;
  std::size_t num_features_;
};

/// Same distribution for every input.
class Constant final : public ProbabilisticClassifier {
 public:
  explicit Constant(std::vector<double> p, std::size_t num_features)
      : p_(std::move(p)), num_features_(num_features) {}
  std::size_t num_classes() const override { return p_.size(); }
  std::size_t num_features() const override { return num_features_; }
  ClassDistribution predict_proba(const BagOfWords&) const override { return ClassDistribution(p_); }

 private:
  std::vector<double> p_;
  std::size_t num_features_;
};

inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

/// Spearman rank correlation (Pearson on average ranks).
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

/// Random documents over `vocab` words with `distinct` distinct words each
/// (some repeated), plus matching linear coefficients in [-scale, scale].
struct LinearFixture {
  std::vector<double> coef;
  std::vector<Document> docs;
};

inline LinearFixture linear_fixture(std::size_t vocab, std::size_t num_docs, std::size_t distinct,
                                    double scale, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  LinearFixture fx;
  for (std::size_t w = 0; w < vocab; ++w) {
    double c = u(gen);
    if (std::abs(c) < 0.1 * scale) c = c < 0 ? -0.1 * scale : 0.1 * scale;
    fx.coef.push_back(c);
  }
  std::vector<WordId> ids(vocab);
  std::iota(ids.begin(), ids.end(), 0);
  for (std::size_t d = 0; d < num_docs; ++d) {
    std::shuffle(ids.begin(), ids.end(), gen);
    std::vector<WordId> tokens(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(distinct));
    tokens.push_back(tokens.front());
    fx.docs.push_back(make_document("lin" + std::to_string(d), tokens));
  }
  return fx;
}

/// Small synthetic experiment that runs in seconds.
inline ExperimentConfig small_config(std::uint64_t seed = 1) {
  ExperimentConfig cfg;
  cfg.dataset.max_documents = 240;
  cfg.split = {0.02, 0.78, 0.20};
  cfg.iterations = 8;
  cfg.num_topics = 12;
  cfg.lda.iterations = 60;
  cfg.inference = {20, 10};
  cfg.lime_samples = 150;
  cfg.topiclime_samples = 150;
  cfg.margin_every = 2;
  cfg.ea_every = 4;
  cfg.seed = seed;
  return cfg;
}

/// Rebuilds the parts of a pending query a client sees from its payload.
inline PendingQuery pending_from_payload(const nlohmann::json& j) {
  auto explanation = [](const nlohmann::json& e) {
    Explanation out;
    out.target_class = e.at("class").get<ClassId>();
    out.kind = parse_feature_kind(e.at("kind").get<std::string>());
    for (const auto& f : e.at("features")) out.features.push_back({f.at("feature").get<FeatureId>(), f.at("weight").get<double>()});
    return out;
  };
  PendingQuery q;
  q.iteration = j.at("iteration").get<std::size_t>();
  q.instance = j.at("instance").get<std::size_t>();
  q.predicted = j.at("predicted").get<ClassId>();
  q.proba = ClassDistribution(j.at("probabilities").get<std::vector<double>>());
  if (!j.at("lime").is_null()) q.lime = explanation(j.at("lime"));
  if (j.at("feature_kind") == "topic")
    for (const auto& e : j.at("explanations")) q.topic_explanations.push_back(explanation(e));
  return q;
}

/// Drives a session to the end, answering every query from the Gold
/// Standard the service publishes and the corpus label. Returns the
/// session's metric series as served.
inline nlohmann::json gold_standard_client(SessionManager& manager, const nlohmann::json& create_body,
                                           const PreparedExperiment& prepared) {
  const auto created = manager.create(create_body);
  const auto id = created.at("session_id").get<std::string>();
  const auto strategy = parse_strategy(created.at("strategy").get<std::string>());
  const auto kind = strategy == Strategy::semantic_push ? "topic" : "word";
  const auto gs = GoldStandard::from_json(manager.gold_standard(id, kind).at("gold_standard"));
  while (manager.state(id).at("phase") == "awaiting_correction") {
    const auto q = pending_from_payload(manager.query(id));
    const auto y = prepared.corpus.labels.at(q.instance);
    const auto req = gold_standard_request(gs, q, strategy, y, prepared.config.strategy.k_fraction);
    manager.correct(id, req.to_json());
  }
  return manager.metrics(id).at("series");
}

/// The same series from a headless run.
inline nlohmann::json headless_series(const PreparedExperiment& prepared, Strategy strategy) {
  const auto res = run_loop(prepared.loop_data(), prepared.loop_config(strategy));
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : res.series) out.push_back(s.to_json());
  return out;
}

}  // namespace semloop::testing
