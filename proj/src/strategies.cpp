#include "semloop/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "semloop/error.hpp"
#include "semloop/rng.hpp"

namespace semloop {

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::active_learning: return "al";
    case Strategy::caipi_d: return "caipi_d";
    case Strategy::caipi_dc: return "caipi_dc";
    case Strategy::semantic_push: return "semantic_push";
  }
  return "?";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "al") return Strategy::active_learning;
  if (name == "caipi_d") return Strategy::caipi_d;
  if (name == "caipi_dc") return Strategy::caipi_dc;
  if (name == "semantic_push") return Strategy::semantic_push;
  throw Error(ErrorCode::InvalidConfig, "unknown strategy '" + std::string(name) + "'");
}

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::caipi_masked: return "caipi_masked";
    case Provenance::caipi_constructive: return "caipi_constructive";
    case Provenance::semantic_completion: return "semantic_completion";
    case Provenance::semantic_correction_true: return "semantic_correction_true";
    case Provenance::semantic_correction_pred: return "semantic_correction_pred";
  }
  return "?";
}

const char* to_string(TopicCase c) {
  switch (c) {
    case TopicCase::keep: return "keep";
    case TopicCase::increase: return "increase";
    case TopicCase::decrease: return "decrease";
  }
  return "?";
}

const char* to_string(PushBranch b) {
  switch (b) {
    case PushBranch::none: return "none";
    case PushBranch::partially_wrong_reasons: return "partially_wrong_reasons";
    case PushBranch::false_prediction: return "false_prediction";
  }
  return "?";
}

nlohmann::json Counterexample::to_json(const Vocabulary& vocab) const {
  nlohmann::ordered_json j;
  j["label"] = label;
  j["provenance"] = semloop::to_string(provenance);
  std::vector<std::string> words;
  words.reserve(tokens.size());
  for (WordId w : tokens) words.push_back(vocab.term(w));
  j["tokens"] = std::move(words);
  if (!topics.empty()) j["topics"] = topics;
  return j;
}

void StrategyConfig::validate() const {
  if (M < 1) throw Error(ErrorCode::InvalidConfig, "M must be at least 1");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorCode::InvalidLambda, "lambda must lie in [0, 1]");
  if (counterexample_length < 1)
    throw Error(ErrorCode::InvalidConfig, "counterexample_length must be at least 1");
  if (lime_features < 1 || topiclime_features < 1)
    throw Error(ErrorCode::InvalidConfig, "explanation sizes must be at least 1");
  if (!(k_fraction > 0.0 && k_fraction <= 1.0))
    throw Error(ErrorCode::InvalidConfig, "k_fraction must lie in (0, 1]");
}

std::size_t select_query(const ProbabilisticClassifier& f, const std::vector<Document>& docs,
                         std::span<const std::size_t> pool) {
  if (pool.empty()) throw Error(ErrorCode::EmptyPool, "the unlabeled pool is empty");
  std::size_t best = pool.front();
  double best_u = -std::numeric_limits<double>::infinity();
  for (std::size_t id : pool) {
    const auto p = f.predict_proba(docs.at(id).bow);
    const double u = 1.0 - p[static_cast<std::size_t>(p.argmax())];
    if (u > best_u || (u == best_u && id < best)) {
      best = id;
      best_u = u;
    }
  }
  return best;
}

std::vector<Counterexample> caipi_destructive(const Document& x, ClassId y, ClassId predicted,
                                              std::span<const FeatureId> destructive,
                                              std::size_t M) {
  if (predicted != y || destructive.empty()) return {};
  auto masked = remove_features(x.tokens, destructive, FeatureKind::word, nullptr);
  if (masked.empty()) return {};
  return std::vector<Counterexample>(M, Counterexample{std::move(masked), y, Provenance::caipi_masked});
}

std::vector<Counterexample> caipi_constructive(ClassId y, ClassId predicted,
                                               std::span<const WordId> support, std::size_t M,
                                               std::size_t length, std::uint64_t seed) {
  if (predicted == y || support.empty()) return {};
  std::vector<Counterexample> out;
  out.reserve(M);
  for (std::size_t m = 0; m < M; ++m) {
    Rng rng(derive_seed(seed, {m}));
    Counterexample c{{}, y, Provenance::caipi_constructive};
    c.tokens.reserve(length);
    for (std::size_t i = 0; i < length; ++i) c.tokens.push_back(support[rng.below(support.size())]);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<Counterexample> caipi_constructive(const Document& x, ClassId y, ClassId predicted,
                                               const GoldStandard& gs, double k_fraction,
                                               std::size_t M, std::size_t length,
                                               std::uint64_t seed) {
  const auto local = local_gs(gs, x, y, k_fraction);
  return caipi_constructive(y, predicted, local.relevant_words, M, length, seed);
}

std::optional<double> knowledge_weight(std::span<const FeatureWeight> knowledge, FeatureId feature) {
  for (const auto& e : knowledge)
    if (e.feature == feature) return e.weight;
  return std::nullopt;
}

TopicCase topic_case(std::optional<double> explanation_weight, std::optional<double> knowledge) {
  const bool in_gs = knowledge.has_value();
  const bool gs_pos = in_gs && *knowledge > 0.0;
  if (explanation_weight) {
    if (!in_gs) return TopicCase::decrease;  // irrelevant topic was used
    if (*explanation_weight < 0.0 && gs_pos) return TopicCase::increase;
    return TopicCase::keep;
  }
  return gs_pos ? TopicCase::increase : TopicCase::keep;
}

namespace {

void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorCode::InvalidLambda, "lambda must lie in [0, 1]");
}

void check_topics(std::span<const double> theta, std::span<const FeatureWeight> knowledge,
                  const Explanation& explanation) {
  if (explanation.kind != FeatureKind::topic)
    throw Error(ErrorCode::KindMismatch, "mixture manipulation needs a topic explanation");
  auto in_range = [&](FeatureId t) { return t >= 0 && static_cast<std::size_t>(t) < theta.size(); };
  for (const auto& e : knowledge)
    if (!in_range(e.feature)) throw Error(ErrorCode::DimensionMismatch, "knowledge topic outside the mixture");
  for (const auto& e : explanation.features)
    if (!in_range(e.feature)) throw Error(ErrorCode::DimensionMismatch, "explanation topic outside the mixture");
}

}  // namespace

MixtureManipulation manipulate_mixture(std::span<const double> theta,
                                       std::span<const FeatureWeight> knowledge,
                                       const Explanation& explanation, double lambda) {
  check_lambda(lambda);
  check_topics(theta, knowledge, explanation);
  MixtureManipulation m;
  const std::size_t K = theta.size();
  m.cases.resize(K);
  m.pre_psi.resize(K);
  for (std::size_t t = 0; t < K; ++t) {
    const auto id = static_cast<FeatureId>(t);
    const auto gs = knowledge_weight(knowledge, id);
    m.cases[t] = topic_case(explanation.weight_of(id), gs);
    switch (m.cases[t]) {
      case TopicCase::keep: m.pre_psi[t] = theta[t]; break;
      case TopicCase::increase: m.pre_psi[t] = theta[t] + lambda * *gs + (1.0 - lambda) * theta[t]; break;
      case TopicCase::decrease: m.pre_psi[t] = 0.0; break;
    }
  }
  m.distribution = normalize_weights(m.pre_psi);
  if (m.distribution.empty()) {
    std::vector<double> positive(K, 0.0);
    for (const auto& e : knowledge)
      if (e.weight > 0.0) positive[static_cast<std::size_t>(e.feature)] = e.weight;
    m.distribution = normalize_weights(positive);
    if (m.distribution.empty())
      throw Error(ErrorCode::DegenerateMixture, "manipulated mixture and GS+ are both empty");
    m.fallback = true;
  }
  return m;
}

std::vector<double> completion_distribution(std::span<const double> theta,
                                            std::span<const FeatureWeight> knowledge,
                                            const Explanation& explanation, double lambda) {
  check_lambda(lambda);
  check_topics(theta, knowledge, explanation);
  const std::size_t K = theta.size();
  std::vector<double> c_add(K, 0.0), x_add(K, 0.0);
  bool any = false;
  for (const auto& e : knowledge) {
    if (e.weight <= 0.0) continue;
    const auto w = explanation.weight_of(e.feature);
    if (w && *w > 0.0) continue;
    const auto t = static_cast<std::size_t>(e.feature);
    c_add[t] = e.weight;
    x_add[t] = theta[t];
    any = true;
  }
  if (!any) return {};
  const auto p_gs = normalize_weights(c_add);
  const auto p_x = normalize_weights(x_add);
  std::vector<double> mix(K, 0.0);
  for (std::size_t t = 0; t < K; ++t)
    mix[t] = p_x.empty() ? p_gs[t] : lambda * p_gs[t] + (1.0 - lambda) * p_x[t];
  return mix;
}

std::vector<WordId> semantic_completion(std::span<const double> theta,
                                        std::span<const FeatureWeight> knowledge,
                                        const Explanation& explanation, double lambda,
                                        const LdaModel& lda, std::size_t n_tokens,
                                        std::uint64_t seed, std::vector<TopicId>* topics) {
  if (topics) topics->clear();
  const auto mix = completion_distribution(theta, knowledge, explanation, lambda);
  if (mix.empty() || n_tokens == 0) return {};
  return lda.sample_document(std::span<const double>(mix), n_tokens, seed, topics);
}

CorrectionSample semantic_correction(std::span<const double> theta,
                                     std::span<const FeatureWeight> knowledge,
                                     const Explanation& explanation, double lambda,
                                     const LdaModel& lda, std::size_t length, std::uint64_t seed) {
  if (length < 1) throw Error(ErrorCode::InvalidArgument, "counterexample length must be at least 1");
  CorrectionSample s;
  s.manipulation = manipulate_mixture(theta, knowledge, explanation, lambda);
  s.tokens = lda.sample_document(std::span<const double>(s.manipulation.distribution), length, seed,
                                 &s.topics);
  return s;
}

PushResult semantic_push(const PushInput& in, const LdaModel& lda, const StrategyConfig& cfg,
                         std::uint64_t seed) {
  cfg.validate();
  if (!in.x || !in.inference || !in.explanation_y)
    throw Error(ErrorCode::InvalidArgument, "semantic_push needs x, its inference and the true-class explanation");
  const auto theta = in.inference->mixture.values();
  PushResult r;
  for (const auto& f : in.explanation_y->features)
    if (!knowledge_weight(in.knowledge_y, f.feature)) r.destructive.push_back(f.feature);
  std::sort(r.destructive.begin(), r.destructive.end());

  if (in.predicted == in.y) {
    if (r.destructive.empty()) return r;
    r.branch = PushBranch::partially_wrong_reasons;
    const auto& z = in.inference->assignment.topics;
    std::vector<WordId> kept;
    std::vector<TopicId> kept_topics;
    for (std::size_t n = 0; n < in.x->tokens.size(); ++n) {
      if (std::binary_search(r.destructive.begin(), r.destructive.end(), z[n])) continue;
      kept.push_back(in.x->tokens[n]);
      kept_topics.push_back(z[n]);
    }
    const std::size_t removed = in.x->tokens.size() - kept.size();
    for (std::size_t m = 0; m < cfg.M; ++m) {
      Counterexample c{kept, in.y, Provenance::semantic_completion, kept_topics};
      std::vector<TopicId> added_topics;
      const auto completion = semantic_completion(theta, in.knowledge_y, *in.explanation_y, cfg.lambda,
                                                  lda, removed, derive_seed(seed, {0, m}), &added_topics);
      c.tokens.insert(c.tokens.end(), completion.begin(), completion.end());
      c.topics.insert(c.topics.end(), added_topics.begin(), added_topics.end());
      if (!c.tokens.empty()) r.counterexamples.push_back(std::move(c));
    }
    return r;
  }

  if (!in.explanation_predicted)
    throw Error(ErrorCode::InvalidArgument, "false prediction needs the predicted-class explanation");
  r.branch = PushBranch::false_prediction;
  const std::size_t m_true = (cfg.M + 1) / 2;
  const std::size_t m_pred = cfg.M / 2;
  auto emit = [&](std::span<const FeatureWeight> knowledge, const Explanation& expl, ClassId label,
                  Provenance prov, std::size_t count, std::uint64_t stream) {
    for (std::size_t m = 0; m < count; ++m) {
      auto s = semantic_correction(theta, knowledge, expl, cfg.lambda, lda, cfg.counterexample_length,
                                   derive_seed(seed, {stream, m}));
      r.fallback = r.fallback || s.manipulation.fallback;
      r.counterexamples.push_back({std::move(s.tokens), label, prov, std::move(s.topics)});
    }
  };
  emit(in.knowledge_y, *in.explanation_y, in.y, Provenance::semantic_correction_true, m_true, 1);
  emit(in.knowledge_predicted, *in.explanation_predicted, in.predicted,
       Provenance::semantic_correction_pred, m_pred, 2);
  return r;
}

}  // namespace semloop
