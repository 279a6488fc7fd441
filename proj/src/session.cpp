#include "semloop/session.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "semloop/error.hpp"

namespace semloop {

namespace {

using ojson = nlohmann::json;

double sign_of(double w) { return w >= 0.0 ? 1.0 : -1.0; }

}  // namespace

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::relevant_used_correctly: return "relevant_used_correctly";
    case Verdict::irrelevant: return "irrelevant";
    case Verdict::relevant_wrong_polarity: return "relevant_wrong_polarity";
    case Verdict::missing_concept: return "missing_concept";
  }
  return "?";
}

Verdict parse_verdict(std::string_view name) {
  if (name == "relevant_used_correctly") return Verdict::relevant_used_correctly;
  if (name == "irrelevant") return Verdict::irrelevant;
  if (name == "relevant_wrong_polarity") return Verdict::relevant_wrong_polarity;
  if (name == "missing_concept") return Verdict::missing_concept;
  throw Error(ErrorCode::SchemaError, "unknown verdict '" + std::string(name) + "'");
}

const char* to_string(Phase p) {
  switch (p) {
    case Phase::awaiting_correction: return "awaiting_correction";
    case Phase::retraining: return "retraining";
    case Phase::finished: return "finished";
  }
  return "?";
}

nlohmann::json CorrectionRequest::to_json() const {
  ojson j;
  j["true_label"] = true_label;
  nlohmann::json vs = nlohmann::json::array();
  for (const auto& v : verdicts) {
    ojson e;
    e["class"] = v.cls;
    e["feature"] = v.feature;
    e["verdict"] = to_string(v.verdict);
    if (v.weight) e["weight"] = *v.weight;
    vs.push_back(std::move(e));
  }
  j["verdicts"] = std::move(vs);
  return j;
}

CorrectionRequest CorrectionRequest::from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw Error(ErrorCode::SchemaError, "correction must be a JSON object");
    CorrectionRequest r;
    if (!j.contains("true_label") || !j.at("true_label").is_number_integer())
      throw Error(ErrorCode::SchemaError, "true_label must be an integer class index");
    r.true_label = j.at("true_label").get<ClassId>();
    if (j.contains("verdicts")) {
      if (!j.at("verdicts").is_array()) throw Error(ErrorCode::SchemaError, "verdicts must be an array");
      for (const auto& e : j.at("verdicts")) {
        if (!e.is_object() || !e.contains("feature") || !e.at("feature").is_number_integer() ||
            !e.contains("class") || !e.at("class").is_number_integer() || !e.contains("verdict") ||
            !e.at("verdict").is_string())
          throw Error(ErrorCode::SchemaError, "each verdict needs integer class and feature and a verdict name");
        FeatureVerdict v;
        v.cls = e.at("class").get<ClassId>();
        v.feature = e.at("feature").get<FeatureId>();
        v.verdict = parse_verdict(e.at("verdict").get<std::string>());
        if (e.contains("weight") && !e.at("weight").is_null()) {
          if (!e.at("weight").is_number()) throw Error(ErrorCode::SchemaError, "weight must be a number");
          v.weight = e.at("weight").get<double>();
          if (!std::isfinite(*v.weight)) throw Error(ErrorCode::SchemaError, "weight must be finite");
        }
        r.verdicts.push_back(v);
      }
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  }
}

FeatureKind strategy_kind(Strategy s) {
  return s == Strategy::semantic_push ? FeatureKind::topic : FeatureKind::word;
}

const Explanation* served_explanation(const PendingQuery& q, Strategy s, ClassId c) {
  if (s == Strategy::semantic_push) {
    if (c < 0 || static_cast<std::size_t>(c) >= q.topic_explanations.size()) return nullptr;
    return &q.topic_explanations[static_cast<std::size_t>(c)];
  }
  if ((s == Strategy::caipi_d || s == Strategy::caipi_dc) && q.lime && c == q.predicted) return &*q.lime;
  return nullptr;
}

CorrectionFeedback translate_request(const CorrectionRequest& req, const PendingQuery& q,
                                     Strategy s, std::size_t num_classes, std::size_t num_features) {
  if (req.true_label < 0 || static_cast<std::size_t>(req.true_label) >= num_classes)
    throw Error(ErrorCode::SchemaError, "true_label outside the class set");
  CorrectionFeedback fb;
  fb.true_label = req.true_label;
  fb.kind = strategy_kind(s);
  fb.source = FeedbackSource::human;
  std::set<std::pair<ClassId, FeatureId>> seen;
  for (const auto& v : req.verdicts) {
    if (v.cls < 0 || static_cast<std::size_t>(v.cls) >= num_classes)
      throw Error(ErrorCode::SchemaError, "verdict class outside the class set");
    if (!seen.emplace(v.cls, v.feature).second)
      throw Error(ErrorCode::SchemaError, "duplicate verdict for feature " + std::to_string(v.feature));
    auto& knowledge = fb.relevance[v.cls];
    if (v.verdict == Verdict::missing_concept) {
      if (v.feature < 0 || static_cast<std::size_t>(v.feature) >= num_features)
        throw Error(ErrorCode::SchemaError, "missing concept references an unknown feature");
      const double w = v.weight ? std::abs(*v.weight) : 1.0;
      if (w > 0.0) knowledge.push_back({v.feature, w});
      continue;
    }
    const Explanation* served = served_explanation(q, s, v.cls);
    const auto explained = served ? served->weight_of(v.feature) : std::nullopt;
    if (!explained)
      throw Error(ErrorCode::SchemaError, "verdict references feature " + std::to_string(v.feature) +
                                              " that was not served for class " + std::to_string(v.cls));
    const double magnitude = v.weight ? std::abs(*v.weight) : std::abs(*explained);
    switch (v.verdict) {
      case Verdict::irrelevant:
        if (v.cls == req.true_label) fb.destructive.push_back(v.feature);
        break;
      case Verdict::relevant_used_correctly:
        if (magnitude > 0.0) knowledge.push_back({v.feature, sign_of(*explained) * magnitude});
        break;
      case Verdict::relevant_wrong_polarity:
        if (magnitude > 0.0) knowledge.push_back({v.feature, -sign_of(*explained) * magnitude});
        break;
      case Verdict::missing_concept:
        break;
    }
  }
  std::sort(fb.destructive.begin(), fb.destructive.end());
  for (auto& [cls, knowledge] : fb.relevance) {
    sort_by_relevance(knowledge, {});
    std::vector<FeatureWeight> positive;
    for (const auto& e : knowledge)
      if (e.weight > 0.0) positive.push_back(e);
    if (!positive.empty()) fb.constructive[cls] = std::move(positive);
  }
  return fb;
}

CorrectionRequest gold_standard_request(const GoldStandard& gs, const PendingQuery& q, Strategy s,
                                        ClassId y, double k_fraction) {
  CorrectionRequest req;
  req.true_label = y;
  if (s == Strategy::active_learning) return req;
  if (gs.kind() != strategy_kind(s))
    throw Error(ErrorCode::KindMismatch, "gold standard kind does not match the strategy");

  auto judge = [&](ClassId c) {
    const Explanation* served = served_explanation(q, s, c);
    if (!served) return;
    for (const auto& f : served->features) {
      const auto w = gs.weight_of(c, f.feature);
      FeatureVerdict v{c, f.feature, Verdict::irrelevant, std::nullopt};
      if (w) {
        const bool agrees = (*w > 0.0) == (f.weight >= 0.0);
        v.verdict = agrees ? Verdict::relevant_used_correctly : Verdict::relevant_wrong_polarity;
        v.weight = std::abs(*w);
      }
      req.verdicts.push_back(v);
    }
  };

  if (s == Strategy::semantic_push) {
    std::vector<ClassId> classes{y};
    if (q.predicted != y) classes.push_back(q.predicted);
    for (ClassId c : classes) {
      judge(c);
      const Explanation* served = served_explanation(q, s, c);
      for (const auto& e : gs.positive_part(c))
        if (!served || !served->contains(e.feature))
          req.verdicts.push_back({c, e.feature, Verdict::missing_concept, e.weight});
    }
    return req;
  }

  // CAIPI: judge the served explanation against the true class when the
  // prediction is right, else hint the top relevant words of the true class.
  if (q.predicted == y) {
    const Explanation* served = served_explanation(q, s, q.predicted);
    if (served) {
      for (const auto& f : served->features) {
        const auto w = gs.weight_of(y, f.feature);
        FeatureVerdict v{y, f.feature, Verdict::irrelevant, std::nullopt};
        if (w) {
          v.verdict = (*w > 0.0) == (f.weight >= 0.0) ? Verdict::relevant_used_correctly
                                                      : Verdict::relevant_wrong_polarity;
          v.weight = std::abs(*w);
        }
        req.verdicts.push_back(v);
      }
    }
    return req;
  }
  judge(q.predicted);
  const auto ranking = gs.positive_part(y);
  const auto top = static_cast<std::size_t>(std::ceil(k_fraction * static_cast<double>(ranking.size()) - 1e-12));
  for (std::size_t i = 0; i < std::min(top, ranking.size()); ++i)
    req.verdicts.push_back({y, ranking[i].feature, Verdict::missing_concept, ranking[i].weight});
  return req;
}

SessionManager::SessionManager(Preparer preparer) : preparer_(std::move(preparer)) {
  if (!preparer_) {
    preparer_ = [](const ExperimentConfig& cfg) -> std::shared_ptr<const PreparedExperiment> {
      return prepare_experiment(cfg);
    };
  }
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no session '" + id + "'");
  return it->second;
}

nlohmann::json SessionManager::create(const nlohmann::json& body) {
  if (!body.is_object() || !body.contains("config"))
    throw Error(ErrorCode::InvalidConfig, "session body needs a config object");
  const auto cfg = ExperimentConfig::from_json(body.at("config"));
  Strategy strategy = cfg.strategies.front();
  if (body.contains("strategy")) {
    if (!body.at("strategy").is_string()) throw Error(ErrorCode::InvalidConfig, "strategy must be a name");
    strategy = parse_strategy(body.at("strategy").get<std::string>());
  }
  auto session = std::make_shared<Session>();
  session->strategy = strategy;
  session->prepared = preparer_(cfg);
  session->loop = std::make_unique<InteractionLoop>(session->prepared->loop_data(),
                                                    session->prepared->loop_config(strategy));
  if (session->loop->finished()) {
    session->phase = Phase::finished;
  } else {
    session->loop->pending();
  }
  {
    std::lock_guard lock(mutex_);
    session->id = "s" + std::to_string(next_id_++);
    sessions_.emplace(session->id, session);
  }
  std::lock_guard lock(session->mutex);
  return state_payload(*session);
}

nlohmann::json SessionManager::state_payload(const Session& s) const {
  ojson j;
  j["api_version"] = kApiVersion;
  j["session_id"] = s.id;
  j["strategy"] = to_string(s.strategy);
  j["phase"] = to_string(s.phase);
  j["iteration"] = s.loop->iteration();
  j["iterations"] = s.loop->config().iterations;
  j["train_size"] = s.loop->train_size();
  j["pool_size"] = s.loop->pool_size();
  j["classes"] = s.prepared->corpus.classes;
  return j;
}

nlohmann::json SessionManager::state(const std::string& id) const {
  const auto s = find(id);
  std::unique_lock lock(s->mutex, std::try_to_lock);
  if (!lock.owns_lock()) {
    ojson j;
    j["api_version"] = kApiVersion;
    j["session_id"] = id;
    j["phase"] = to_string(Phase::retraining);
    return j;
  }
  return state_payload(*s);
}

nlohmann::json SessionManager::query_payload(const Session& s) const {
  const auto& prepared = *s.prepared;
  const auto& corpus = prepared.corpus;
  const auto& vocab = corpus.vocab();
  // Computed when the phase was entered; the loop caches it.
  const auto& q = s.loop->pending();
  const auto& x = corpus.documents[q.instance];
  const std::size_t top_words = 8;

  auto feature_label = [&](FeatureKind kind, FeatureId f) -> ojson {
    ojson e;
    if (kind == FeatureKind::word) {
      e["label"] = vocab.term(f);
    } else {
      e["label"] = "topic " + std::to_string(f);
      std::vector<std::string> words;
      for (WordId w : prepared.lda->top_words(f, top_words)) words.push_back(vocab.term(w));
      e["top_words"] = std::move(words);
    }
    return e;
  };
  auto explanation_json = [&](const Explanation& e) {
    ojson j;
    j["class"] = e.target_class;
    j["kind"] = to_string(e.kind);
    j["r2"] = e.surrogate_r2;
    j["intercept"] = e.intercept;
    ojson features = ojson::array();
    for (const auto& f : e.features) {
      ojson entry = feature_label(e.kind, f.feature);
      entry["feature"] = f.feature;
      entry["weight"] = f.weight;
      features.push_back(std::move(entry));
    }
    j["features"] = std::move(features);
    return j;
  };

  ojson j;
  j["api_version"] = kApiVersion;
  j["session_id"] = s.id;
  j["strategy"] = to_string(s.strategy);
  j["feature_kind"] = to_string(strategy_kind(s.strategy));
  j["iteration"] = q.iteration;
  j["instance"] = q.instance;
  j["doc_id"] = x.id;
  j["text"] = x.raw;
  std::vector<std::string> tokens;
  for (WordId w : x.tokens) tokens.push_back(vocab.term(w));
  j["tokens"] = std::move(tokens);
  j["classes"] = corpus.classes;
  j["predicted"] = q.predicted;
  j["probabilities"] = std::vector<double>(q.proba.values().begin(), q.proba.values().end());
  ojson served = ojson::array();
  for (std::size_t c = 0; c < corpus.num_classes(); ++c)
    if (const auto* e = served_explanation(q, s.strategy, static_cast<ClassId>(c))) served.push_back(explanation_json(*e));
  j["explanations"] = std::move(served);
  j["lime"] = q.lime ? explanation_json(*q.lime) : ojson(nullptr);
  if (q.inference) {
    j["topic_mixture"] = std::vector<double>(q.inference->mixture.values().begin(),
                                             q.inference->mixture.values().end());
    j["token_topics"] = q.inference->assignment.topics;
  }
  ojson hints = ojson::object();
  const auto& gs = strategy_kind(s.strategy) == FeatureKind::topic ? prepared.topic_gs : prepared.word_gs;
  for (std::size_t c = 0; c < corpus.num_classes(); ++c) {
    ojson list = ojson::array();
    const auto positive = gs.positive_part(static_cast<ClassId>(c));
    for (std::size_t i = 0; i < std::min<std::size_t>(10, positive.size()); ++i) {
      ojson entry = feature_label(gs.kind(), positive[i].feature);
      entry["feature"] = positive[i].feature;
      entry["weight"] = positive[i].weight;
      list.push_back(std::move(entry));
    }
    hints[std::to_string(c)] = std::move(list);
  }
  j["gs_hints"] = std::move(hints);
  j["num_topics"] = prepared.lda ? prepared.lda->num_topics() : 0;
  j["verdicts"] = {"relevant_used_correctly", "irrelevant", "relevant_wrong_polarity", "missing_concept"};
  return j;
}

nlohmann::json SessionManager::query(const std::string& id) const {
  const auto s = find(id);
  std::unique_lock lock(s->mutex, std::try_to_lock);
  if (!lock.owns_lock()) throw Error(ErrorCode::WrongPhase, "session is retraining");
  if (s->phase != Phase::awaiting_correction)
    throw Error(ErrorCode::WrongPhase, std::string("session is ") + to_string(s->phase));
  return query_payload(*s);
}

nlohmann::json SessionManager::correct(const std::string& id, const nlohmann::json& body) {
  const auto s = find(id);
  std::unique_lock lock(s->mutex, std::try_to_lock);
  if (!lock.owns_lock()) throw Error(ErrorCode::Conflict, "a correction is already being applied");
  if (s->phase != Phase::awaiting_correction)
    throw Error(ErrorCode::WrongPhase, std::string("session is ") + to_string(s->phase));
  const auto req = CorrectionRequest::from_json(body);
  auto& loop = *s->loop;
  const auto& corpus = s->prepared->corpus;
  const std::size_t num_features = strategy_kind(s->strategy) == FeatureKind::topic
                                       ? (s->prepared->lda ? s->prepared->lda->num_topics() : 0)
                                       : corpus.vocab().size();
  const auto feedback = translate_request(req, loop.pending(), s->strategy, corpus.num_classes(), num_features);
  const double before = loop.f1_series().last();
  s->phase = Phase::retraining;
  try {
    const auto& rec = loop.apply(feedback);
    ojson j;
    j["api_version"] = kApiVersion;
    j["session_id"] = s->id;
    j["iteration"] = rec.iteration;
    j["branch"] = to_string(rec.branch);
    j["fallback"] = rec.fallback;
    ojson previews = ojson::array();
    for (const auto& c : rec.counterexamples) {
      ojson p = c.to_json(corpus.vocab());
      p["label_name"] = corpus.classes[static_cast<std::size_t>(c.label)];
      previews.push_back(std::move(p));
    }
    j["counterexamples"] = std::move(previews);
    j["metrics"] = rec.metrics.to_json();
    j["metric_delta"] = {{"macro_f1", rec.metrics.macro_f1 - before}};
    j["train_size"] = rec.train_size;
    j["pool_size"] = rec.pool_size;
    if (loop.finished()) {
      s->phase = Phase::finished;
    } else {
      loop.pending();
      s->phase = Phase::awaiting_correction;
    }
    j["phase"] = to_string(s->phase);
    return j;
  } catch (...) {
    s->phase = Phase::awaiting_correction;
    throw;
  }
}

nlohmann::json SessionManager::metrics(const std::string& id) const {
  const auto s = find(id);
  std::lock_guard lock(s->mutex);
  ojson j;
  j["api_version"] = kApiVersion;
  j["session_id"] = s->id;
  j["phase"] = to_string(s->phase);
  ojson series = ojson::array();
  for (const auto& m : s->loop->series()) series.push_back(m.to_json());
  j["series"] = std::move(series);
  return j;
}

nlohmann::json SessionManager::records(const std::string& id) const {
  const auto s = find(id);
  std::lock_guard lock(s->mutex);
  ojson j;
  j["api_version"] = kApiVersion;
  j["session_id"] = s->id;
  ojson list = ojson::array();
  for (const auto& r : s->loop->records()) list.push_back(r.to_json(s->prepared->corpus.vocab()));
  j["records"] = std::move(list);
  return j;
}

nlohmann::json SessionManager::gold_standard(const std::string& id, std::string_view kind) const {
  const auto s = find(id);
  const auto k = parse_feature_kind(kind);
  ojson j;
  j["api_version"] = kApiVersion;
  j["session_id"] = s->id;
  j["classes"] = s->prepared->corpus.classes;
  j["gold_standard"] = k == FeatureKind::topic ? s->prepared->topic_gs.to_json() : s->prepared->word_gs.to_json();
  return j;
}

}  // namespace semloop
