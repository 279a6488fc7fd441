#include "semloop/loop.hpp"

#include <algorithm>

#include "semloop/error.hpp"
#include "semloop/rng.hpp"

namespace semloop {

namespace {

// Seed streams; combined with iteration, instance and class ids.
constexpr std::uint64_t kLimeStream = 1;
constexpr std::uint64_t kTopicLimeStream = 2;
constexpr std::uint64_t kInferenceStream = 3;
constexpr std::uint64_t kCounterexampleStream = 4;
constexpr std::uint64_t kEaStream = 5;

bool uses_lime(Strategy s) {
  return s == Strategy::caipi_d || s == Strategy::caipi_dc || s == Strategy::semantic_push;
}

void check_subset(std::span<const FeatureId> destructive, const Explanation& presented) {
  for (FeatureId f : destructive)
    if (!presented.contains(f))
      throw Error(ErrorCode::SchemaError, "destructive feature " + std::to_string(f) +
                                              " was not part of the presented explanation");
}

}  // namespace

void LoopConfig::validate() const {
  if (iterations < 1) throw Error(ErrorCode::InvalidConfig, "iterations must be at least 1");
  strategy_cfg.validate();
  if (lime_samples < strategy_cfg.lime_features + 1 ||
      topiclime_samples < strategy_cfg.topiclime_features + 1)
    throw Error(ErrorCode::InvalidConfig, "explainer sample counts must exceed the explanation size");
  if (!(ea_k_fraction > 0.0 && ea_k_fraction <= 1.0))
    throw Error(ErrorCode::InvalidConfig, "ea_k_fraction must lie in (0, 1]");
}

nlohmann::json MetricSnapshot::to_json() const {
  nlohmann::ordered_json j;
  j["macro_f1"] = macro_f1;
  j["margin"] = margin ? nlohmann::json(*margin) : nlohmann::json(nullptr);
  j["explanatory_accuracy"] =
      explanatory_accuracy ? nlohmann::json(*explanatory_accuracy) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json IterationRecord::to_json(const Vocabulary& vocab) const {
  nlohmann::ordered_json j;
  j["schema_version"] = kRecordSchemaVersion;
  j["iteration"] = iteration;
  j["instance"] = instance;
  j["doc_id"] = doc_id;
  j["predicted"] = predicted;
  j["truth"] = truth;
  j["explanation"] = explanation ? explanation->to_json() : nlohmann::json(nullptr);
  j["correction"] = correction ? correction->to_json() : nlohmann::json(nullptr);
  j["branch"] = to_string(branch);
  j["fallback"] = fallback;
  nlohmann::json ces = nlohmann::json::array();
  for (const auto& c : counterexamples) ces.push_back(c.to_json(vocab));
  j["counterexamples"] = std::move(ces);
  j["train_size"] = train_size;
  j["pool_size"] = pool_size;
  j["metrics"] = metrics.to_json();
  return j;
}

InteractionLoop::InteractionLoop(LoopData data, LoopConfig cfg)
    : data_(std::move(data)), cfg_(std::move(cfg)) {
  cfg_.validate();
  if (!data_.corpus) throw Error(ErrorCode::InvalidConfig, "loop needs a corpus");
  const auto& corpus = *data_.corpus;
  if (cfg_.strategy == Strategy::semantic_push && (!data_.lda || !data_.topic_gs))
    throw Error(ErrorCode::InvalidConfig, "SemanticPush needs a topic model and a topic Gold Standard");
  if ((cfg_.strategy == Strategy::caipi_d || cfg_.strategy == Strategy::caipi_dc) && !data_.word_gs)
    throw Error(ErrorCode::InvalidConfig, "CAIPI needs a word Gold Standard");
  if (cfg_.ea_every > 0 && !data_.word_gs)
    throw Error(ErrorCode::InvalidConfig, "explanatory accuracy needs a word Gold Standard");
  if (data_.test.empty()) throw Error(ErrorCode::InvalidConfig, "empty test set");

  train_.num_features = corpus.vocab().size();
  train_.num_classes = corpus.num_classes();
  for (auto i : data_.train) train_.add(corpus.documents.at(i).bow, corpus.labels.at(i));
  pool_ = data_.pool;
  std::sort(pool_.begin(), pool_.end());
  test_ = TestView::of(corpus, data_.test);
  refit();
  measure(0);
}

bool InteractionLoop::finished() const {
  return records_.size() >= cfg_.iterations || pool_.empty();
}

void InteractionLoop::refit() {
  model_ = std::make_unique<SoftmaxRegression>(fit_softmax(train_, cfg_.learner));
}

PerturbationConfig InteractionLoop::explainer_cfg(FeatureKind kind, std::uint64_t seed) const {
  PerturbationConfig pc;
  pc.num_samples = kind == FeatureKind::word ? cfg_.lime_samples : cfg_.topiclime_samples;
  pc.complexity = kind == FeatureKind::word ? cfg_.strategy_cfg.lime_features
                                            : cfg_.strategy_cfg.topiclime_features;
  pc.kernel_width = cfg_.kernel_width;
  pc.seed = seed;
  return pc;
}

MetricSnapshot InteractionLoop::measure(std::size_t iteration) {
  MetricSnapshot snap;
  const auto& corpus = *data_.corpus;
  auto due = [&](std::size_t every) {
    return every > 0 && (iteration % every == 0 || iteration == cfg_.iterations);
  };
  snap.macro_f1 = macro_f1(*model_, test_, corpus.num_classes());
  f1_.add(iteration, snap.macro_f1);
  if (due(cfg_.margin_every)) {
    snap.margin = avg_classification_margin(*model_, test_);
    margin_.add(iteration, *snap.margin);
  }
  if (due(cfg_.ea_every)) {
    EaConfig ea;
    ea.k_fraction = cfg_.ea_k_fraction;
    ea.num_samples = cfg_.lime_samples;
    ea.kernel_width = cfg_.kernel_width;
    ea.seed = derive_seed(cfg_.seed, {kEaStream});
    snap.explanatory_accuracy = explanatory_accuracy(*model_, *data_.word_gs, test_, ea).value;
    ea_.add(iteration, *snap.explanatory_accuracy);
  }
  return snap;
}

const PendingQuery& InteractionLoop::pending() {
  if (pending_) return *pending_;
  if (finished()) throw Error(ErrorCode::WrongPhase, "the interaction loop is finished");
  const auto& corpus = *data_.corpus;
  PendingQuery q;
  q.iteration = records_.size() + 1;
  q.instance = select_query(*model_, corpus.documents, pool_);
  const auto& x = corpus.documents[q.instance];
  q.proba = model_->predict_proba(x.bow);
  q.predicted = q.proba.argmax();
  const auto it = static_cast<std::uint64_t>(q.iteration);
  const auto inst = static_cast<std::uint64_t>(q.instance);
  if (uses_lime(cfg_.strategy) && !x.empty()) {
    q.lime = lime_explain(*model_, x, q.predicted,
                          explainer_cfg(FeatureKind::word,
                                        derive_seed(cfg_.seed, {it, inst, static_cast<std::uint64_t>(q.predicted), kLimeStream})));
  }
  if (cfg_.strategy == Strategy::semantic_push && !x.empty()) {
    q.inference = infer_mixture(*data_.lda, x, cfg_.inference, derive_seed(cfg_.seed, {kInferenceStream, inst}));
    for (std::size_t c = 0; c < corpus.num_classes(); ++c) {
      q.topic_explanations.push_back(topiclime_explain(
          *model_, x, static_cast<ClassId>(c), *data_.lda, q.inference->assignment,
          explainer_cfg(FeatureKind::topic, derive_seed(cfg_.seed, {it, inst, c, kTopicLimeStream}))));
    }
  }
  pending_ = std::move(q);
  return *pending_;
}

CorrectionFeedback InteractionLoop::simulated_feedback() {
  const auto& q = pending();
  const auto& corpus = *data_.corpus;
  const auto& x = corpus.documents[q.instance];
  const ClassId y = corpus.labels[q.instance];
  if (cfg_.strategy == Strategy::semantic_push && !q.topic_explanations.empty())
    return simulated_correction(*data_.topic_gs, x, y, q.predicted,
                                q.topic_explanations[static_cast<std::size_t>(y)]);
  if ((cfg_.strategy == Strategy::caipi_d || cfg_.strategy == Strategy::caipi_dc) && q.lime)
    return simulated_correction(*data_.word_gs, x, y, q.predicted, *q.lime);
  CorrectionFeedback fb;
  fb.true_label = y;
  return fb;
}

const IterationRecord& InteractionLoop::apply(const CorrectionFeedback& fb) {
  const PendingQuery q = pending();
  const auto& corpus = *data_.corpus;
  const auto& x = corpus.documents[q.instance];
  if (fb.true_label < 0 || static_cast<std::size_t>(fb.true_label) >= corpus.num_classes())
    throw Error(ErrorCode::SchemaError, "true_label outside the class set");
  const ClassId y = fb.true_label;
  const auto& scfg = cfg_.strategy_cfg;
  const std::uint64_t ce_seed = derive_seed(
      cfg_.seed, {q.iteration, q.instance, static_cast<std::uint64_t>(y), kCounterexampleStream});

  IterationRecord rec;
  rec.iteration = q.iteration;
  rec.instance = q.instance;
  rec.doc_id = x.id;
  rec.predicted = q.predicted;
  rec.truth = y;
  rec.correction = fb;

  auto knowledge = [&](ClassId c) -> std::span<const FeatureWeight> {
    const auto it = fb.relevance.find(c);
    return it == fb.relevance.end() ? std::span<const FeatureWeight>{} : std::span<const FeatureWeight>(it->second);
  };

  switch (cfg_.strategy) {
    case Strategy::active_learning:
      break;
    case Strategy::caipi_d:
    case Strategy::caipi_dc: {
      if (!q.lime) break;
      check_subset(fb.destructive, *q.lime);
      rec.explanation = q.lime;
      rec.counterexamples = caipi_destructive(x, y, q.predicted, fb.destructive, scfg.M);
      if (cfg_.strategy == Strategy::caipi_dc && q.predicted != y) {
        const auto it = fb.constructive.find(y);
        if (it != fb.constructive.end()) {
          // Human hints are used as given; simulated ones keep the top share.
          const double k = fb.source == FeedbackSource::simulated ? scfg.k_fraction : 1.0;
          const auto support = top_k_support(it->second, x, k);
          rec.counterexamples = caipi_constructive(y, q.predicted, support, scfg.M,
                                                   scfg.counterexample_length, ce_seed);
        }
      }
      break;
    }
    case Strategy::semantic_push: {
      if (q.topic_explanations.empty()) break;
      const auto& expl_y = q.topic_explanations[static_cast<std::size_t>(y)];
      check_subset(fb.destructive, expl_y);
      rec.explanation = expl_y;
      PushInput in;
      in.x = &x;
      in.inference = &*q.inference;
      in.y = y;
      in.predicted = q.predicted;
      in.explanation_y = &expl_y;
      in.explanation_predicted = &q.topic_explanations[static_cast<std::size_t>(q.predicted)];
      in.knowledge_y = knowledge(y);
      in.knowledge_predicted = knowledge(q.predicted);
      auto result = semantic_push(in, *data_.lda, scfg, ce_seed);
      rec.branch = result.branch;
      rec.fallback = result.fallback;
      rec.counterexamples = std::move(result.counterexamples);
      break;
    }
  }

  train_.add(x.bow, y);
  for (const auto& c : rec.counterexamples) train_.add(to_bow(c.tokens), c.label);
  pool_.erase(std::lower_bound(pool_.begin(), pool_.end(), q.instance));
  pending_.reset();
  refit();
  rec.metrics = measure(q.iteration);
  rec.train_size = train_.size();
  rec.pool_size = pool_.size();
  records_.push_back(std::move(rec));
  return records_.back();
}

LoopResult run_loop(LoopData data, LoopConfig cfg,
                    const std::function<void(const IterationRecord&)>& observer) {
  InteractionLoop loop(std::move(data), std::move(cfg));
  while (!loop.finished()) {
    const auto fb = loop.simulated_feedback();
    const auto& rec = loop.apply(fb);
    if (observer) observer(rec);
  }
  return LoopResult{loop.records(), loop.series()};
}

std::string records_jsonl(const std::vector<IterationRecord>& records, const Vocabulary& vocab) {
  std::string out;
  for (const auto& r : records) {
    out += r.to_json(vocab).dump();
    out += '\n';
  }
  return out;
}

}  // namespace semloop
