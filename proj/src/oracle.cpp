#include "semloop/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "semloop/error.hpp"
#include "semloop/metrics.hpp"
#include "semloop/rng.hpp"

namespace semloop {

void sort_by_relevance(std::vector<FeatureWeight>& weights,
                       const std::vector<std::string>& feature_names) {
  std::sort(weights.begin(), weights.end(), [&](const FeatureWeight& a, const FeatureWeight& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    if (!feature_names.empty())
      return feature_names[static_cast<std::size_t>(a.feature)] <
             feature_names[static_cast<std::size_t>(b.feature)];
    return a.feature < b.feature;
  });
}

GoldStandard::GoldStandard(FeatureKind kind, std::vector<std::vector<FeatureWeight>> per_class,
                           std::vector<std::string> feature_names, double source_f1)
    : kind_(kind), per_class_(std::move(per_class)), names_(std::move(feature_names)),
      source_f1_(source_f1) {
  for (auto& entries : per_class_) {
    std::vector<FeatureId> ids;
    for (const auto& e : entries) {
      if (e.feature < 0 || (!names_.empty() && static_cast<std::size_t>(e.feature) >= names_.size()))
        throw Error(ErrorCode::InvalidArgument, "gold standard feature outside the feature set");
      ids.push_back(e.feature);
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
      throw Error(ErrorCode::InvalidArgument, "duplicate feature in a gold standard class");
    sort_by_relevance(entries, names_);
  }
}

GoldStandard GoldStandard::from_weights(FeatureKind kind, const Eigen::MatrixXd& weights,
                                        std::vector<std::string> feature_names, double source_f1) {
  std::vector<std::vector<FeatureWeight>> per_class(static_cast<std::size_t>(weights.rows()));
  for (Eigen::Index c = 0; c < weights.rows(); ++c) {
    for (Eigen::Index f = 0; f < weights.cols(); ++f) {
      const double w = weights(c, f);
      if (std::abs(w) > kGsMembershipThreshold)
        per_class[static_cast<std::size_t>(c)].push_back({static_cast<FeatureId>(f), w});
    }
  }
  return GoldStandard(kind, std::move(per_class), std::move(feature_names), source_f1);
}

const std::vector<FeatureWeight>& GoldStandard::weights(ClassId y) const {
  if (y < 0 || static_cast<std::size_t>(y) >= per_class_.size())
    throw Error(ErrorCode::InvalidArgument, "class outside the gold standard");
  return per_class_[static_cast<std::size_t>(y)];
}

std::vector<FeatureWeight> GoldStandard::positive_part(ClassId y) const {
  std::vector<FeatureWeight> out;
  for (const auto& e : weights(y))
    if (e.weight > 0.0) out.push_back(e);
  return out;
}

std::vector<FeatureWeight> GoldStandard::negative_part(ClassId y) const {
  std::vector<FeatureWeight> out;
  for (const auto& e : weights(y))
    if (e.weight < 0.0) out.push_back(e);
  return out;
}

bool GoldStandard::contains(ClassId y, FeatureId feature) const {
  return weight_of(y, feature).has_value();
}

std::optional<double> GoldStandard::weight_of(ClassId y, FeatureId feature) const {
  for (const auto& e : weights(y))
    if (e.feature == feature) return e.weight;
  return std::nullopt;
}

nlohmann::json GoldStandard::to_json() const {
  nlohmann::ordered_json j;
  j["kind"] = semloop::to_string(kind_);
  j["source_f1"] = source_f1_;
  j["feature_names"] = names_;
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& entries : per_class_) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& e : entries) list.push_back({e.feature, e.weight});
    classes.push_back(std::move(list));
  }
  j["per_class"] = std::move(classes);
  return j;
}

GoldStandard GoldStandard::from_json(const nlohmann::json& j) {
  try {
    std::vector<std::vector<FeatureWeight>> per_class;
    for (const auto& list : j.at("per_class")) {
      auto& entries = per_class.emplace_back();
      for (const auto& e : list) entries.push_back({e.at(0).get<FeatureId>(), e.at(1).get<double>()});
    }
    return GoldStandard(parse_feature_kind(j.at("kind").get<std::string>()), std::move(per_class),
                        j.value("feature_names", std::vector<std::string>{}),
                        j.at("source_f1").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  }
}

namespace {

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

SparseRows select_rows(const SparseRows& X, std::span<const std::size_t> rows) {
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (SparseRows::InnerIterator it(X, static_cast<Eigen::Index>(rows[r])); it; ++it)
      triplets.emplace_back(static_cast<int>(r), static_cast<int>(it.col()), it.value());
  SparseRows out(static_cast<Eigen::Index>(rows.size()), X.cols());
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

GoldStandard fit_gold_standard(FeatureKind kind, const SparseRows& X,
                               const std::vector<ClassId>& labels, std::size_t num_classes,
                               std::vector<std::string> names, const GsParams& params) {
  if (std::set<ClassId>(labels.begin(), labels.end()).size() < 2)
    throw Error(ErrorCode::SingleClassTrainSet, "gold standard corpus spans fewer than 2 classes");
  if (!(params.holdout_fraction > 0.0 && params.holdout_fraction < 1.0))
    throw Error(ErrorCode::InvalidConfig, "holdout_fraction must lie in (0, 1)");
  LearnerParams lp;
  lp.penalty = Penalty::l1;
  lp.regularization = params.regularization;
  lp.max_epochs = params.max_epochs;

  // Held-out estimate of the generating model's quality.
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(params.seed, {0x6f5}));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const auto n_hold = static_cast<std::size_t>(
      std::ceil(params.holdout_fraction * static_cast<double>(order.size())));
  std::vector<std::size_t> hold(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_hold));
  std::vector<std::size_t> fit(order.begin() + static_cast<std::ptrdiff_t>(n_hold), order.end());
  std::sort(hold.begin(), hold.end());
  std::sort(fit.begin(), fit.end());
  auto labels_of = [&](std::span<const std::size_t> rows) {
    std::vector<ClassId> out;
    for (auto r : rows) out.push_back(labels[r]);
    return out;
  };
  double source_f1 = 0.0;
  const auto fit_labels = labels_of(fit);
  if (!hold.empty() && std::set<ClassId>(fit_labels.begin(), fit_labels.end()).size() >= 2) {
    const auto partial = fit_softmax_matrix(select_rows(X, fit), fit_labels, num_classes, lp);
    const auto predicted = predict_rows(partial, select_rows(X, hold));
    source_f1 = macro_f1(predicted, labels_of(hold), num_classes);
  }

  const auto full = fit_softmax_matrix(X, labels, num_classes, lp);
  return GoldStandard::from_weights(kind, full.weights, std::move(names), source_f1);
}

}  // namespace

GoldStandard build_word_gs(const LabeledCorpus& corpus, const GsParams& params) {
  corpus.validate();
  TrainSet train;
  train.num_features = corpus.vocab().size();
  train.num_classes = corpus.num_classes();
  for (std::size_t i = 0; i < corpus.size(); ++i) train.add(corpus.documents[i].bow, corpus.labels[i]);
  const auto X = design_matrix(train, FeatureScaling::l2_normalized);
  return fit_gold_standard(FeatureKind::word, X, corpus.labels, corpus.num_classes(),
                           corpus.vocab().terms(), params);
}

std::vector<TopicMixture> infer_corpus_mixtures(const LabeledCorpus& corpus, const LdaModel& lda,
                                                const InferenceParams& inference,
                                                std::uint64_t seed) {
  std::vector<TopicMixture> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i)
    out.push_back(infer_mixture(lda, corpus.documents[i], inference, derive_seed(seed, {i})).mixture);
  return out;
}

GoldStandard build_topic_gs(const LabeledCorpus& corpus, const LdaModel& lda,
                            const GsParams& params, const InferenceParams& inference) {
  corpus.validate();
  if (lda.vocabulary_size() != corpus.vocab().size())
    throw Error(ErrorCode::DimensionMismatch, "topic model fitted on a different vocabulary");
  const auto mixtures = infer_corpus_mixtures(corpus, lda, inference, derive_seed(params.seed, {0x7a1}));
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t i = 0; i < mixtures.size(); ++i)
    for (std::size_t t = 0; t < mixtures[i].size(); ++t)
      if (mixtures[i][t] > 0.0) triplets.emplace_back(static_cast<int>(i), static_cast<int>(t), mixtures[i][t]);
  SparseRows X(static_cast<Eigen::Index>(corpus.size()), static_cast<Eigen::Index>(lda.num_topics()));
  X.setFromTriplets(triplets.begin(), triplets.end());
  return fit_gold_standard(FeatureKind::topic, X, corpus.labels, corpus.num_classes(), {}, params);
}

std::vector<WordId> top_k_support(std::span<const FeatureWeight> positive_ranking,
                                  const Document& x, double k_fraction) {
  if (!(k_fraction > 0.0 && k_fraction <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "k_fraction must lie in (0, 1]");
  const auto top = std::min(
      positive_ranking.size(),
      static_cast<std::size_t>(std::ceil(k_fraction * static_cast<double>(positive_ranking.size()) - 1e-12)));
  std::vector<WordId> out;
  for (std::size_t i = 0; i < top; ++i) {
    const WordId w = positive_ranking[i].feature;
    const auto it = std::lower_bound(x.bow.begin(), x.bow.end(), w,
                                     [](const auto& entry, WordId id) { return entry.first < id; });
    if (it != x.bow.end() && it->first == w) out.push_back(w);
  }
  std::sort(out.begin(), out.end());
  return out;
}

LocalGoldStandard local_gs(const GoldStandard& gs, const Document& x, ClassId y,
                           double k_fraction) {
  if (gs.kind() != FeatureKind::word)
    throw Error(ErrorCode::KindMismatch, "local gold standards are word based");
  const auto ranking = gs.positive_part(y);
  return LocalGoldStandard{x.id, top_k_support(ranking, x, k_fraction)};
}

const char* to_string(FeedbackSource source) {
  return source == FeedbackSource::simulated ? "simulated" : "human";
}

namespace {

nlohmann::json weights_json(const std::map<ClassId, std::vector<FeatureWeight>>& m) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [cls, list] : m) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : list) arr.push_back({e.feature, e.weight});
    out[std::to_string(cls)] = std::move(arr);
  }
  return out;
}

std::map<ClassId, std::vector<FeatureWeight>> weights_from_json(const nlohmann::json& j) {
  std::map<ClassId, std::vector<FeatureWeight>> out;
  for (const auto& [key, arr] : j.items()) {
    auto& list = out[static_cast<ClassId>(std::stoi(key))];
    for (const auto& e : arr) list.push_back({e.at(0).get<FeatureId>(), e.at(1).get<double>()});
  }
  return out;
}

}  // namespace

nlohmann::json CorrectionFeedback::to_json() const {
  nlohmann::ordered_json j;
  j["true_label"] = true_label;
  j["kind"] = semloop::to_string(kind);
  j["destructive"] = destructive;
  j["constructive"] = weights_json(constructive);
  j["relevance"] = weights_json(relevance);
  j["source"] = semloop::to_string(source);
  return j;
}

CorrectionFeedback CorrectionFeedback::from_json(const nlohmann::json& j) {
  try {
    CorrectionFeedback fb;
    fb.true_label = j.at("true_label").get<ClassId>();
    fb.kind = parse_feature_kind(j.at("kind").get<std::string>());
    fb.destructive = j.at("destructive").get<std::vector<FeatureId>>();
    fb.constructive = weights_from_json(j.at("constructive"));
    fb.relevance = weights_from_json(j.at("relevance"));
    const auto src = j.at("source").get<std::string>();
    if (src != "simulated" && src != "human") throw Error(ErrorCode::SchemaError, "unknown feedback source");
    fb.source = src == "simulated" ? FeedbackSource::simulated : FeedbackSource::human;
    return fb;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  } catch (const std::invalid_argument& e) {
    throw Error(ErrorCode::SchemaError, "class keys must be integers");
  }
}

CorrectionFeedback simulated_correction(const GoldStandard& gs, const Document& /*x*/, ClassId y,
                                        ClassId predicted, const Explanation& explanation) {
  if (explanation.kind != gs.kind())
    throw Error(ErrorCode::KindMismatch, "explanation and gold standard feature kinds differ");
  CorrectionFeedback fb;
  fb.true_label = y;
  fb.kind = gs.kind();
  fb.source = FeedbackSource::simulated;
  for (const auto& f : explanation.features)
    if (!gs.contains(y, f.feature)) fb.destructive.push_back(f.feature);
  std::sort(fb.destructive.begin(), fb.destructive.end());
  fb.constructive[y] = gs.positive_part(y);
  fb.relevance[y] = gs.weights(y);
  if (predicted != y) {
    fb.constructive[predicted] = gs.positive_part(predicted);
    fb.relevance[predicted] = gs.weights(predicted);
  }
  return fb;
}

}  // namespace semloop
