#include "semloop/explainers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>

#include "semloop/error.hpp"
#include "semloop/rng.hpp"

namespace semloop {

const char* to_string(FeatureKind kind) {
  return kind == FeatureKind::word ? "word" : "topic";
}

FeatureKind parse_feature_kind(std::string_view name) {
  if (name == "word") return FeatureKind::word;
  if (name == "topic") return FeatureKind::topic;
  throw Error(ErrorCode::SchemaError, "unknown feature kind '" + std::string(name) + "'");
}

std::vector<FeatureWeight> Explanation::positive_part() const {
  std::vector<FeatureWeight> out;
  for (const auto& f : features)
    if (f.weight > 0.0) out.push_back(f);
  return out;
}

std::vector<FeatureWeight> Explanation::negative_part() const {
  std::vector<FeatureWeight> out;
  for (const auto& f : features)
    if (f.weight < 0.0) out.push_back(f);
  return out;
}

bool Explanation::contains(FeatureId feature) const { return weight_of(feature).has_value(); }

std::optional<double> Explanation::weight_of(FeatureId feature) const {
  for (const auto& f : features)
    if (f.feature == feature) return f.weight;
  return std::nullopt;
}

nlohmann::json Explanation::to_json() const {
  nlohmann::ordered_json j;
  j["target_class"] = target_class;
  j["kind"] = semloop::to_string(kind);
  nlohmann::json feats = nlohmann::json::array();
  for (const auto& f : features) feats.push_back({f.feature, f.weight});
  j["features"] = std::move(feats);
  j["r2"] = surrogate_r2;
  j["intercept"] = intercept;
  j["model_prediction"] = model_prediction;
  j["local_prediction"] = local_prediction;
  return j;
}

Explanation Explanation::from_json(const nlohmann::json& j) {
  try {
    Explanation e;
    e.target_class = j.at("target_class").get<ClassId>();
    e.kind = parse_feature_kind(j.at("kind").get<std::string>());
    for (const auto& f : j.at("features"))
      e.features.push_back({f.at(0).get<FeatureId>(), f.at(1).get<double>()});
    e.surrogate_r2 = j.at("r2").get<double>();
    e.intercept = j.value("intercept", 0.0);
    e.model_prediction = j.value("model_prediction", 0.0);
    e.local_prediction = j.value("local_prediction", 0.0);
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::SchemaError, ex.what());
  }
}

void PerturbationConfig::validate() const {
  if (num_samples < complexity + 1)
    throw Error(ErrorCode::InvalidConfig, "num_samples must exceed the explanation complexity");
  if (complexity < 1) throw Error(ErrorCode::InvalidConfig, "complexity must be at least 1");
  if (ridge < 0.0) throw Error(ErrorCode::InvalidConfig, "ridge penalty must be non-negative");
}

namespace {

// Up to this many requested features the surrogate picks them greedily,
// above it by weight magnitude.
constexpr std::size_t kForwardSelectionLimit = 6;
constexpr double kSelectionPenalty = 1e-8;

template <typename FeatureOf>
std::vector<WordId> filter_tokens(std::span<const WordId> tokens, FeatureOf&& keep) {
  std::vector<WordId> out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (keep(i)) out.push_back(tokens[i]);
  return out;
}

void check_assignment(std::span<const WordId> tokens, const TopicAssignment* assignment) {
  if (!assignment || assignment->topics.size() != tokens.size())
    throw Error(ErrorCode::InvalidArgument, "topic assignment does not cover the document");
}

}  // namespace

std::vector<WordId> apply_mask(std::span<const WordId> tokens, std::span<const FeatureId> features,
                               std::span<const std::uint8_t> indicator, FeatureKind kind,
                               const TopicAssignment* assignment) {
  auto is_on = [&](FeatureId id) {
    auto it = std::lower_bound(features.begin(), features.end(), id);
    return it != features.end() && *it == id &&
           indicator[static_cast<std::size_t>(it - features.begin())] != 0;
  };
  if (kind == FeatureKind::word) {
    return filter_tokens(tokens, [&](std::size_t i) { return is_on(tokens[i]); });
  }
  check_assignment(tokens, assignment);
  return filter_tokens(tokens, [&](std::size_t i) { return is_on(assignment->topics[i]); });
}

std::vector<WordId> remove_features(std::span<const WordId> tokens,
                                    std::span<const FeatureId> features, FeatureKind kind,
                                    const TopicAssignment* assignment) {
  auto removed = [&](FeatureId id) {
    return std::find(features.begin(), features.end(), id) != features.end();
  };
  if (kind == FeatureKind::word) {
    return filter_tokens(tokens, [&](std::size_t i) { return !removed(tokens[i]); });
  }
  check_assignment(tokens, assignment);
  return filter_tokens(tokens, [&](std::size_t i) { return !removed(assignment->topics[i]); });
}

Neighborhood perturbation_neighborhood(const Document& x, FeatureKind kind,
                                       const TopicAssignment* assignment, std::size_t num_samples,
                                       std::uint64_t seed) {
  if (num_samples < 1) throw Error(ErrorCode::InvalidArgument, "num_samples must be at least 1");
  Neighborhood hood;
  hood.kind = kind;
  if (kind == FeatureKind::word) {
    for (const auto& [w, c] : x.bow) hood.features.push_back(w);
  } else {
    check_assignment(x.tokens, assignment);
    for (TopicId t : assignment->active_topics()) hood.features.push_back(t);
  }
  const std::size_t d = hood.features.size();
  Rng rng(seed);
  hood.indicators.reserve(num_samples);
  hood.documents.reserve(num_samples);
  for (std::size_t s = 0; s < num_samples; ++s) {
    std::vector<std::uint8_t> z(d, 1);
    if (s > 0) {
      // Uniformly random subset: each feature kept with probability 1/2.
      for (auto& bit : z) bit = rng.uniform() < 0.5 ? 0 : 1;
    }
    hood.documents.push_back(apply_mask(x.tokens, hood.features, z, kind, assignment));
    hood.indicators.push_back(std::move(z));
  }
  return hood;
}

Explanation explain_neighborhood(const ProbabilisticClassifier& f, const Neighborhood& hood,
                                 ClassId target_class, const PerturbationConfig& cfg) {
  cfg.validate();
  const std::size_t n = hood.documents.size();
  const std::size_t d = hood.features.size();
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "empty neighborhood");
  if (target_class < 0 || static_cast<std::size_t>(target_class) >= f.num_classes())
    throw Error(ErrorCode::InvalidArgument, "target class outside the classifier's classes");

  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  Eigen::VectorXd sw(static_cast<Eigen::Index>(n));
  Eigen::MatrixXd Z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const double width = cfg.kernel_width > 0.0 ? cfg.kernel_width
                                               : 0.75 * std::sqrt(static_cast<double>(std::max<std::size_t>(d, 1)));
  for (std::size_t s = 0; s < n; ++s) {
    const auto& z = hood.indicators[s];
    std::size_t kept = 0;
    for (std::size_t j = 0; j < d; ++j) {
      Z(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) = z[j];
      kept += z[j];
    }
    // Cosine distance to the all-ones instance; an empty vector is at distance 1.
    const double dist = (d == 0 || kept == 0)
                            ? (d == 0 ? 0.0 : 1.0)
                            : 1.0 - std::sqrt(static_cast<double>(kept) / static_cast<double>(d));
    sw(static_cast<Eigen::Index>(s)) = std::exp(-(dist * dist) / (width * width));
    y(static_cast<Eigen::Index>(s)) =
        f.predict_proba(to_bow(hood.documents[s]))[static_cast<std::size_t>(target_class)];
  }

  const double wsum = sw.sum();
  const double y_mean = sw.dot(y) / wsum;
  const Eigen::VectorXd yc = y.array() - y_mean;

  // Weighted ridge on a column subset, with an unpenalized intercept.
  auto solve = [&](const std::vector<std::size_t>& cols, double penalty, Eigen::VectorXd& beta,
                   double& intercept) {
    const auto k = static_cast<Eigen::Index>(cols.size());
    Eigen::MatrixXd Zs(static_cast<Eigen::Index>(n), k);
    for (Eigen::Index c = 0; c < k; ++c) Zs.col(c) = Z.col(static_cast<Eigen::Index>(cols[static_cast<std::size_t>(c)]));
    Eigen::RowVectorXd z_mean = (sw.transpose() * Zs) / wsum;
    Eigen::MatrixXd Zc = Zs.rowwise() - z_mean;
    Eigen::MatrixXd A = Zc.transpose() * sw.asDiagonal() * Zc;
    A.diagonal().array() += penalty;
    Eigen::VectorXd rhs = Zc.transpose() * sw.asDiagonal() * yc;
    beta = k > 0 ? Eigen::VectorXd(A.ldlt().solve(rhs)) : Eigen::VectorXd();
    intercept = y_mean - (k > 0 ? z_mean.dot(beta) : 0.0);
  };

  auto weighted_r2 = [&](const std::vector<std::size_t>& cols, const Eigen::VectorXd& b, double b0) {
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      double pred = b0;
      for (std::size_t c = 0; c < cols.size(); ++c)
        pred += b(static_cast<Eigen::Index>(c)) * Z(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(cols[c]));
      const double r = y(static_cast<Eigen::Index>(s)) - pred;
      ss_res += sw(static_cast<Eigen::Index>(s)) * r * r;
      ss_tot += sw(static_cast<Eigen::Index>(s)) * yc(static_cast<Eigen::Index>(s)) * yc(static_cast<Eigen::Index>(s));
    }
    return ss_tot > 1e-24 ? 1.0 - ss_res / ss_tot : 0.0;
  };

  std::vector<std::size_t> all(d);
  std::iota(all.begin(), all.end(), 0);
  Eigen::VectorXd beta;
  double intercept = y_mean;
  std::vector<std::size_t> selected = all;
  if (d > cfg.complexity && cfg.complexity <= kForwardSelectionLimit) {
    // Greedy forward selection on the weighted fit score.
    selected.clear();
    std::vector<bool> used(d, false);
    while (selected.size() < cfg.complexity) {
      double best_score = -std::numeric_limits<double>::infinity();
      std::size_t best = d;
      for (std::size_t j = 0; j < d; ++j) {
        if (used[j]) continue;
        auto trial = selected;
        trial.push_back(j);
        solve(trial, kSelectionPenalty, beta, intercept);
        const double score = weighted_r2(trial, beta, intercept);
        if (score > best_score) {
          best_score = score;
          best = j;
        }
      }
      used[best] = true;
      selected.push_back(best);
    }
    std::sort(selected.begin(), selected.end());
  } else if (d > cfg.complexity) {
    // Pre-selection by absolute weight of an (essentially) unpenalized fit.
    solve(all, kSelectionPenalty, beta, intercept);
    std::stable_sort(all.begin(), all.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(beta(static_cast<Eigen::Index>(a))) > std::abs(beta(static_cast<Eigen::Index>(b)));
    });
    selected.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(cfg.complexity));
    std::sort(selected.begin(), selected.end());
  }
  solve(selected, cfg.ridge, beta, intercept);

  Explanation e;
  e.target_class = target_class;
  e.kind = hood.kind;
  e.intercept = intercept;
  e.surrogate_r2 = weighted_r2(selected, beta, intercept);
  e.model_prediction = y(0);
  e.local_prediction = intercept;
  for (std::size_t c = 0; c < selected.size(); ++c) {
    e.local_prediction += beta(static_cast<Eigen::Index>(c));
    e.features.push_back({hood.features[selected[c]], beta(static_cast<Eigen::Index>(c))});
  }
  std::stable_sort(e.features.begin(), e.features.end(), [](const auto& a, const auto& b) {
    return std::abs(a.weight) > std::abs(b.weight);
  });
  return e;
}

Explanation lime_explain(const ProbabilisticClassifier& f, const Document& x, ClassId target_class,
                         const PerturbationConfig& cfg) {
  if (x.empty()) throw Error(ErrorCode::EmptyDocument, "cannot explain an empty document");
  cfg.validate();
  const auto hood = perturbation_neighborhood(x, FeatureKind::word, nullptr, cfg.num_samples, cfg.seed);
  return explain_neighborhood(f, hood, target_class, cfg);
}

Explanation topiclime_explain(const ProbabilisticClassifier& f, const Document& x,
                              ClassId target_class, const LdaModel& lda,
                              const TopicAssignment& assignment, const PerturbationConfig& cfg) {
  if (x.empty()) throw Error(ErrorCode::EmptyDocument, "cannot explain an empty document");
  if (assignment.topics.empty()) throw Error(ErrorCode::NoActiveTopics, "document has no active topics");
  for (TopicId t : assignment.topics) {
    if (t < 0 || static_cast<std::size_t>(t) >= lda.num_topics())
      throw Error(ErrorCode::InvalidArgument, "assignment references a topic outside the model");
  }
  cfg.validate();
  const auto hood = perturbation_neighborhood(x, FeatureKind::topic, &assignment, cfg.num_samples, cfg.seed);
  return explain_neighborhood(f, hood, target_class, cfg);
}

}  // namespace semloop
