#include "semloop/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "semloop/error.hpp"
#include "semloop/rng.hpp"

namespace semloop {

double macro_f1(std::span<const ClassId> predictions, std::span<const ClassId> truths,
                std::size_t num_classes) {
  if (predictions.size() != truths.size())
    throw Error(ErrorCode::LengthMismatch, "predictions and truths differ in length");
  if (num_classes == 0) throw Error(ErrorCode::InvalidArgument, "empty class set");
  std::vector<double> tp(num_classes, 0.0), fp(num_classes, 0.0), fn(num_classes, 0.0);
  auto check = [&](ClassId c) {
    if (c < 0 || static_cast<std::size_t>(c) >= num_classes)
      throw Error(ErrorCode::InvalidArgument, "label outside the class set");
    return static_cast<std::size_t>(c);
  };
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto p = check(predictions[i]);
    const auto t = check(truths[i]);
    if (p == t) {
      tp[p] += 1.0;
    } else {
      fp[p] += 1.0;
      fn[t] += 1.0;
    }
  }
  double total = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const double denom = 2.0 * tp[c] + fp[c] + fn[c];
    total += denom > 0.0 ? 2.0 * tp[c] / denom : 0.0;
  }
  return total / static_cast<double>(num_classes);
}

TestView TestView::of(const LabeledCorpus& corpus, std::span<const std::size_t> indices) {
  TestView view;
  for (auto i : indices) {
    view.docs.push_back(&corpus.documents.at(i));
    view.labels.push_back(corpus.labels.at(i));
  }
  return view;
}

std::vector<ClassId> predict_all(const ProbabilisticClassifier& f, const TestView& test) {
  std::vector<ClassId> out;
  out.reserve(test.size());
  for (const auto* d : test.docs) out.push_back(f.predict(d->bow));
  return out;
}

double macro_f1(const ProbabilisticClassifier& f, const TestView& test, std::size_t num_classes) {
  return macro_f1(predict_all(f, test), test.labels, num_classes);
}

double avg_classification_margin(const ProbabilisticClassifier& f, const TestView& test) {
  if (test.size() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto p = f.predict_proba(test.docs[i]->bow);
    total += p[static_cast<std::size_t>(p.argmax())] - p[static_cast<std::size_t>(test.labels[i])];
  }
  return total / static_cast<double>(test.size());
}

ExplainerFn make_lime_explainer(const ProbabilisticClassifier& f, PerturbationConfig cfg) {
  return [&f, cfg](std::size_t index, const Document& x, ClassId target) {
    auto local = cfg;
    local.seed = derive_seed(cfg.seed, {index, static_cast<std::uint64_t>(target)});
    return LocalExplanation{lime_explain(f, x, target, local), std::nullopt};
  };
}

ExplainerFn make_topiclime_explainer(const ProbabilisticClassifier& f, const LdaModel& lda,
                                     std::vector<Inference> inferences, PerturbationConfig cfg) {
  return [&f, &lda, inferences = std::move(inferences), cfg](std::size_t index, const Document& x,
                                                             ClassId target) {
    const auto& assignment = inferences.at(index).assignment;
    auto local = cfg;
    local.seed = derive_seed(cfg.seed, {index, static_cast<std::uint64_t>(target)});
    return LocalExplanation{topiclime_explain(f, x, target, lda, assignment, local), assignment};
  };
}

std::size_t cri_removal_count(std::size_t num_features, double k_fraction) {
  if (k_fraction < 0.0 || k_fraction > 1.0)
    throw Error(ErrorCode::InvalidArgument, "k_fraction must lie in [0, 1]");
  if (k_fraction == 0.0 || num_features == 0) return 0;
  const auto n = static_cast<std::size_t>(std::ceil(k_fraction * static_cast<double>(num_features) - 1e-12));
  return std::clamp<std::size_t>(n, 1, num_features);
}

namespace {

struct InstanceFidelity {
  double abs_error;
  double r2;
  double removal_impact;
};

InstanceFidelity instance_fidelity(const ProbabilisticClassifier& f, const ExplainerFn& explain,
                                   std::size_t index, const Document& x, double k_fraction) {
  const auto p = f.predict_proba(x.bow);
  const ClassId target = p.argmax();
  const auto local = explain(index, x, target);
  const auto& e = local.explanation;
  const double fx = p[static_cast<std::size_t>(target)];

  std::vector<FeatureId> removed;
  const auto n_remove = cri_removal_count(e.features.size(), k_fraction);
  for (std::size_t i = 0; i < n_remove; ++i) removed.push_back(e.features[i].feature);
  double impact = 0.0;
  if (!removed.empty()) {
    const auto reduced = remove_features(x.tokens, removed, e.kind,
                                         local.assignment ? &*local.assignment : nullptr);
    impact = fx - f.predict_proba(to_bow(reduced))[static_cast<std::size_t>(target)];
  }
  return {std::abs(fx - e.local_prediction), e.surrogate_r2, impact};
}

}  // namespace

FidelityReport fidelity(const ProbabilisticClassifier& f, const ExplainerFn& explain,
                        const TestView& test, double k_fraction) {
  FidelityReport r;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto inst = instance_fidelity(f, explain, i, *test.docs[i], k_fraction);
    r.mlae += inst.abs_error;
    r.mean_r2 += inst.r2;
    r.cri += inst.removal_impact;
  }
  r.instances = test.size();
  if (r.instances > 0) {
    const double n = static_cast<double>(r.instances);
    r.mlae /= n;
    r.mean_r2 /= n;
    r.cri /= n;
  }
  return r;
}

nlohmann::json FidelityReport::to_json() const {
  nlohmann::ordered_json j;
  j["mlae"] = mlae;
  j["mean_r2"] = mean_r2;
  j["cri"] = cri;
  j["instances"] = instances;
  return j;
}

double mlae(const ProbabilisticClassifier& f, const ExplainerFn& explain, const TestView& test) {
  return fidelity(f, explain, test, 0.0).mlae;
}

double mean_r2(const ProbabilisticClassifier& f, const ExplainerFn& explain, const TestView& test) {
  return fidelity(f, explain, test, 0.0).mean_r2;
}

double cri(const ProbabilisticClassifier& f, const ExplainerFn& explain, const TestView& test,
           double k_fraction) {
  return fidelity(f, explain, test, k_fraction).cri;
}

double explanation_recall(std::span<const WordId> local, const Explanation& explanation) {
  if (local.empty()) throw Error(ErrorCode::InvalidArgument, "empty local gold standard");
  std::size_t hits = 0;
  for (WordId w : local)
    if (explanation.contains(w)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(local.size());
}

EaResult explanatory_accuracy(const ProbabilisticClassifier& f, const GoldStandard& gs,
                              const TestView& test, const EaConfig& cfg) {
  EaResult r;
  double total = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& x = *test.docs[i];
    const ClassId y = test.labels[i];
    const auto local = local_gs(gs, x, y, cfg.k_fraction);
    if (local.relevant_words.empty()) {
      ++r.skipped;
      continue;
    }
    PerturbationConfig pc;
    pc.complexity = local.relevant_words.size();
    pc.num_samples = std::max(cfg.num_samples, pc.complexity + 1);
    pc.kernel_width = cfg.kernel_width;
    pc.seed = derive_seed(cfg.seed, {i, static_cast<std::uint64_t>(y)});
    total += explanation_recall(local.relevant_words, lime_explain(f, x, y, pc));
    ++r.evaluated;
  }
  if (r.evaluated == 0)
    throw Error(ErrorCode::AllLocalGsEmpty, "no test instance has a non-empty local gold standard");
  r.value = total / static_cast<double>(r.evaluated);
  return r;
}

std::optional<double> MetricSeries::at(std::size_t iteration) const {
  for (const auto& [it, v] : points_)
    if (it == iteration) return v;
  return std::nullopt;
}

void MetricSeries::add(std::size_t iteration, double value) {
  if (!points_.empty() && iteration <= points_.back().first)
    throw Error(ErrorCode::InvalidArgument, "metric iterations must be strictly increasing");
  points_.emplace_back(iteration, value);
}

nlohmann::json MetricSeries::to_json() const {
  nlohmann::ordered_json j;
  j["metric"] = name_;
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& [it, v] : points_) pts.push_back({it, v});
  j["points"] = std::move(pts);
  return j;
}

std::string format_metric(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string metrics_csv(std::span<const MetricSeries> series) {
  std::map<std::size_t, std::vector<std::pair<std::size_t, double>>> rows;  // iteration -> (series, value)
  for (std::size_t s = 0; s < series.size(); ++s)
    for (const auto& [it, v] : series[s].points()) rows[it].emplace_back(s, v);
  std::string out = "iteration,metric,value\n";
  for (const auto& [it, entries] : rows)
    for (const auto& [s, v] : entries)
      out += std::to_string(it) + "," + series[s].name() + "," + format_metric(v) + "\n";
  return out;
}

}  // namespace semloop
