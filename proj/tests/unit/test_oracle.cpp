#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "semloop/error.hpp"
#include "semloop/oracle.hpp"
#include "semloop/synthetic.hpp"
#include "semloop/topic_model.hpp"

using namespace semloop;

namespace {

// Class 0: words 0 (+2), 1 (+1), 2 (-1). Class 1: words 3 (+1.5), 0 (-0.5).
GoldStandard hand_gs() {
  return GoldStandard(FeatureKind::word,
                      {{{0, 2.0}, {1, 1.0}, {2, -1.0}}, {{3, 1.5}, {0, -0.5}}},
                      {"w0", "w1", "w2", "w3", "w4"}, 0.9);
}

Explanation word_explanation(ClassId cls, std::vector<FeatureWeight> features) {
  Explanation e;
  e.target_class = cls;
  e.kind = FeatureKind::word;
  e.features = std::move(features);
  return e;
}

}  // namespace

TEST_CASE("marker words lead the word gold standard") {
  const auto corpus = marker_corpus(3, 40, 10, 30, 5);
  const auto gs = build_word_gs(corpus, {});
  CHECK(gs.kind() == FeatureKind::word);
  CHECK(gs.source_f1() > 0.9);
  for (ClassId c = 0; c < 3; ++c) {
    const auto marker = corpus.vocab().find("m" + std::to_string(c));
    REQUIRE(marker.has_value());
    REQUIRE(!gs.weights(c).empty());
    CHECK(gs.weights(c).front().feature == *marker);
    for (const auto& e : gs.weights(c)) CHECK(std::abs(e.weight) > kGsMembershipThreshold);
  }
}

TEST_CASE("the topic gold standard ranks the class topic first") {
  const auto corpus = topic_corpus(3, 15, 30, 30, 0.9, 4);
  LdaParams p;
  p.num_topics = 3;
  p.iterations = 150;
  p.seed = 2;
  const auto lda = fit_lda(corpus, p);
  const auto gs = build_topic_gs(corpus, lda, {});
  CHECK(gs.kind() == FeatureKind::topic);
  CHECK(gs.source_f1() > 0.9);
  std::set<FeatureId> leaders;
  for (ClassId c = 0; c < 3; ++c) {
    REQUIRE(!gs.weights(c).empty());
    leaders.insert(gs.weights(c).front().feature);
  }
  CHECK(leaders.size() == 3);
}

TEST_CASE("gold standard lists") {
  const auto gs = hand_gs();
  CHECK(gs.positive_part(0) == std::vector<FeatureWeight>{{0, 2.0}, {1, 1.0}});
  CHECK(gs.negative_part(0) == std::vector<FeatureWeight>{{2, -1.0}});
  CHECK(gs.contains(1, 0));
  CHECK(!gs.contains(1, 4));
  CHECK(gs.weight_of(1, 3) == 1.5);
  CHECK(!gs.weight_of(0, 3).has_value());
  const auto back = GoldStandard::from_json(gs.to_json());
  CHECK(back.weights(0) == gs.weights(0));
  CHECK(back.weights(1) == gs.weights(1));
  CHECK(back.source_f1() == gs.source_f1());

  SUBCASE("membership threshold") {
    Eigen::MatrixXd w(1, 3);
    w << 1e-7, -2e-6, 0.5;
    const auto g = GoldStandard::from_weights(FeatureKind::word, w, {"a", "b", "c"}, 1.0);
    CHECK(g.weights(0) == std::vector<FeatureWeight>{{2, 0.5}, {1, -2e-6}});
  }
  SUBCASE("ties break on the feature name") {
    std::vector<FeatureWeight> v{{0, 1.0}, {1, 1.0}, {2, 3.0}};
    sort_by_relevance(v, {"zeta", "alpha", "mid"});
    CHECK(v == std::vector<FeatureWeight>{{2, 3.0}, {1, 1.0}, {0, 1.0}});
    sort_by_relevance(v, {});
    CHECK(v == std::vector<FeatureWeight>{{2, 3.0}, {0, 1.0}, {1, 1.0}});
  }
}

TEST_CASE("local gold standard") {
  // Ten positive words for class 0, ranked 0..9.
  std::vector<FeatureWeight> ranking;
  for (int w = 0; w < 10; ++w) ranking.push_back({w, 10.0 - w});
  const GoldStandard gs(FeatureKind::word, {ranking}, std::vector<std::string>(12, "w"), 1.0);

  // k = 0.2 keeps the top two words; only those present in x survive.
  CHECK(local_gs(gs, make_document("a", {1, 0, 5}), 0, 0.2).relevant_words == std::vector<WordId>{0, 1});
  CHECK(local_gs(gs, make_document("b", {1, 7}), 0, 0.2).relevant_words == std::vector<WordId>{1});
  CHECK(local_gs(gs, make_document("c", {4, 11}), 0, 0.2).relevant_words.empty());
  // ceil(0.25 * 10) = 3.
  CHECK(local_gs(gs, make_document("d", {2, 3}), 0, 0.25).relevant_words == std::vector<WordId>{2});
  CHECK(local_gs(gs, make_document("e", {9}), 0, 1.0).relevant_words == std::vector<WordId>{9});
  CHECK(local_gs(gs, make_document("f", {0}), 0, 0.2).instance_id == "f");
  CHECK_THROWS_AS(local_gs(gs, make_document("g", {0}), 0, 0.0), Error);

  const GoldStandard topics(FeatureKind::topic, {ranking}, {}, 1.0);
  try {
    local_gs(topics, make_document("h", {0}), 0, 0.2);
    FAIL("expected KindMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::KindMismatch);
  }
}

TEST_CASE("simulated correction") {
  const auto gs = hand_gs();
  const auto x = make_document("x", {0, 1, 2, 3, 4});

  SUBCASE("correct prediction") {
    const auto e = word_explanation(0, {{0, 0.3}, {4, 0.2}, {2, -0.1}, {3, 0.05}});
    const auto fb = simulated_correction(gs, x, 0, 0, e);
    CHECK(fb.true_label == 0);
    CHECK(fb.destructive == std::vector<FeatureId>{3, 4});
    CHECK(fb.constructive.size() == 1);
    CHECK(fb.constructive.at(0) == gs.positive_part(0));
    CHECK(fb.relevance.at(0) == gs.weights(0));
  }
  SUBCASE("wrong prediction carries both classes") {
    const auto e = word_explanation(1, {{3, 0.4}, {1, 0.1}});
    const auto fb = simulated_correction(gs, x, 0, 1, e);
    CHECK(fb.destructive == std::vector<FeatureId>{3});
    CHECK(fb.constructive.size() == 2);
    CHECK(fb.relevance.at(1) == gs.weights(1));
    CHECK(CorrectionFeedback::from_json(fb.to_json()) == fb);
  }
  SUBCASE("kind mismatch") {
    Explanation e = word_explanation(0, {{0, 1.0}});
    e.kind = FeatureKind::topic;
    CHECK_THROWS_AS(simulated_correction(gs, x, 0, 0, e), Error);
  }
}

TEST_CASE("simulated correction invariants") {
  const auto gs = hand_gs();
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 200; ++trial) {
    Explanation e;
    e.target_class = static_cast<ClassId>(gen() % 2);
    for (FeatureId f = 0; f < 5; ++f)
      if (gen() % 2) e.features.push_back({f, static_cast<double>(gen() % 7) - 3.0});
    const auto y = static_cast<ClassId>(gen() % 2);
    const auto pred = static_cast<ClassId>(gen() % 2);
    const auto fb = simulated_correction(gs, make_document("x", {0, 1, 2, 3, 4}), y, pred, e);
    for (FeatureId f : fb.destructive) {
      CHECK(e.contains(f));
      CHECK(!gs.contains(y, f));
    }
    for (const auto& f : e.features)
      if (!gs.contains(y, f.feature))
        CHECK(std::binary_search(fb.destructive.begin(), fb.destructive.end(), f.feature));
    for (const auto& [cls, list] : fb.constructive)
      for (const auto& c : list) CHECK(c.weight > 0.0);
  }
}
