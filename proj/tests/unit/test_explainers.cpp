#include <doctest.h>

#include <set>

#include "fixtures.hpp"
#include "semloop/error.hpp"
#include "semloop/explainers.hpp"
#include "semloop/topic_model.hpp"

using namespace semloop;
using namespace semloop::testing;

namespace {

PerturbationConfig config(std::size_t complexity, std::uint64_t seed = 1, std::size_t samples = 1000) {
  PerturbationConfig c;
  c.complexity = complexity;
  c.seed = seed;
  c.num_samples = samples;
  return c;
}

// Three topics over nine words: topic t owns words 3t .. 3t+2.
LdaModel three_topics() {
  std::vector<double> phi(27, 0.0);
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t w = 0; w < 3; ++w) phi[t * 9 + t * 3 + w] = 1.0 / 3.0;
  return LdaModel(3, 1.0 / 3, 0.01, phi, 0, 1);
}

TopicAssignment by_block(const std::vector<WordId>& tokens) {
  TopicAssignment a;
  for (WordId w : tokens) a.topics.push_back(w / 3);
  return a;
}

}  // namespace

TEST_CASE("LIME recovers the coefficients of a linear classifier") {
  const auto fx = linear_fixture(40, 50, 10, 0.04, 13);
  const PresenceLinear f(fx.coef, 0.5);
  std::size_t sign_agree = 0, total = 0;
  double r2_sum = 0.0, err_sum = 0.0;
  for (std::size_t i = 0; i < fx.docs.size(); ++i) {
    const auto e = lime_explain(f, fx.docs[i], 1, config(10, i));
    REQUIRE(e.features.size() == 10);
    std::vector<double> est, truth;
    for (const auto& fw : e.features) {
      const double c = fx.coef[static_cast<std::size_t>(fw.feature)];
      sign_agree += (fw.weight > 0) == (c > 0);
      ++total;
      est.push_back(std::abs(fw.weight));
      truth.push_back(std::abs(c));
    }
    CHECK(spearman(est, truth) > 0.9);
    r2_sum += e.surrogate_r2;
    err_sum += std::abs(e.model_prediction - e.local_prediction);
  }
  CHECK(sign_agree == total);
  CHECK(r2_sum / 50.0 > 0.95);
  CHECK(err_sum / 50.0 < 0.01);
}

TEST_CASE("a constant predictor gets zero attributions") {
  const Constant f({0.3, 0.7}, 20);
  const auto doc = make_document("c", {1, 4, 7, 9, 4});
  const auto e = lime_explain(f, doc, 1, config(3));
  for (const auto& fw : e.features) CHECK(std::abs(fw.weight) < 1e-9);
  CHECK(e.surrogate_r2 == 0.0);
}

TEST_CASE("explanations are deterministic and well formed") {
  const auto fx = linear_fixture(30, 1, 12, 0.03, 2);
  const PresenceLinear f(fx.coef, 0.5);
  const auto a = lime_explain(f, fx.docs[0], 1, config(5, 77));
  const auto b = lime_explain(f, fx.docs[0], 1, config(5, 77));
  CHECK(a == b);
  CHECK(a.features.size() <= 5);
  std::set<FeatureId> ids;
  for (std::size_t i = 0; i < a.features.size(); ++i) {
    ids.insert(a.features[i].feature);
    if (i > 0) CHECK(std::abs(a.features[i - 1].weight) >= std::abs(a.features[i].weight));
  }
  CHECK(ids.size() == a.features.size());
  CHECK(Explanation::from_json(a.to_json()) == a);
  for (const auto& fw : a.positive_part()) CHECK(fw.weight > 0.0);
  for (const auto& fw : a.negative_part()) CHECK(fw.weight < 0.0);
}

TEST_CASE("empty documents cannot be explained") {
  const Constant f({0.5, 0.5}, 5);
  try {
    lime_explain(f, make_document("e", {}), 0, config(2));
    FAIL("expected EmptyDocument");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyDocument);
  }
}

TEST_CASE("topicLIME finds the topic the classifier depends on") {
  const auto lda = three_topics();
  const std::vector<WordId> tokens{0, 1, 3, 4, 5, 6, 7, 8, 2, 4};
  const auto doc = make_document("t", tokens);
  const auto assignment = by_block(tokens);
  for (int t = 0; t < 3; ++t) {
    std::set<WordId> words{3 * t, 3 * t + 1, 3 * t + 2};
    const WordSetIndicator f(words, 9);
    const auto e = topiclime_explain(f, doc, 1, lda, assignment, config(3, 4, 500));
    REQUIRE(!e.features.empty());
    CHECK(e.kind == FeatureKind::topic);
    CHECK(e.features.front().feature == t);
  }
}

TEST_CASE("topicLIME feature counts") {
  const auto lda = three_topics();
  const WordSetIndicator f({0}, 9);
  SUBCASE("single-topic document has one feature") {
    const std::vector<WordId> tokens{0, 1, 2, 1};
    const auto e = topiclime_explain(f, make_document("s", tokens), 1, lda, by_block(tokens), config(3));
    CHECK(e.features.size() == 1);
  }
  SUBCASE("requested complexity bounds the features") {
    const std::vector<WordId> tokens{0, 3, 6, 1, 4, 7};
    const auto e = topiclime_explain(f, make_document("m", tokens), 1, lda, by_block(tokens), config(2));
    CHECK(e.features.size() <= 2);
  }
  SUBCASE("no active topics") {
    try {
      topiclime_explain(f, make_document("x", {0}), 1, lda, TopicAssignment{}, config(3));
      FAIL("expected NoActiveTopics");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NoActiveTopics);
    }
  }
}

TEST_CASE("perturbation neighborhoods") {
  const std::vector<WordId> tokens{0, 3, 3, 6, 1, 4, 7, 3};
  const auto doc = make_document("n", tokens);
  const auto assignment = by_block(tokens);

  SUBCASE("word neighborhood") {
    const auto hood = perturbation_neighborhood(doc, FeatureKind::word, nullptr, 200, 5);
    CHECK(hood.features == std::vector<FeatureId>{0, 1, 3, 4, 6, 7});
    CHECK(hood.documents.front() == tokens);
    for (std::size_t s = 0; s < hood.documents.size(); ++s) {
      const auto& z = hood.indicators[s];
      for (std::size_t j = 0; j < hood.features.size(); ++j) {
        const auto n = std::count(hood.documents[s].begin(), hood.documents[s].end(), hood.features[j]);
        const auto full = std::count(tokens.begin(), tokens.end(), hood.features[j]);
        // A masked word loses every occurrence; a kept one keeps all.
        CHECK(n == (z[j] ? full : 0));
      }
    }
  }
  SUBCASE("topic neighborhood") {
    const auto hood = perturbation_neighborhood(doc, FeatureKind::topic, &assignment, 200, 5);
    CHECK(hood.features == std::vector<FeatureId>{0, 1, 2});
    for (std::size_t s = 0; s < hood.documents.size(); ++s) {
      for (WordId w : hood.documents[s]) CHECK(hood.indicators[s][static_cast<std::size_t>(w / 3)] == 1);
    }
  }
  SUBCASE("identity and full masks") {
    const std::vector<FeatureId> features{0, 1, 2};
    const std::vector<std::uint8_t> ones{1, 1, 1}, zeros{0, 0, 0}, drop_middle{1, 0, 1};
    CHECK(apply_mask(tokens, features, ones, FeatureKind::topic, &assignment) == tokens);
    CHECK(apply_mask(tokens, features, zeros, FeatureKind::topic, &assignment).empty());
    const auto kept = apply_mask(tokens, features, drop_middle, FeatureKind::topic, &assignment);
    const auto in_topic_1 = std::count_if(tokens.begin(), tokens.end(), [](WordId w) { return w / 3 == 1; });
    CHECK(kept.size() == tokens.size() - static_cast<std::size_t>(in_topic_1));
  }
  SUBCASE("removal") {
    const std::vector<FeatureId> gone{3};
    CHECK(remove_features(tokens, gone, FeatureKind::word, nullptr) == std::vector<WordId>{0, 6, 1, 4, 7});
    const std::vector<FeatureId> topic{0};
    CHECK(remove_features(tokens, topic, FeatureKind::topic, &assignment) == std::vector<WordId>{3, 3, 6, 4, 7, 3});
  }
}

TEST_CASE("configuration checks") {
  PerturbationConfig c = config(5, 1, 5);
  CHECK_THROWS_AS(c.validate(), Error);
  c.num_samples = 6;
  CHECK_NOTHROW(c.validate());
  c.ridge = -1.0;
  CHECK_THROWS_AS(c.validate(), Error);
}
