#include <doctest.h>

#include <array>
#include <cmath>
#include <map>
#include <set>

#include "fixtures.hpp"
#include "semloop/error.hpp"
#include "semloop/strategies.hpp"

using namespace semloop;
using namespace semloop::testing;

namespace {

// Three topics over nine words: topic t owns words 3t .. 3t+2.
LdaModel three_topics() {
  std::vector<double> phi(27, 0.0);
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t w = 0; w < 3; ++w) phi[t * 9 + t * 3 + w] = 1.0 / 3.0;
  return LdaModel(3, 1.0 / 3, 0.01, phi, 0, 1);
}

// P(first word's class) = table entry; class 0 otherwise.
class FirstWordLookup final : public ProbabilisticClassifier {
 public:
  explicit FirstWordLookup(std::map<WordId, double> conf) : conf_(std::move(conf)) {}
  std::size_t num_classes() const override { return 2; }
  std::size_t num_features() const override { return 10; }
  ClassDistribution predict_proba(const BagOfWords& x) const override {
    const double p = conf_.at(x.front().first);
    return ClassDistribution({p, 1.0 - p});
  }

 private:
  std::map<WordId, double> conf_;
};

Explanation topic_explanation(ClassId cls, std::vector<FeatureWeight> features) {
  Explanation e;
  e.target_class = cls;
  e.kind = FeatureKind::topic;
  e.features = std::move(features);
  return e;
}

// Literal Alg. 2 case table. e, g: 0 absent, 1 positive, 2 negative.
TopicCase expected_case(int e, int g) {
  if (e != 0 && g == 0) return TopicCase::decrease;
  if (e == 2 && g == 1) return TopicCase::increase;
  if (e == 0 && g == 1) return TopicCase::increase;
  return TopicCase::keep;
}

double signed_value(int state, double magnitude) { return state == 1 ? magnitude : -magnitude; }

}  // namespace

TEST_CASE("select_query") {
  const FirstWordLookup f({{0, 0.9}, {1, 0.6}, {2, 0.2}, {3, 0.4}});
  const std::vector<Document> docs{make_document("a", {0}), make_document("b", {1}),
                                   make_document("c", {2}), make_document("d", {3})};
  // Argmax probabilities 0.9, 0.6, 0.8: the 0.6 instance wins.
  const std::vector<std::size_t> pool{0, 1, 2};
  CHECK(select_query(f, docs, pool) == 1);
  const std::vector<std::size_t> single{2};
  CHECK(select_query(f, docs, single) == 2);
  // 0.6 and 0.6 (class 1 at 0.6 for doc 3): tie to the smaller id.
  const std::vector<std::size_t> tied{3, 1};
  CHECK(select_query(f, docs, tied) == 1);
  try {
    select_query(f, docs, std::vector<std::size_t>{});
    FAIL("expected EmptyPool");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyPool);
  }
}

TEST_CASE("caipi_destructive") {
  // "oil oil price rise"
  const auto x = make_document("x", {0, 0, 1, 2});
  const std::vector<FeatureId> oil{0};
  const auto out = caipi_destructive(x, 1, 1, oil, 10);
  REQUIRE(out.size() == 10);
  for (const auto& c : out) {
    CHECK(c.tokens == std::vector<WordId>{1, 2});
    CHECK(c.label == 1);
    CHECK(c.provenance == Provenance::caipi_masked);
  }
  CHECK(caipi_destructive(x, 1, 1, {}, 10).empty());
  CHECK(caipi_destructive(x, 1, 0, oil, 10).empty());
  const std::vector<FeatureId> all{0, 1, 2};
  CHECK(caipi_destructive(x, 1, 1, all, 10).empty());

  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<WordId> tokens;
    for (int i = 0; i < 20; ++i) tokens.push_back(static_cast<WordId>(gen() % 8));
    std::vector<FeatureId> dest;
    for (FeatureId w = 0; w < 8; ++w)
      if (gen() % 3 == 0) dest.push_back(w);
    for (const auto& c : caipi_destructive(make_document("r", tokens), 0, 0, dest, 2))
      for (WordId w : c.tokens) CHECK(std::find(dest.begin(), dest.end(), w) == dest.end());
  }
}

TEST_CASE("caipi_constructive") {
  const std::vector<WordId> one{7};
  const auto single = caipi_constructive(0, 1, one, 3, 12, 5);
  REQUIRE(single.size() == 3);
  for (const auto& c : single) {
    CHECK(c.tokens == std::vector<WordId>(12, 7));
    CHECK(c.label == 0);
  }
  CHECK(caipi_constructive(0, 1, {}, 3, 12, 5).empty());
  CHECK(caipi_constructive(0, 0, one, 3, 12, 5).empty());

  // Four-word support, 10 x 60 draws: chi-squared against uniform (df 3, 99.9%: 16.27).
  const std::vector<WordId> four{1, 4, 6, 9};
  const auto docs = caipi_constructive(2, 0, four, 10, 60, 11);
  REQUIRE(docs.size() == 10);
  std::map<WordId, int> freq;
  for (const auto& c : docs) {
    CHECK(c.tokens.size() == 60);
    for (WordId w : c.tokens) ++freq[w];
  }
  CHECK(freq.size() == 4);
  double chi2 = 0.0;
  for (const auto& [w, n] : freq) chi2 += (n - 150.0) * (n - 150.0) / 150.0;
  CHECK(chi2 < 16.27);
  CHECK(caipi_constructive(2, 0, four, 10, 60, 11).front().tokens == docs.front().tokens);

  SUBCASE("support from the local gold standard") {
    const GoldStandard gs(FeatureKind::word, {{{3, 2.0}, {5, 1.0}}, {{8, 1.0}}}, std::vector<std::string>(10, "w"), 1.0);
    const auto x = make_document("x", {3, 5, 8});
    for (const auto& c : caipi_constructive(x, 0, 1, gs, 0.5, 4, 6, 2))
      CHECK(c.tokens == std::vector<WordId>(6, 3));
  }
}

TEST_CASE("topic case arithmetic") {
  const std::array<double, 3> theta{0.2, 0.5, 0.3};
  const std::vector<FeatureWeight> knowledge{{0, 0.5}};
  const auto e = topic_explanation(0, {{1, 0.4}});
  // Topic 0 is absent and GS-positive, topic 1 is used but irrelevant.
  const auto m = manipulate_mixture(theta, knowledge, e, 0.95);
  CHECK(m.cases == std::vector<TopicCase>{TopicCase::increase, TopicCase::decrease, TopicCase::keep});
  CHECK(m.pre_psi[0] == doctest::Approx(0.685).epsilon(1e-12));
  CHECK(m.pre_psi[0] == doctest::Approx(0.2 + 0.475 + 0.01).epsilon(1e-12));
  CHECK(m.pre_psi[1] == 0.0);
  CHECK(m.pre_psi[2] == 0.3);
  CHECK(m.distribution[0] == doctest::Approx(0.685 / 0.985).epsilon(1e-12));

  SUBCASE("all topics kept leaves the mixture unchanged") {
    const std::vector<FeatureWeight> k{{0, 0.3}, {1, -0.2}};
    const auto keep = manipulate_mixture(theta, k, topic_explanation(0, {{0, 0.1}, {1, -0.1}}), 0.95);
    for (std::size_t t = 0; t < 3; ++t) CHECK(keep.distribution[t] == doctest::Approx(theta[t]).epsilon(1e-12));
    CHECK(!keep.fallback);
  }
  SUBCASE("zeroed topics are never sampled") {
    const auto lda = three_topics();
    const auto s = semantic_correction(theta, knowledge, e, 0.95, lda, 400, 3);
    CHECK(s.tokens.size() == 400);
    for (std::size_t n = 0; n < s.tokens.size(); ++n) {
      CHECK(s.topics[n] != 1);
      CHECK(s.tokens[n] / 3 == s.topics[n]);
    }
  }
  SUBCASE("degenerate mixtures") {
    const std::array<double, 3> only_one{0.0, 1.0, 0.0};
    const std::vector<FeatureWeight> positive{{2, 0.7}};
    // Topic 1 is zeroed; topic 2 is kept at its zero share.
    const auto fb = manipulate_mixture(only_one, positive, topic_explanation(0, {{1, 0.5}, {2, 0.3}}), 0.95);
    CHECK(fb.fallback);
    CHECK(fb.distribution == std::vector<double>{0.0, 0.0, 1.0});
    const std::vector<FeatureWeight> negative{{2, -0.7}};
    try {
      manipulate_mixture(only_one, negative, topic_explanation(0, {{1, 0.5}}), 0.95);
      FAIL("expected DegenerateMixture");
    } catch (const Error& err) {
      CHECK(err.code() == ErrorCode::DegenerateMixture);
    }
  }
  SUBCASE("lambda and kind checks") {
    CHECK_THROWS_AS(manipulate_mixture(theta, knowledge, e, 1.5), Error);
    Explanation words = e;
    words.kind = FeatureKind::word;
    CHECK_THROWS_AS(manipulate_mixture(theta, knowledge, words, 0.5), Error);
  }
}

TEST_CASE("semantic completion") {
  const auto lda = three_topics();
  const std::array<double, 3> theta{0.5, 0.3, 0.2};
  const std::vector<FeatureWeight> knowledge{{1, 0.6}, {2, 0.4}};
  const auto e = topic_explanation(0, {{1, 0.2}});
  std::vector<TopicId> topics;
  const auto tokens = semantic_completion(theta, knowledge, e, 0.95, lda, 50, 4, &topics);
  CHECK(tokens.size() == 50);
  for (TopicId t : topics) CHECK(t == 2);

  const auto covered = topic_explanation(0, {{1, 0.2}, {2, 0.1}});
  CHECK(semantic_completion(theta, knowledge, covered, 0.95, lda, 50, 4).empty());

  const auto both_missing = topic_explanation(0, {{0, 0.2}});
  const auto mix = completion_distribution(theta, knowledge, both_missing, 1.0);
  CHECK(mix[0] == 0.0);
  CHECK(mix[1] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(mix[2] == doctest::Approx(0.4).epsilon(1e-12));
  const auto half = completion_distribution(theta, knowledge, both_missing, 0.5);
  CHECK(half[1] == doctest::Approx(0.5 * 0.6 + 0.5 * 0.6).epsilon(1e-12));
  CHECK(half[2] == doctest::Approx(0.5 * 0.4 + 0.5 * 0.4).epsilon(1e-12));
  CHECK_THROWS_AS(completion_distribution(theta, knowledge, both_missing, -0.1), Error);
}

TEST_CASE("branch by case enumeration on three topics") {
  const auto lda = three_topics();
  // Each topic owns 3 tokens of x.
  const auto x = make_document("x", {0, 3, 6, 1, 4, 7, 2, 5, 8});
  Inference inf;
  inf.mixture = TopicMixture({0.2, 0.5, 0.3});
  for (WordId w : x.tokens) inf.assignment.topics.push_back(w / 3);
  StrategyConfig cfg;
  cfg.M = 10;
  cfg.lambda = 0.95;
  cfg.counterexample_length = 20;

  std::size_t combos = 0, degenerate = 0;
  std::map<PushBranch, std::size_t> seen;
  for (int code = 0; code < 729; ++code) {
    std::array<int, 3> e_state{}, g_state{};
    int c = code;
    for (int t = 0; t < 3; ++t) {
      e_state[t] = c % 3;
      c /= 3;
      g_state[t] = c % 3;
      c /= 3;
    }
    std::vector<FeatureWeight> expl, knowledge;
    for (int t = 0; t < 3; ++t) {
      if (e_state[t]) expl.push_back({t, signed_value(e_state[t], 0.1 * (t + 1))});
      if (g_state[t]) knowledge.push_back({t, signed_value(g_state[t], 0.5)});
    }
    const auto explanation = topic_explanation(0, expl);

    std::vector<FeatureId> dest;
    bool any_positive_gs = false;
    for (int t = 0; t < 3; ++t) {
      if (e_state[t] && !g_state[t]) dest.push_back(t);
      any_positive_gs = any_positive_gs || g_state[t] == 1;
    }
    std::vector<double> expected_pre(3);
    for (std::size_t t = 0; t < 3; ++t) {
      const double th = inf.mixture[t];
      switch (expected_case(e_state[t], g_state[t])) {
        case TopicCase::keep: expected_pre[t] = th; break;
        case TopicCase::increase: expected_pre[t] = th + 0.95 * 0.5 + 0.05 * th; break;
        case TopicCase::decrease: expected_pre[t] = 0.0; break;
      }
    }
    const bool all_zero = std::all_of(expected_pre.begin(), expected_pre.end(), [](double v) { return v == 0.0; });

    // Case table.
    if (all_zero && !any_positive_gs) {
      CHECK_THROWS_AS(manipulate_mixture(inf.mixture.values(), knowledge, explanation, 0.95), Error);
      ++degenerate;
    } else {
      const auto m = manipulate_mixture(inf.mixture.values(), knowledge, explanation, 0.95);
      for (std::size_t t = 0; t < 3; ++t) {
        CHECK(m.cases[t] == expected_case(e_state[t], g_state[t]));
        CHECK(m.pre_psi[t] == doctest::Approx(expected_pre[t]).epsilon(1e-12));
        CHECK(m.pre_psi[t] >= 0.0);
      }
      CHECK(std::accumulate(m.distribution.begin(), m.distribution.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(m.fallback == all_zero);
    }

    // Branches: right for partially wrong reasons, and false prediction
    // (the same knowledge and explanation serve the predicted class).
    for (ClassId predicted : {0, 1}) {
      PushInput in;
      in.x = &x;
      in.inference = &inf;
      in.y = 0;
      in.predicted = predicted;
      in.explanation_y = &explanation;
      in.explanation_predicted = &explanation;
      in.knowledge_y = knowledge;
      in.knowledge_predicted = knowledge;
      if (predicted == 1 && all_zero && !any_positive_gs) {
        CHECK_THROWS_AS(semantic_push(in, lda, cfg, 1), Error);
        continue;
      }
      const auto r = semantic_push(in, lda, cfg, static_cast<std::uint64_t>(code));
      ++combos;
      CHECK(r.destructive == dest);
      ++seen[r.branch];
      if (predicted == 0 && dest.empty()) {
        CHECK(r.branch == PushBranch::none);
        CHECK(r.counterexamples.empty());
      } else if (predicted == 0) {
        CHECK(r.branch == PushBranch::partially_wrong_reasons);
        for (const auto& ce : r.counterexamples) {
          CHECK(ce.label == 0);
          CHECK(ce.provenance == Provenance::semantic_completion);
          CHECK(ce.topics.size() == ce.tokens.size());
          for (std::size_t n = 0; n < ce.tokens.size(); ++n) {
            CHECK(std::find(dest.begin(), dest.end(), ce.topics[n]) == dest.end());
            CHECK(ce.tokens[n] / 3 == ce.topics[n]);
          }
        }
      } else {
        CHECK(r.branch == PushBranch::false_prediction);
        REQUIRE(r.counterexamples.size() == 10);
        for (std::size_t i = 0; i < 10; ++i) {
          const auto& ce = r.counterexamples[i];
          CHECK(ce.label == (i < 5 ? 0 : 1));
          CHECK(ce.tokens.size() == 20);
          for (TopicId t : ce.topics) {
            CHECK(expected_case(e_state[static_cast<std::size_t>(t)], g_state[static_cast<std::size_t>(t)]) !=
                  TopicCase::decrease);
          }
        }
        CHECK(r.fallback == all_zero);
      }
    }
  }
  CHECK(seen[PushBranch::none] > 0);
  CHECK(seen[PushBranch::partially_wrong_reasons] > 0);
  CHECK(seen[PushBranch::false_prediction] > 0);
  CHECK(degenerate > 0);
  CHECK(combos > 1000);
}

TEST_CASE("false prediction with odd M favors the true class") {
  const auto lda = three_topics();
  const auto x = make_document("x", {0, 3, 6});
  Inference inf;
  inf.mixture = TopicMixture({0.4, 0.3, 0.3});
  inf.assignment.topics = {0, 1, 2};
  const auto e = topic_explanation(0, {{0, 0.2}});
  const std::vector<FeatureWeight> k{{0, 0.5}};
  StrategyConfig cfg;
  cfg.M = 3;
  PushInput in{&x, &inf, 0, 1, &e, &e, k, k};
  const auto r = semantic_push(in, lda, cfg, 2);
  REQUIRE(r.counterexamples.size() == 3);
  CHECK(r.counterexamples[0].label == 0);
  CHECK(r.counterexamples[1].label == 0);
  CHECK(r.counterexamples[2].label == 1);
  in.explanation_predicted = nullptr;
  CHECK_THROWS_AS(semantic_push(in, lda, cfg, 2), Error);
}

TEST_CASE("strategy names") {
  for (auto s : {Strategy::active_learning, Strategy::caipi_d, Strategy::caipi_dc, Strategy::semantic_push})
    CHECK(parse_strategy(to_string(s)) == s);
  CHECK_THROWS_AS(parse_strategy("greedy"), Error);
  StrategyConfig cfg;
  cfg.lambda = 2.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
