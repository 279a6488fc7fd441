#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>

#include "semloop/error.hpp"
#include "semloop/synthetic.hpp"
#include "semloop/topic_model.hpp"

using namespace semloop;

namespace {

// Generating topic of every word in a topic_corpus vocabulary.
std::map<WordId, std::size_t> generating_topics(const LabeledCorpus& corpus, std::size_t num_topics,
                                                std::size_t words_per_topic) {
  std::map<WordId, std::size_t> out;
  for (std::size_t i = 0; i < num_topics * words_per_topic; ++i)
    if (auto id = corpus.vocab().find(pseudo_word(i))) out[*id] = i / words_per_topic;
  return out;
}

// Learned topic whose top words come from generating topic g.
TopicId learned_topic_for(const LdaModel& lda, const std::map<WordId, std::size_t>& gen, std::size_t g) {
  for (std::size_t t = 0; t < lda.num_topics(); ++t)
    if (gen.at(lda.top_words(static_cast<TopicId>(t), 1).front()) == g) return static_cast<TopicId>(t);
  return -1;
}

// Two topics over four words: {0, 1} and {2, 3}.
LdaModel disjoint_pair() {
  return LdaModel(2, 0.5, 0.01, {0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5}, 0, 1);
}

LdaParams params(std::size_t k, std::uint64_t seed = 3, std::size_t sweeps = 200) {
  LdaParams p;
  p.num_topics = k;
  p.iterations = sweeps;
  p.seed = seed;
  return p;
}

}  // namespace

TEST_CASE("fit_lda recovers disjoint generating topics") {
  const auto corpus = topic_corpus(2, 20, 40, 30, 1.0, 11);
  const auto lda = fit_lda(corpus, params(2));
  const auto gen = generating_topics(corpus, 2, 20);
  for (TopicId t = 0; t < 2; ++t) {
    const auto top = lda.top_words(t, 10);
    const auto g = gen.at(top.front());
    for (WordId w : top) CHECK(gen.at(w) == g);
  }
  for (TopicId t = 0; t < 2; ++t) {
    const auto row = lda.topic_words(t);
    CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::all_of(row.begin(), row.end(), [](double p) { return p >= 0.0; }));
  }
}

TEST_CASE("fit_lda is deterministic and validates input") {
  const auto corpus = topic_corpus(2, 10, 10, 20, 0.9, 5);
  const auto a = fit_lda(corpus, params(2, 9, 50));
  const auto b = fit_lda(corpus, params(2, 9, 50));
  for (TopicId t = 0; t < 2; ++t) {
    const auto ra = a.topic_words(t);
    const auto rb = b.topic_words(t);
    CHECK(std::equal(ra.begin(), ra.end(), rb.begin()));
  }
  CHECK_THROWS_AS(fit_lda(corpus, params(corpus.vocab().size() + 1)), Error);
  try {
    fit_lda(corpus, params(corpus.vocab().size() + 1));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateVocabulary);
  }
  LabeledCorpus empty = corpus.subset(std::vector<std::size_t>{});
  try {
    fit_lda(empty, params(2));
    FAIL("expected EmptyCorpus");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyCorpus);
  }
}

TEST_CASE("Gibbs sweeps conserve word counts") {
  const auto corpus = topic_corpus(3, 8, 6, 15, 0.8, 2);
  std::vector<int> freq(corpus.vocab().size(), 0);
  for (const auto& d : corpus.documents)
    for (WordId w : d.tokens) ++freq[static_cast<std::size_t>(w)];
  std::size_t sweeps = 0;
  bool conserved = true;
  fit_lda(corpus, params(3, 4, 25), [&](const GibbsCounts& c) {
    ++sweeps;
    long total = 0;
    for (std::size_t w = 0; w < freq.size(); ++w) {
      int sum = 0;
      for (std::size_t k = 0; k < c.num_topics; ++k) sum += c.word_topic[w * c.num_topics + k];
      conserved = conserved && sum == freq[w];
      total += sum;
    }
    const long totals = std::accumulate(c.topic_totals.begin(), c.topic_totals.end(), 0L);
    conserved = conserved && totals == total;
  });
  CHECK(sweeps == 25);
  CHECK(conserved);
}

TEST_CASE("infer_mixture") {
  const auto corpus = topic_corpus(2, 20, 40, 30, 1.0, 11);
  const auto lda = fit_lda(corpus, params(2));
  const auto gen = generating_topics(corpus, 2, 20);
  const TopicId t0 = learned_topic_for(lda, gen, 0);
  REQUIRE(t0 >= 0);

  std::vector<WordId> tokens;
  for (const auto& [w, g] : gen)
    if (g == 0) tokens.push_back(w);
  const auto inf = lda.infer(tokens, {}, 17);
  CHECK(inf.mixture[static_cast<std::size_t>(t0)] > 0.8);
  CHECK(inf.assignment.topics.size() == tokens.size());

  const auto empty = lda.infer({}, {}, 17);
  CHECK(empty.mixture[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(empty.mixture[1] == doctest::Approx(0.5).epsilon(1e-12));

  for (std::size_t i = 0; i < 20; ++i) {
    const auto inf_i = infer_mixture(lda, corpus.documents[i], {}, i);
    const auto m = inf_i.mixture.values();
    CHECK(std::accumulate(m.begin(), m.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
  }

  SUBCASE("invariant under token reordering") {
    const auto& doc = corpus.documents[3];
    auto reversed = doc.tokens;
    std::reverse(reversed.begin(), reversed.end());
    const auto a = lda.infer(doc.tokens, {}, 5);
    const auto b = lda.infer(reversed, {}, 5);
    CHECK(std::equal(a.mixture.values().begin(), a.mixture.values().end(), b.mixture.values().begin()));
  }
}

TEST_CASE("sample_document") {
  const auto lda = disjoint_pair();
  SUBCASE("support of a one-hot mixture") {
    const auto words = lda.sample_document(TopicMixture({0.0, 1.0}), 100, 3);
    CHECK(words.size() == 100);
    for (WordId w : words) CHECK(lda.phi(1, w) > 0.0);
  }
  SUBCASE("deterministic") {
    const TopicMixture theta({0.3, 0.7});
    CHECK(lda.sample_document(theta, 50, 8) == lda.sample_document(theta, 50, 8));
  }
  SUBCASE("even mixture splits the vocabularies evenly") {
    const auto words = lda.sample_document(TopicMixture({0.5, 0.5}), 10000, 21);
    const auto first = std::count_if(words.begin(), words.end(), [](WordId w) { return w < 2; });
    CHECK(static_cast<double>(first) / 10000.0 == doctest::Approx(0.5).epsilon(0.04));
  }
  SUBCASE("records the drawn topics") {
    std::vector<TopicId> z;
    const std::vector<double> theta{0.5, 0.5};
    const auto words = lda.sample_document(theta, 200, 4, &z);
    REQUIRE(z.size() == words.size());
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(lda.phi(z[i], words[i]) > 0.0);
  }
  SUBCASE("rejects mixtures off the simplex") {
    const std::vector<double> theta{0.5, 0.6};
    try {
      lda.sample_document(theta, 10, 1);
      FAIL("expected InvalidMixture");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidMixture);
    }
  }
}

TEST_CASE("sampled words follow the mixed word distribution") {
  // Ten words, overlapping topics; chi-square goodness of fit with 9
  // degrees of freedom against the 1% critical value 21.666.
  std::vector<double> phi{0.30, 0.20, 0.15, 0.10, 0.10, 0.05, 0.04, 0.03, 0.02, 0.01,
                          0.01, 0.02, 0.03, 0.04, 0.05, 0.10, 0.10, 0.15, 0.20, 0.30};
  const LdaModel lda(2, 0.5, 0.01, phi, 0, 1);
  const std::vector<double> theta{0.35, 0.65};
  const std::size_t n = 50000;
  const auto words = lda.sample_document(theta, n, 99);
  std::vector<double> counts(10, 0.0);
  for (WordId w : words) counts[static_cast<std::size_t>(w)] += 1.0;
  double chi2 = 0.0;
  for (std::size_t w = 0; w < 10; ++w) {
    const double expected = n * (theta[0] * phi[w] + theta[1] * phi[10 + w]);
    chi2 += (counts[w] - expected) * (counts[w] - expected) / expected;
  }
  CHECK(chi2 < 21.666);
}

TEST_CASE("cv_coherence on a toy corpus") {
  // Words 0, 1 always appear together; words 2, 3 never do.
  const LdaModel lda = disjoint_pair();
  std::vector<Document> docs{make_document("a", {0, 1, 2}), make_document("b", {1, 0, 3}),
                             make_document("c", {0, 1}), make_document("d", {2}),
                             make_document("e", {3})};
  LabeledCorpus corpus;
  corpus.vocabulary = std::make_shared<Vocabulary>(std::vector<std::string>{"w0", "w1", "w2", "w3"});
  corpus.documents = docs;
  corpus.labels = {0, 0, 0, 0, 0};
  corpus.classes = {"only"};
  const auto report = cv_coherence(lda, corpus, CoherenceParams{2, 110});
  REQUIRE(report.per_topic.size() == 2);
  CHECK(report.per_topic[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(report.per_topic[1] <= 1e-12);
  CHECK(report.mean == doctest::Approx((report.per_topic[0] + report.per_topic[1]) / 2).epsilon(1e-12));
  for (double s : report.per_topic) {
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("select_k") {
  const auto corpus = topic_corpus(3, 15, 30, 40, 1.0, 8);
  CoherenceParams cp;
  const auto sel = select_k(corpus, {2, 3, 5, 8}, params(0, 6, 150), cp);
  CHECK(sel.best_k == 3);
  CHECK(sel.candidates.size() == 4);
  CHECK(sel.best_model.num_topics() == 3);

  const auto single = select_k(corpus, {7}, params(0, 6, 20), cp);
  CHECK(single.best_k == 7);
}

TEST_CASE("model serialization round-trips exactly") {
  const auto corpus = topic_corpus(2, 10, 10, 20, 0.9, 5);
  const auto lda = fit_lda(corpus, params(2, 9, 30));
  const auto back = LdaModel::from_json(lda.to_json());
  CHECK(back.num_topics() == lda.num_topics());
  CHECK(back.alpha() == lda.alpha());
  CHECK(back.vocabulary_hash() == lda.vocabulary_hash());
  for (TopicId t = 0; t < 2; ++t) {
    const auto a = lda.topic_words(t);
    const auto b = back.topic_words(t);
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
  }
  const auto path = std::filesystem::temp_directory_path() / "semloop_lda_roundtrip.json";
  lda.save(path.string());
  const auto loaded = LdaModel::load(path.string());
  CHECK(loaded.to_json() == lda.to_json());
}

TEST_CASE("normalize_weights") {
  const std::vector<double> w{1.0, 3.0, 0.0};
  const auto p = normalize_weights(w);
  CHECK(p == std::vector<double>{0.25, 0.75, 0.0});
  const std::vector<double> zeros{0.0, 0.0};
  CHECK(normalize_weights(zeros).empty());
}
