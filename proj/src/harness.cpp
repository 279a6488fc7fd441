#include "semloop/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "semloop/error.hpp"
#include "semloop/rng.hpp"

namespace semloop {

namespace {

using ojson = nlohmann::ordered_json;

// Seed streams derived from the experiment seed.
constexpr std::uint64_t kCorpusStream = 0;
constexpr std::uint64_t kSplitStream = 1;
constexpr std::uint64_t kLdaStream = 2;
constexpr std::uint64_t kGsStream = 3;
constexpr std::uint64_t kLoopStream = 4;
constexpr std::uint64_t kFidelityStream = 6;
constexpr std::uint64_t kFidelityInferenceStream = 7;

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

void SplitFractions::validate() const {
  if (train <= 0.0 || pool < 0.0 || test < 0.0)
    throw Error(ErrorCode::InvalidConfig, "split fractions must be non-negative with a positive train share");
  if (std::abs(train + pool + test - 1.0) > 1e-9)
    throw Error(ErrorCode::InvalidConfig, "split fractions must sum to one");
}

void ExperimentConfig::validate() const {
  split.validate();
  strategy.validate();
  if (strategies.empty()) throw Error(ErrorCode::InvalidConfig, "no strategies configured");
  if (iterations < 1) throw Error(ErrorCode::InvalidConfig, "iterations must be at least 1");
  if (num_topics ? *num_topics < 2 : k_candidates.empty())
    throw Error(ErrorCode::InvalidConfig, "need num_topics >= 2 or a non-empty k_candidates list");
  for (auto k : k_candidates)
    if (k < 2) throw Error(ErrorCode::InvalidConfig, "k_candidates must be at least 2");
  if (lda.iterations < 1) throw Error(ErrorCode::InvalidConfig, "lda iterations must be at least 1");
  if (lime_samples < strategy.lime_features + 1 || topiclime_samples < strategy.topiclime_features + 1)
    throw Error(ErrorCode::InvalidConfig, "explainer sample counts must exceed the explanation size");
  if (!(gs_holdout_fraction > 0.0 && gs_holdout_fraction < 1.0))
    throw Error(ErrorCode::InvalidConfig, "gs holdout_fraction must lie in (0, 1)");
  if (!(ea_k_fraction > 0.0 && ea_k_fraction <= 1.0) || !(cri_k_fraction >= 0.0 && cri_k_fraction <= 1.0))
    throw Error(ErrorCode::InvalidConfig, "metric k fractions out of range");
  if (dataset.source != "synthetic" && dataset.source != "file")
    throw Error(ErrorCode::InvalidConfig, "dataset source must be 'synthetic' or 'file'");
  if (dataset.source == "file" && dataset.path.empty())
    throw Error(ErrorCode::InvalidConfig, "file dataset needs a path");
}

ojson ExperimentConfig::to_json() const {
  ojson j;
  j["schema_version"] = kConfigSchemaVersion;
  j["seed"] = seed;
  const auto& s = dataset.synthetic;
  j["dataset"] = {
      {"source", dataset.source},
      {"path", dataset.path.string()},
      {"format", to_string(dataset.format)},
      {"max_documents", dataset.max_documents},
      {"synthetic",
       ojson{{"topics_per_class", s.topics_per_class},
             {"background_topics", s.background_topics},
             {"class_topics_per_document", s.class_topics_per_document},
             {"background_topics_per_document", s.background_topics_per_document},
             {"words_per_topic", s.words_per_topic},
             {"min_length", s.min_length},
             {"max_length", s.max_length},
             {"class_mass", s.class_mass},
             {"cross_class_rate", s.cross_class_rate},
             {"cross_class_mass", s.cross_class_mass},
             {"zipf_exponent", s.zipf_exponent},
             {"seed", s.seed}}}};
  j["split"] = {{"train", split.train}, {"pool", split.pool}, {"test", split.test}};
  std::vector<std::string> names;
  for (auto st : strategies) names.emplace_back(to_string(st));
  j["strategies"] = names;
  j["iterations"] = iterations;
  j["strategy"] = {{"M", strategy.M},
                   {"lambda", strategy.lambda},
                   {"counterexample_length",
                    counterexample_length_from_corpus ? ojson("corpus_mean") : ojson(strategy.counterexample_length)},
                   {"lime_features", strategy.lime_features},
                   {"topiclime_features", strategy.topiclime_features},
                   {"caipi_k_fraction", strategy.k_fraction}};
  j["lda"] = {{"num_topics", num_topics ? ojson(*num_topics) : ojson(nullptr)},
              {"k_candidates", k_candidates},
              {"alpha", lda.alpha > 0.0 ? ojson(lda.alpha) : ojson(nullptr)},
              {"beta", lda.beta},
              {"iterations", lda.iterations},
              {"coherence_top_n", coherence.top_n},
              {"coherence_window", coherence.window},
              {"inference_burn_in", inference.burn_in},
              {"inference_samples", inference.samples}};
  j["learner"] = {{"regularization", learner.regularization},
                  {"max_epochs", learner.max_epochs},
                  {"tolerance", learner.tolerance},
                  {"scaling", learner.scaling == FeatureScaling::counts ? "counts" : "l2_normalized"}};
  j["gold_standard"] = {{"word_regularization", word_gs_regularization},
                        {"topic_regularization", topic_gs_regularization},
                        {"holdout_fraction", gs_holdout_fraction}};
  j["explainers"] = {{"lime_samples", lime_samples},
                     {"topiclime_samples", topiclime_samples},
                     {"kernel_width", kernel_width > 0.0 ? ojson(kernel_width) : ojson(nullptr)}};
  j["metrics"] = {{"margin_every", margin_every},
                  {"ea_every", ea_every},
                  {"ea_k_fraction", ea_k_fraction},
                  {"cri_k_fraction", cri_k_fraction}};
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
    const int version = get_or<int>(j, "schema_version", kConfigSchemaVersion);
    if (version != kConfigSchemaVersion)
      throw Error(ErrorCode::InvalidConfig, "unsupported config schema_version " + std::to_string(version));
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      c.dataset.source = get_or<std::string>(d, "source", c.dataset.source);
      c.dataset.path = get_or<std::string>(d, "path", "");
      c.dataset.format = parse_dataset_format(get_or<std::string>(d, "format", "ag_news_csv"));
      c.dataset.max_documents = get_or<std::size_t>(d, "max_documents", c.dataset.max_documents);
      if (d.contains("synthetic")) {
        const auto& s = d.at("synthetic");
        auto& o = c.dataset.synthetic;
        o.topics_per_class = get_or(s, "topics_per_class", o.topics_per_class);
        o.background_topics = get_or(s, "background_topics", o.background_topics);
        o.class_topics_per_document = get_or(s, "class_topics_per_document", o.class_topics_per_document);
        o.background_topics_per_document =
            get_or(s, "background_topics_per_document", o.background_topics_per_document);
        o.words_per_topic = get_or(s, "words_per_topic", o.words_per_topic);
        o.min_length = get_or(s, "min_length", o.min_length);
        o.max_length = get_or(s, "max_length", o.max_length);
        o.class_mass = get_or(s, "class_mass", o.class_mass);
        o.cross_class_rate = get_or(s, "cross_class_rate", o.cross_class_rate);
        o.cross_class_mass = get_or(s, "cross_class_mass", o.cross_class_mass);
        o.zipf_exponent = get_or(s, "zipf_exponent", o.zipf_exponent);
        o.seed = get_or(s, "seed", o.seed);
      }
    }
    if (j.contains("split")) {
      const auto& s = j.at("split");
      c.split.train = get_or(s, "train", c.split.train);
      c.split.pool = get_or(s, "pool", c.split.pool);
      c.split.test = get_or(s, "test", c.split.test);
    }
    if (j.contains("strategies")) {
      c.strategies.clear();
      for (const auto& name : j.at("strategies")) c.strategies.push_back(parse_strategy(name.get<std::string>()));
    }
    c.iterations = get_or(j, "iterations", c.iterations);
    if (j.contains("strategy")) {
      const auto& s = j.at("strategy");
      c.strategy.M = get_or(s, "M", c.strategy.M);
      c.strategy.lambda = get_or(s, "lambda", c.strategy.lambda);
      if (s.contains("counterexample_length")) {
        const auto& len = s.at("counterexample_length");
        c.counterexample_length_from_corpus = len.is_string() || len.is_null();
        if (len.is_string() && len.get<std::string>() != "corpus_mean")
          throw Error(ErrorCode::InvalidConfig, "counterexample_length must be a count or \"corpus_mean\"");
        if (len.is_number()) c.strategy.counterexample_length = len.get<std::size_t>();
      }
      c.strategy.lime_features = get_or(s, "lime_features", c.strategy.lime_features);
      c.strategy.topiclime_features = get_or(s, "topiclime_features", c.strategy.topiclime_features);
      c.strategy.k_fraction = get_or(s, "caipi_k_fraction", c.strategy.k_fraction);
    }
    if (j.contains("lda")) {
      const auto& l = j.at("lda");
      if (l.contains("num_topics") && !l.at("num_topics").is_null())
        c.num_topics = l.at("num_topics").get<std::size_t>();
      c.k_candidates = get_or(l, "k_candidates", c.k_candidates);
      c.lda.alpha = get_or(l, "alpha", -1.0);
      c.lda.beta = get_or(l, "beta", c.lda.beta);
      c.lda.iterations = get_or(l, "iterations", c.lda.iterations);
      c.coherence.top_n = get_or(l, "coherence_top_n", c.coherence.top_n);
      c.coherence.window = get_or(l, "coherence_window", c.coherence.window);
      c.inference.burn_in = get_or(l, "inference_burn_in", c.inference.burn_in);
      c.inference.samples = get_or(l, "inference_samples", c.inference.samples);
    }
    if (j.contains("learner")) {
      const auto& l = j.at("learner");
      c.learner.regularization = get_or(l, "regularization", c.learner.regularization);
      c.learner.max_epochs = get_or(l, "max_epochs", c.learner.max_epochs);
      c.learner.tolerance = get_or(l, "tolerance", c.learner.tolerance);
      if (l.contains("scaling")) {
        const auto name = l.at("scaling").get<std::string>();
        if (name != "counts" && name != "l2_normalized")
          throw Error(ErrorCode::InvalidConfig, "learner.scaling must be counts or l2_normalized");
        c.learner.scaling = name == "counts" ? FeatureScaling::counts : FeatureScaling::l2_normalized;
      }
    }
    if (j.contains("gold_standard")) {
      const auto& g = j.at("gold_standard");
      c.word_gs_regularization = get_or(g, "word_regularization", c.word_gs_regularization);
      c.topic_gs_regularization = get_or(g, "topic_regularization", c.topic_gs_regularization);
      c.gs_holdout_fraction = get_or(g, "holdout_fraction", c.gs_holdout_fraction);
    }
    if (j.contains("explainers")) {
      const auto& e = j.at("explainers");
      c.lime_samples = get_or(e, "lime_samples", c.lime_samples);
      c.topiclime_samples = get_or(e, "topiclime_samples", c.topiclime_samples);
      c.kernel_width = get_or(e, "kernel_width", 0.0);
    }
    if (j.contains("metrics")) {
      const auto& m = j.at("metrics");
      c.margin_every = get_or(m, "margin_every", c.margin_every);
      c.ea_every = get_or(m, "ea_every", c.ea_every);
      c.ea_k_fraction = get_or(m, "ea_k_fraction", c.ea_k_fraction);
      c.cri_k_fraction = get_or(m, "cri_k_fraction", c.cri_k_fraction);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidConfig) throw;
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  const auto text = read_file(path);
  try {
    return from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
}

void apply_seed_override(ExperimentConfig& cfg) {
  if (const char* env = std::getenv("SEMLOOP_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const auto value = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
      cfg.seed = value;
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidConfig, "SEMLOOP_SEED must be an unsigned integer");
    }
  }
}

Split stratified_split(const LabeledCorpus& corpus, const SplitFractions& fractions,
                       std::uint64_t seed) {
  fractions.validate();
  std::vector<std::vector<std::size_t>> by_class(corpus.num_classes());
  for (std::size_t i = 0; i < corpus.size(); ++i)
    by_class[static_cast<std::size_t>(corpus.labels[i])].push_back(i);
  Split split;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.size() < 3)
      throw Error(ErrorCode::ClassTooSmall, "class '" + corpus.classes[c] + "' has fewer than 3 documents");
    Rng rng(derive_seed(seed, {c}));
    shuffle(members, rng);
    const double n = static_cast<double>(members.size());
    const auto n_train = std::min(members.size(), static_cast<std::size_t>(std::ceil(fractions.train * n - 1e-9)));
    const auto n_test = std::min(members.size() - n_train, static_cast<std::size_t>(std::llround(fractions.test * n)));
    for (std::size_t i = 0; i < members.size(); ++i) {
      auto& part = i < n_train ? split.train : (i < n_train + n_test ? split.test : split.pool);
      part.push_back(members[i]);
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.pool.begin(), split.pool.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

LabeledCorpus load_corpus(const DatasetSpec& spec, std::uint64_t seed) {
  std::vector<RawRecord> records;
  std::vector<std::string> classes;
  if (spec.source == "synthetic") {
    auto syn = spec.synthetic;
    syn.documents = spec.max_documents > 0 ? spec.max_documents : 2000;
    syn.seed = derive_seed(spec.synthetic.seed, {seed});
    std::stringstream csv;
    write_ag_news_csv(csv, synthetic_news(syn));
    records = read_ag_news_csv(csv);
    classes = ag_news_classes();
  } else {
    std::ifstream in(spec.path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + spec.path.string());
    if (spec.format == DatasetFormat::ag_news_csv) {
      records = read_ag_news_csv(in);
      classes = ag_news_classes();
    } else {
      records = read_reuters_labeled_text(in);
      classes = most_frequent_labels(records, 10);
      std::erase_if(records, [&](const RawRecord& r) {
        return std::find(classes.begin(), classes.end(), r.label) == classes.end();
      });
    }
    if (spec.max_documents > 0 && records.size() > spec.max_documents) {
      std::vector<std::size_t> order(records.size());
      std::iota(order.begin(), order.end(), 0);
      Rng rng(derive_seed(seed, {0x5b}));
      shuffle(order, rng);
      order.resize(spec.max_documents);
      std::sort(order.begin(), order.end());
      std::vector<RawRecord> kept;
      kept.reserve(order.size());
      for (auto i : order) kept.push_back(std::move(records[i]));
      records = std::move(kept);
    }
  }
  auto corpus = build_corpus(records, classes, PreprocessConfig::english());
  // Documents left without in-vocabulary tokens cannot be explained.
  std::vector<std::size_t> non_empty;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (!corpus.documents[i].empty()) non_empty.push_back(i);
  if (non_empty.size() != corpus.size()) corpus = corpus.subset(non_empty);
  return corpus;
}

std::shared_ptr<PreparedExperiment> prepare_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  auto p = std::make_shared<PreparedExperiment>();
  p->config = cfg;
  p->corpus = load_corpus(cfg.dataset, derive_seed(cfg.seed, {kCorpusStream}));
  if (cfg.counterexample_length_from_corpus)
    p->config.strategy.counterexample_length =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(p->corpus.mean_document_length())));
  p->split = stratified_split(p->corpus, cfg.split, derive_seed(cfg.seed, {kSplitStream}));

  LdaParams lda = cfg.lda;
  lda.seed = derive_seed(cfg.seed, {kLdaStream});
  if (cfg.num_topics) {
    lda.num_topics = *cfg.num_topics;
    p->lda = fit_lda(p->corpus, lda);
  } else {
    auto sel = select_k(p->corpus, cfg.k_candidates, lda, cfg.coherence);
    p->k_candidates = std::move(sel.candidates);
    p->lda = std::move(sel.best_model);
  }

  GsParams gs;
  gs.holdout_fraction = cfg.gs_holdout_fraction;
  gs.seed = derive_seed(cfg.seed, {kGsStream});
  gs.regularization = cfg.word_gs_regularization;
  p->word_gs = build_word_gs(p->corpus, gs);
  gs.regularization = cfg.topic_gs_regularization;
  p->topic_gs = build_topic_gs(p->corpus, *p->lda, gs, cfg.inference);
  return p;
}

LoopData PreparedExperiment::loop_data() const {
  LoopData d;
  d.corpus = &corpus;
  d.train = split.train;
  d.pool = split.pool;
  d.test = split.test;
  d.lda = lda ? &*lda : nullptr;
  d.word_gs = &word_gs;
  d.topic_gs = &topic_gs;
  return d;
}

LoopConfig PreparedExperiment::loop_config(Strategy strategy) const {
  LoopConfig lc;
  lc.strategy = strategy;
  lc.iterations = config.iterations;
  lc.strategy_cfg = config.strategy;
  lc.strategy_cfg.seed = derive_seed(config.seed, {kLoopStream});
  lc.learner = config.learner;
  lc.lime_samples = config.lime_samples;
  lc.topiclime_samples = config.topiclime_samples;
  lc.kernel_width = config.kernel_width;
  lc.inference = config.inference;
  lc.margin_every = config.margin_every;
  lc.ea_every = config.ea_every;
  lc.ea_k_fraction = config.ea_k_fraction;
  lc.seed = derive_seed(config.seed, {kLoopStream});
  return lc;
}

ojson summarize_runs(const std::vector<StrategyRun>& runs, std::size_t iterations) {
  ojson out = ojson::object();
  for (const auto& run : runs) {
    ojson s;
    const MetricSeries* f1 = nullptr;
    const MetricSeries* margin = nullptr;
    const MetricSeries* ea = nullptr;
    for (const auto& series : run.series) {
      if (series.name() == "macro_f1") f1 = &series;
      if (series.name() == "margin") margin = &series;
      if (series.name() == "explanatory_accuracy") ea = &series;
    }
    s["iterations_run"] = run.records.size();
    if (f1 && !f1->empty()) {
      s["final_macro_f1"] = f1->last();
      s["initial_macro_f1"] = f1->points().front().second;
      const auto half = f1->at(std::min<std::size_t>(50, iterations));
      s["macro_f1_at_50"] = half ? ojson(*half) : ojson(nullptr);
      std::optional<std::size_t> reach;
      for (const auto& [it, v] : f1->points())
        if (v >= 0.9 * f1->last()) {
          reach = it;
          break;
        }
      s["first_iteration_at_90pct_final"] = reach ? ojson(*reach) : ojson(nullptr);
    }
    s["final_margin"] = margin && !margin->empty() ? ojson(margin->last()) : ojson(nullptr);
    s["final_explanatory_accuracy"] = ea && !ea->empty() ? ojson(ea->last()) : ojson(nullptr);
    std::size_t counterexamples = 0, fallbacks = 0;
    for (const auto& r : run.records) {
      counterexamples += r.counterexamples.size();
      fallbacks += r.fallback ? 1 : 0;
    }
    s["counterexamples"] = counterexamples;
    s["degenerate_mixture_fallbacks"] = fallbacks;
    out[to_string(run.strategy)] = std::move(s);
  }
  return out;
}

ResultLog run_experiment(const PreparedExperiment& prepared,
                         const std::optional<std::filesystem::path>& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  const auto& cfg = prepared.config;
  ResultLog log;
  log.config = cfg.to_json();
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    write_file(*out_dir / "config.json", log.config.dump(2) + "\n");
  }
  for (auto strategy : cfg.strategies) {
    StrategyRun run{strategy, {}, {}};
    try {
      auto result = run_loop(prepared.loop_data(), prepared.loop_config(strategy));
      run.records = std::move(result.records);
      run.series = std::move(result.series);
    } catch (const Error& e) {
      throw Error(e.code(), std::string("strategy ") + to_string(strategy) + ": " + e.what());
    }
    if (out_dir) {
      const auto dir = *out_dir / to_string(strategy);
      std::filesystem::create_directories(dir);
      write_file(dir / "records.jsonl", records_jsonl(run.records, prepared.corpus.vocab()));
      write_file(dir / "metrics.csv", metrics_csv(run.series));
    }
    log.runs.push_back(std::move(run));
  }

  ojson summary;
  summary["documents"] = prepared.corpus.size();
  summary["vocabulary"] = prepared.corpus.vocab().size();
  summary["classes"] = prepared.corpus.classes;
  summary["split"] = {{"train", prepared.split.train.size()},
                      {"pool", prepared.split.pool.size()},
                      {"test", prepared.split.test.size()}};
  summary["num_topics"] = prepared.lda ? prepared.lda->num_topics() : 0;
  ojson coherence = ojson::array();
  for (const auto& c : prepared.k_candidates) coherence.push_back({{"k", c.k}, {"mean_cv", c.coherence.mean}});
  summary["k_selection"] = std::move(coherence);
  summary["word_gs_source_f1"] = prepared.word_gs.source_f1();
  summary["topic_gs_source_f1"] = prepared.topic_gs.source_f1();
  summary["counterexample_length"] = cfg.strategy.counterexample_length;
  summary["strategies"] = summarize_runs(log.runs, cfg.iterations);
  log.summary = summary;
  log.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (out_dir) {
    ojson report = summary;
    report["wall_clock_seconds"] = log.wall_clock_seconds;
    write_file(*out_dir / "report.json", report.dump(2) + "\n");
  }
  return log;
}

ResultLog run_experiment(const ExperimentConfig& cfg,
                         const std::optional<std::filesystem::path>& out_dir) {
  return run_experiment(*prepare_experiment(cfg), out_dir);
}

ojson FidelityTable::to_json() const {
  ojson j;
  j["num_topics"] = num_topics;
  j["lime"] = lime.to_json();
  j["topiclime"] = topiclime.to_json();
  return j;
}

std::string FidelityTable::to_text() const {
  auto row = [](const char* name, const FidelityReport& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-10s %14.6f %10.6f %10.6f\n", name, r.mlae, r.mean_r2, r.cri);
    return std::string(buf);
  };
  std::string out = "explainer   Approx.Error         R2        CRI\n";
  out += row("LIME", lime);
  out += row("topicLIME", topiclime);
  return out;
}

FidelityTable run_fidelity(const PreparedExperiment& prepared) {
  const auto& cfg = prepared.config;
  if (!prepared.lda) throw Error(ErrorCode::InvalidConfig, "fidelity needs a topic model");
  TrainSet train;
  train.num_features = prepared.corpus.vocab().size();
  train.num_classes = prepared.corpus.num_classes();
  for (const auto* part : {&prepared.split.train, &prepared.split.pool})
    for (auto i : *part) train.add(prepared.corpus.documents[i].bow, prepared.corpus.labels[i]);
  const auto f = fit_softmax(train, cfg.learner);
  const auto test = TestView::of(prepared.corpus, prepared.split.test);

  PerturbationConfig word;
  word.num_samples = cfg.lime_samples;
  word.complexity = cfg.strategy.lime_features;
  word.kernel_width = cfg.kernel_width;
  word.seed = derive_seed(cfg.seed, {kFidelityStream, 1});
  PerturbationConfig topic = word;
  topic.num_samples = cfg.topiclime_samples;
  topic.complexity = cfg.strategy.topiclime_features;
  topic.seed = derive_seed(cfg.seed, {kFidelityStream, 2});

  std::vector<Inference> inferences;
  for (std::size_t i = 0; i < test.size(); ++i)
    inferences.push_back(infer_mixture(*prepared.lda, *test.docs[i], cfg.inference,
                                       derive_seed(cfg.seed, {kFidelityInferenceStream, i})));
  FidelityTable table;
  table.num_topics = prepared.lda->num_topics();
  table.lime = fidelity(f, make_lime_explainer(f, word), test, cfg.cri_k_fraction);
  table.topiclime = fidelity(f, make_topiclime_explainer(f, *prepared.lda, std::move(inferences), topic),
                             test, cfg.cri_k_fraction);
  return table;
}

ReportFiles build_report(const std::filesystem::path& out_dir) {
  ReportFiles files;
  const auto report = nlohmann::json::parse(read_file(out_dir / "report.json"));
  files.summary = report;
  const auto cfg = nlohmann::json::parse(read_file(out_dir / "config.json"));
  files.curves_csv = "strategy,iteration,metric,value\n";
  for (const auto& name : cfg.at("strategies")) {
    const auto strategy = name.get<std::string>();
    std::istringstream csv(read_file(out_dir / strategy / "metrics.csv"));
    std::string line;
    std::getline(csv, line);  // header
    while (std::getline(csv, line))
      if (!line.empty()) files.curves_csv += strategy + "," + line + "\n";
  }
  return files;
}

}  // namespace semloop
