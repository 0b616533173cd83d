#include "peak/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "peak/attribution.hpp"
#include "peak/categorizer.hpp"
#include "peak/coherence.hpp"
#include "peak/config.hpp"
#include "peak/corpus.hpp"
#include "peak/delegation.hpp"
#include "peak/error.hpp"
#include "peak/forest.hpp"
#include "peak/io_util.hpp"
#include "peak/renderer.hpp"
#include "peak/tagger.hpp"
#include "peak/topic_model.hpp"
#include "peak/vectorizer.hpp"

namespace peak {

namespace {

namespace fs = std::filesystem;

struct Overrides {
  std::optional<std::string> config;
  std::optional<std::string> model_dir;
  std::optional<std::string> corpus;
  std::optional<std::string> embeddings;
  std::optional<std::string> topic_names;
  std::optional<std::size_t> min_df;
  std::optional<double> test_fraction;
  std::optional<std::uint64_t> split_seed;
  std::optional<std::size_t> k;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_iter;
  std::optional<double> tol;
  std::optional<std::size_t> n_trees;
  std::optional<std::size_t> max_depth;
  std::optional<std::size_t> min_leaf;
  std::optional<std::size_t> threads;
  std::optional<double> db, ob, cb;
  std::optional<std::size_t> n_topics, tags_per_topic;
  std::optional<std::string> weak_text;
  std::optional<double> theta, min_accuracy, max_gap;
  std::optional<std::string> stats_mode;
  bool uncertainty_stub = false;
  std::optional<std::string> endpoint;
  std::vector<std::size_t> coherence_k;
  std::optional<std::size_t> coherence_tags;
};

template <typename T, typename U>
void take(const std::optional<T>& v, U& dst) {
  if (v) dst = *v;
}

PipelineConfig resolve(const Overrides& o) {
  PipelineConfig cfg;
  if (o.config) cfg = load_config(*o.config);
  take(o.model_dir, cfg.paths.model_dir);
  take(o.corpus, cfg.paths.corpus);
  take(o.embeddings, cfg.paths.embeddings);
  take(o.topic_names, cfg.paths.topic_names);
  take(o.min_df, cfg.min_df);
  take(o.test_fraction, cfg.test_fraction);
  take(o.split_seed, cfg.split_seed);
  take(o.k, cfg.nmf.k);
  take(o.seed, cfg.nmf.seed);
  take(o.max_iter, cfg.nmf.max_iter);
  take(o.tol, cfg.nmf.tol);
  take(o.n_trees, cfg.forest.n_trees);
  take(o.max_depth, cfg.forest.max_depth);
  take(o.min_leaf, cfg.forest.min_leaf);
  take(o.threads, cfg.forest.threads);
  take(o.db, cfg.categorizer.db);
  take(o.ob, cfg.categorizer.ob);
  take(o.cb, cfg.categorizer.cb);
  take(o.n_topics, cfg.categorizer.n_topics);
  take(o.tags_per_topic, cfg.categorizer.tags_per_topic);
  if (o.weak_text) {
    if (*o.weak_text == "listing") cfg.weak_style = WeakTextStyle::kListing;
    else if (*o.weak_text == "opposing") cfg.weak_style = WeakTextStyle::kOpposing;
    else throw UsageError("--weak-text must be listing or opposing");
  }
  take(o.theta, cfg.qualification.theta);
  take(o.min_accuracy, cfg.qualification.min_accuracy);
  take(o.max_gap, cfg.qualification.max_gap);
  if (o.stats_mode) {
    if (*o.stats_mode == "predicted") cfg.stats_mode = StatsMode::kPredictedClass;
    else if (*o.stats_mode == "true") cfg.stats_mode = StatsMode::kTrueClass;
    else throw UsageError("--stats-mode must be predicted or true");
  }
  if (o.uncertainty_stub) cfg.uncertainty_stub = true;
  take(o.endpoint, cfg.tagger.endpoint);
  if (!o.coherence_k.empty()) cfg.coherence_k = o.coherence_k;
  take(o.coherence_tags, cfg.coherence_tags);
  try {
    cfg.qualification.validate();
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

// Artifact layout inside the model directory.
struct Layout {
  fs::path dir;
  fs::path corpus() const { return dir / "corpus.jsonl"; }
  fs::path vocabulary() const { return dir / "vocabulary.json"; }
  fs::path tfidf() const { return dir / "tfidf.txt"; }
  fs::path topics() const { return dir / "topic_model.json"; }
  fs::path weights() const { return dir / "topic_weights.jsonl"; }
  fs::path coherence() const { return dir / "coherence.json"; }
  fs::path forest() const { return dir / "forest.json"; }
  fs::path metrics() const { return dir / "metrics.json"; }
  fs::path attributions() const { return dir / "attributions.jsonl"; }
  fs::path explanations() const { return dir / "explanations.jsonl"; }
  fs::path cards() const { return dir / "cards"; }
  fs::path gallery() const { return dir / "gallery.html"; }
  fs::path pair_stats() const { return dir / "pair_stats.json"; }
  fs::path delegation() const { return dir / "delegation.json"; }
  fs::path stats() const { return dir / "stats.json"; }
};

std::string require(const fs::path& path, const char* producer) {
  if (!fs::exists(path))
    throw IoError("missing " + path.string() + " (run `peak " + producer + "` first)");
  return read_file(path);
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);)
    if (!line.empty()) out.push_back(line);
  return out;
}

bool is_train(const TaggedImage& img) { return img.split.value_or(Split::kTrain) == Split::kTrain; }

Corpus subset(const Corpus& c, bool train) {
  Corpus out;
  for (const auto& img : c.images())
    if (is_train(img) == train) out.add(img);
  return out;
}

using WeightTable = std::map<std::string, std::vector<double>>;

std::string weights_to_jsonl(const Corpus& corpus, const Eigen::MatrixXd& W) {
  std::string out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    nlohmann::ordered_json j;
    j["id"] = corpus[i].id;
    std::vector<double> w(W.cols());
    for (Eigen::Index c = 0; c < W.cols(); ++c) w[c] = W(static_cast<Eigen::Index>(i), c);
    j["w"] = w;
    out += j.dump() + "\n";
  }
  return out;
}

WeightTable load_weights(const Layout& layout) {
  WeightTable table;
  for (const auto& line : lines_of(require(layout.weights(), "fit-topics"))) {
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("id") || !j.contains("w"))
      throw DataError("malformed line in " + layout.weights().string());
    table[j["id"].get<std::string>()] = j["w"].get<std::vector<double>>();
  }
  return table;
}

const std::vector<double>& weights_for(const WeightTable& t, const std::string& id) {
  auto it = t.find(id);
  if (it == t.end()) throw DataError("no topic weights for image \"" + id + "\"");
  return it->second;
}

FeatureMatrix features(const Corpus& c, const WeightTable& t, std::size_t k) {
  FeatureMatrix X(static_cast<Eigen::Index>(c.size()), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto& w = weights_for(t, c[i].id);
    if (w.size() != k) throw DataError("topic weight width mismatch for \"" + c[i].id + "\"");
    for (std::size_t j = 0; j < k; ++j) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = w[j];
  }
  return X;
}

std::vector<Label> labels_of(const Corpus& c) {
  std::vector<Label> out;
  for (const auto& img : c.images()) out.push_back(img.label);
  return out;
}

std::map<std::size_t, std::string> load_topic_names(const fs::path& path) {
  std::map<std::size_t, std::string> out;
  if (path.empty()) return out;
  if (!fs::exists(path)) throw IoError("cannot open topic names " + path.string());
  auto j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw DataError("topic names must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!value.is_string()) throw DataError("topic name for \"" + key + "\" must be a string");
    std::size_t idx = 0;
    try {
      std::size_t used = 0;
      idx = std::stoul(key, &used);
      if (used != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw DataError("topic names keys must be topic indices, got \"" + key + "\"");
    }
    out[idx] = value.get<std::string>();
  }
  return out;
}

// Everything needed to explain one image.
struct Explainer {
  Corpus corpus;
  TopicModel model;
  Forest forest;
  WeightTable weights;
  PipelineConfig cfg;

  struct Result {
    Prediction prediction;
    ShapAttribution attribution;
    Explanation explanation;
  };

  Result explain(const TaggedImage& img) const {
    const auto& w = weights_for(weights, img.id);
    Result r;
    r.prediction = predict(forest, std::span<const double>(w));
    r.attribution = tree_shap(forest, w);
    r.attribution.id = img.id;
    const NormalizedAttribution attr = normalize(r.attribution);
    r.explanation = categorize(attr, img, model, cfg.categorizer, cfg.weak_style);
    return r;
  }
};

Explainer load_explainer(const Layout& layout, const PipelineConfig& cfg) {
  Explainer e{parse_corpus(require(layout.corpus(), "ingest")),
              TopicModel::from_json(require(layout.topics(), "fit-topics")),
              Forest::from_json(require(layout.forest(), "train")), load_weights(layout), cfg};
  if (e.forest.n_features != e.model.k())
    throw DataError("forest and topic model disagree on the number of topics");
  return e;
}

void save_card(const fs::path& path, const Explanation& e) {
  write_file_atomic(path, render_card(e).svg);
}

int cmd_ingest(const PipelineConfig& cfg, const std::optional<std::string>& input,
               std::ostream& out) {
  const fs::path src = input ? fs::path(*input) : cfg.paths.corpus;
  if (src.empty()) throw UsageError("ingest needs --input or paths.corpus");
  if (!fs::exists(src)) throw IoError("cannot open corpus " + src.string());
  const Corpus corpus = load_corpus(src);
  auto [train, test] = split(corpus, cfg.test_fraction, cfg.split_seed);
  Corpus merged;
  for (const auto& img : corpus.images()) {
    const TaggedImage* t = train.find(img.id);
    merged.add(t ? *t : *test.find(img.id));
  }
  const Layout layout{cfg.paths.model_dir};
  save_corpus(merged, layout.corpus());
  out << "ingested " << merged.size() << " images (" << train.size() << " train, " << test.size()
      << " test) -> " << layout.corpus().string() << "\n";
  return 0;
}

int cmd_tag_fetch(const PipelineConfig& cfg, const std::optional<std::string>& input,
                  const std::optional<std::string>& output, std::ostream& out) {
  const fs::path src = input ? fs::path(*input) : cfg.paths.corpus;
  if (src.empty()) throw UsageError("tag-fetch needs --input or paths.corpus");
  if (!fs::exists(src)) throw IoError("cannot open corpus " + src.string());
  const Corpus corpus = load_corpus(src, LoadOptions{.require_tags = false});
  std::vector<std::string> refs;
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!corpus[i].tags.empty()) continue;
    if (!corpus[i].image_ref)
      throw DataError("image \"" + corpus[i].id + "\" has no tags and no image reference");
    refs.push_back(*corpus[i].image_ref);
    pending.push_back(i);
  }
  std::vector<std::vector<std::string>> fetched;
  if (!refs.empty()) {
    HttpTagger tagger(cfg.tagger);
    fetched = fetch_all(tagger, refs, cfg.tagger.max_in_flight);
  }
  std::vector<TaggedImage> images(corpus.images().begin(), corpus.images().end());
  for (std::size_t j = 0; j < pending.size(); ++j) {
    if (fetched[j].empty())
      throw DataError("tagger returned no tags for \"" + images[pending[j]].id + "\"");
    images[pending[j]].tags = fetched[j];
  }
  const fs::path dst = output ? fs::path(*output) : cfg.paths.model_dir / "tagged_corpus.jsonl";
  save_corpus(Corpus(std::move(images)), dst);
  out << "tagged " << pending.size() << " of " << corpus.size() << " images -> " << dst.string()
      << "\n";
  return 0;
}

int cmd_fit_topics(const PipelineConfig& cfg, std::ostream& out) {
  const Layout layout{cfg.paths.model_dir};
  const Corpus corpus = parse_corpus(require(layout.corpus(), "ingest"));
  const Corpus train = subset(corpus, true);
  const Vocabulary vocab = fit_vocabulary(train, cfg.min_df);
  const TfIdfMatrix X_train = transform(train, vocab);
  const TfIdfMatrix X_all = transform(corpus, vocab);
  TopicFit fit = fit_nmf(X_train, vocab, cfg.nmf);
  const TopicModel model = apply_names(fit.model, load_topic_names(cfg.paths.topic_names));
  const Eigen::MatrixXd W = transform_rows(X_all, model);

  write_file_atomic(layout.vocabulary(), vocab.to_json());
  write_file_atomic(layout.tfidf(), to_triplet_text(X_all.values));
  write_file_atomic(layout.topics(), model.to_json());
  write_file_atomic(layout.weights(), weights_to_jsonl(corpus, W));

  bool monotone = true;
  const auto& log = model.fit_log;
  std::set<std::size_t> restarts(model.restarts.begin(), model.restarts.end());
  for (std::size_t i = 1; i < log.size(); ++i)
    if (!restarts.count(i) && log[i] > log[i - 1] + 1e-10 * std::max(1.0, log[i - 1])) monotone = false;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "fit %zu topics on %zu x %zu tf-idf: %zu iterations, objective %.6g -> %.6g, "
                "fit_log %s\n",
                model.k(), X_train.rows.size(), vocab.size(), model.fit_iterations, log.front(),
                log.back(), monotone ? "monotone" : "NOT monotone");
  out << buf;
  if (X_all.zero_rows)
    out << X_all.zero_rows << " images have no in-vocabulary tag (zero topic weights)\n";
  for (std::size_t t = 0; t < model.k(); ++t) {
    out << "  " << model.names()[t] << ":";
    for (const auto& tag : top_tags(model, t, 6)) out << " " << tag;
    out << "\n";
  }
  return 0;
}

int cmd_coherence(const PipelineConfig& cfg, std::ostream& out) {
  if (cfg.paths.embeddings.empty()) throw UsageError("coherence needs --embeddings or paths.embeddings");
  if (!fs::exists(cfg.paths.embeddings))
    throw IoError("cannot open embeddings " + cfg.paths.embeddings.string());
  const Layout layout{cfg.paths.model_dir};
  const Corpus corpus = parse_corpus(require(layout.corpus(), "ingest"));
  const Corpus train = subset(corpus, true);
  const Vocabulary vocab = fit_vocabulary(train, cfg.min_df);
  const TfIdfMatrix X = transform(train, vocab);
  const std::set<std::string> needed(vocab.terms().begin(), vocab.terms().end());
  const EmbeddingTable table = load_embeddings(cfg.paths.embeddings, needed);
  const CoherenceReport report = select_k(cfg.coherence_k, X, vocab, table, cfg.coherence_tags, cfg.nmf);
  write_file_atomic(layout.coherence(), report.to_json());
  out << report.to_table();
  if (!table.missing.empty())
    out << table.missing.size() << " vocabulary tags have no embedding and were skipped\n";
  return 0;
}

int cmd_train(const PipelineConfig& cfg, std::ostream& out) {
  const Layout layout{cfg.paths.model_dir};
  const Corpus corpus = parse_corpus(require(layout.corpus(), "ingest"));
  const TopicModel model = TopicModel::from_json(require(layout.topics(), "fit-topics"));
  const WeightTable weights = load_weights(layout);
  const Corpus train = subset(corpus, true);
  const Corpus test = subset(corpus, false);
  const Forest forest = train_forest(features(train, weights, model.k()), labels_of(train), cfg.forest);
  write_file_atomic(layout.forest(), forest.to_json());

  const Corpus& eval = test.empty() ? train : test;
  const Metrics m = evaluate(forest, features(eval, weights, model.k()), labels_of(eval));
  write_file_atomic(layout.metrics(), m.to_json());
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "trained %zu trees on %zu images; %s accuracy %.4f (private P %.3f R %.3f, "
                "public P %.3f R %.3f)\n",
                forest.trees.size(), train.size(), test.empty() ? "train" : "test", m.accuracy,
                m.private_class.precision, m.private_class.recall, m.public_class.precision,
                m.public_class.recall);
  out << buf;
  return 0;
}

int cmd_explain(const PipelineConfig& cfg, const std::string& id,
                const std::optional<std::string>& svg_out, std::ostream& out) {
  const Layout layout{cfg.paths.model_dir};
  const Explainer ex = load_explainer(layout, cfg);
  const TaggedImage* img = ex.corpus.find(id);
  if (img == nullptr) throw DataError("unknown image id \"" + id + "\"");
  const auto r = ex.explain(*img);
  const fs::path svg = svg_out ? fs::path(*svg_out) : layout.cards() / (id + ".svg");
  save_card(svg, r.explanation);
  char buf[128];
  std::snprintf(buf, sizeof(buf), "prediction: %s (p_private %.3f)\n",
                std::string(to_string(r.prediction.label)).c_str(), r.prediction.probability_private);
  out << buf << "category: " << to_string(r.explanation.category) << "\n"
      << r.explanation.text << "\n";
  for (const auto& t : r.explanation.topics) {
    out << "  " << (t.sign == Sign::kPositive ? "+" : t.sign == Sign::kNegative ? "-" : "0") << " "
        << t.name << ":";
    for (const auto& tag : t.tags) out << " " << tag;
    out << (t.model_derived ? " (topic tags)" : "") << "\n";
  }
  out << "card: " << svg.string() << "\n";
  return 0;
}

int cmd_categorize(const PipelineConfig& cfg, std::ostream& out) {
  const Layout layout{cfg.paths.model_dir};
  const Explainer ex = load_explainer(layout, cfg);
  std::string attributions, explanations;
  std::map<Category, std::size_t> counts;
  for (const auto& img : ex.corpus.images()) {
    const auto r = ex.explain(img);
    attributions += to_json_line(r.attribution) + "\n";
    explanations += to_json_line(r.explanation) + "\n";
    ++counts[r.explanation.category];
  }
  write_file_atomic(layout.attributions(), attributions);
  write_file_atomic(layout.explanations(), explanations);
  out << "explained " << ex.corpus.size() << " images:";
  for (Category c : kAllCategories) out << " " << to_string(c) << " " << counts[c];
  out << "\n";
  return 0;
}

std::vector<Explanation> load_explanations(const Layout& layout) {
  std::vector<Explanation> out;
  for (const auto& line : lines_of(require(layout.explanations(), "categorize")))
    out.push_back(explanation_from_json_line(line));
  return out;
}

int cmd_render(const PipelineConfig& cfg, std::ostream& out) {
  const Layout layout{cfg.paths.model_dir};
  const auto explanations = load_explanations(layout);
  for (const auto& e : explanations) save_card(layout.cards() / (e.id + ".svg"), e);
  write_file_atomic(layout.gallery(), render_gallery(explanations));
  out << "rendered " << explanations.size() << " cards -> " << layout.cards().string() << "\n";
  return 0;
}

int cmd_simulate(const PipelineConfig& cfg, std::ostream& out) {
  const Layout layout{cfg.paths.model_dir};
  const Explainer ex = load_explainer(layout, cfg);
  const PeakOracle oracle = [&ex](const TaggedImage& img) {
    const auto r = ex.explain(img);
    return PeakDecision{r.prediction.label, r.explanation.category, r.prediction.probability_private};
  };
  const GateSettings gate{cfg.qualification.theta, cfg.uncertainty_stub};
  const Corpus train = subset(ex.corpus, true);
  const Corpus test = subset(ex.corpus, false);
  if (test.empty()) throw DataError("simulate needs test images (ingest with a test fraction)");
  const TrainStats stats = compute_train_stats(train, oracle, gate, cfg.stats_mode);
  const auto qualified = qualify_pairs(stats, cfg.qualification);
  const DelegationReport report = simulate(test, oracle, qualified, gate);
  write_file_atomic(layout.pair_stats(), stats_to_json(stats, qualified));
  write_file_atomic(layout.delegation(), report.to_json());
  out << "qualified pairs:";
  if (qualified.empty()) out << " none";
  for (const auto& k : qualified) out << " " << to_string(k);
  out << "\n" << report.to_table();
  return 0;
}

int cmd_stats(const PipelineConfig& cfg, std::ostream& out) {
  const Layout layout{cfg.paths.model_dir};
  const Corpus corpus = parse_corpus(require(layout.corpus(), "ingest"));
  const auto explanations = load_explanations(layout);
  bool all_scored = !corpus.empty();
  for (const auto& img : corpus.images()) all_scored = all_scored && img.uncertainty.has_value();
  std::optional<double> theta;
  if (all_scored) theta = cfg.qualification.theta;
  const PartitionReport report = partition_report(corpus, explanations, theta);
  write_file_atomic(layout.stats(), report.to_json());
  out << report.to_table();
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Topic-based privacy explanations for tagged images", "peak"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides o;
  app.add_option("--config", o.config, "INI configuration file");
  app.add_option("--model-dir", o.model_dir, "Directory holding model artifacts");

  auto* ingest = app.add_subcommand("ingest", "Validate a corpus and assign train/test splits");
  std::optional<std::string> input, output;
  ingest->add_option("--input", input, "Corpus JSON-lines file");
  ingest->add_option("--test-fraction", o.test_fraction, "Fraction of untagged images sent to test");
  ingest->add_option("--split-seed", o.split_seed, "Seed for the split shuffle");

  auto* tag_fetch = app.add_subcommand("tag-fetch", "Fill missing tags from an HTTP tagging service");
  tag_fetch->add_option("--input", input, "Corpus with image references");
  tag_fetch->add_option("--output", output, "Destination corpus file");
  tag_fetch->add_option("--endpoint", o.endpoint, "Tagging endpoint URL");

  auto* fit = app.add_subcommand("fit-topics", "Build the vocabulary and fit the NMF topic model");
  fit->add_option("--k", o.k, "Number of topics");
  fit->add_option("--seed", o.seed, "NMF seed");
  fit->add_option("--max-iter", o.max_iter, "NMF iteration cap");
  fit->add_option("--tol", o.tol, "Relative objective tolerance");
  fit->add_option("--min-df", o.min_df, "Minimum document frequency");
  fit->add_option("--topic-names", o.topic_names, "JSON object mapping topic index to name");

  auto* coherence = app.add_subcommand("coherence", "Compare candidate topic counts");
  coherence->add_option("--k", o.coherence_k, "Candidate topic counts")->expected(1, -1);
  coherence->add_option("--tags", o.coherence_tags, "Top tags per topic");
  coherence->add_option("--embeddings", o.embeddings, "word2vec text file");
  coherence->add_option("--seed", o.seed, "NMF seed");

  auto* train = app.add_subcommand("train", "Train the random forest on topic weights");
  train->add_option("--n-trees", o.n_trees, "Number of trees");
  train->add_option("--max-depth", o.max_depth, "Maximum tree depth");
  train->add_option("--min-leaf", o.min_leaf, "Minimum samples per leaf");
  train->add_option("--seed", o.seed, "Forest seed");
  train->add_option("--threads", o.threads, "Training threads (0 = all cores)");

  auto add_categorizer_flags = [&o](CLI::App* sub) {
    sub->add_option("--db", o.db, "Dominant bound");
    sub->add_option("--ob", o.ob, "Opposing bound");
    sub->add_option("--cb", o.cb, "Collaborative bound");
    sub->add_option("--n", o.n_topics, "Topics examined");
    sub->add_option("--m", o.tags_per_topic, "Tags per topic");
    sub->add_option("--weak-text", o.weak_text, "Weak wording: listing or opposing");
  };
  std::string explain_id;
  std::optional<std::string> svg_out;
  auto* explain = app.add_subcommand("explain", "Explain one image and write its card");
  explain->add_option("image-id", explain_id, "Image id")->required();
  explain->add_option("--out", svg_out, "SVG destination");
  add_categorizer_flags(explain);

  auto* categorize_cmd = app.add_subcommand("categorize", "Explain every image");
  add_categorizer_flags(categorize_cmd);

  auto* render = app.add_subcommand("render", "Render SVG cards and an HTML gallery");

  auto* simulate_cmd = app.add_subcommand("simulate", "Simulate uncertainty-gated delegation");
  add_categorizer_flags(simulate_cmd);
  simulate_cmd->add_option("--theta", o.theta, "Uncertainty threshold");
  simulate_cmd->add_option("--min-accuracy", o.min_accuracy, "Qualification accuracy bound");
  simulate_cmd->add_option("--max-gap", o.max_gap, "Qualification gap bound");
  simulate_cmd->add_option("--stats-mode", o.stats_mode, "predicted or true");
  simulate_cmd->add_flag("--uncertainty-stub", o.uncertainty_stub,
                         "Derive missing uncertainty from forest votes");

  auto* stats = app.add_subcommand("stats", "Category by class frequency table");
  stats->add_option("--theta", o.theta, "Uncertainty threshold for the uncertain row");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    const auto rest = app.remaining();
    if (app.get_subcommands().empty() && !rest.empty())
      err << "error: unknown subcommand \"" << rest.front() << "\"\n" << app.help();
    else
      err << "error: " << e.what() << "\n" << app.help();
    return static_cast<int>(ErrorKind::kUsage);
  }

  try {
    const PipelineConfig cfg = resolve(o);
    if (ingest->parsed()) return cmd_ingest(cfg, input, out);
    if (tag_fetch->parsed()) return cmd_tag_fetch(cfg, input, output, out);
    if (fit->parsed()) return cmd_fit_topics(cfg, out);
    if (coherence->parsed()) return cmd_coherence(cfg, out);
    if (train->parsed()) return cmd_train(cfg, out);
    if (explain->parsed()) return cmd_explain(cfg, explain_id, svg_out, out);
    if (categorize_cmd->parsed()) return cmd_categorize(cfg, out);
    if (render->parsed()) return cmd_render(cfg, out);
    if (simulate_cmd->parsed()) return cmd_simulate(cfg, out);
    if (stats->parsed()) return cmd_stats(cfg, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::kIo);
  }
  return static_cast<int>(ErrorKind::kUsage);
}

}  // namespace peak
