#include "peak/config.hpp"

#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "peak/error.hpp"

namespace peak {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"paths", {"corpus", "embeddings", "model_dir", "topic_names"}},
      {"vectorizer", {"min_df"}},
      {"split", {"test_fraction", "seed"}},
      {"nmf", {"k", "seed", "max_iter", "tol"}},
      {"forest", {"n_trees", "max_depth", "min_leaf", "feature_subsample", "seed", "bootstrap",
                  "threads"}},
      {"coherence", {"k", "tags"}},
      {"categorizer", {"db", "ob", "cb", "n", "m", "weak_text"}},
      {"delegation", {"theta", "min_accuracy", "max_gap", "stats_mode", "uncertainty_stub"}},
      {"tagger", {"endpoint", "auth_env", "tags_per_image", "max_in_flight", "attempts",
                  "backoff_ms"}},
  };
  return keys;
}

template <typename T>
void read(const pt::ptree& tree, const std::string& key, T& out) {
  auto v = tree.get_optional<std::string>(key);
  if (!v) return;
  std::istringstream is(*v);
  T parsed{};
  if constexpr (std::is_same_v<T, bool>) {
    if (*v == "true" || *v == "1") parsed = true;
    else if (*v == "false" || *v == "0") parsed = false;
    else throw UsageError("config key " + key + ": expected true or false, got \"" + *v + "\"");
  } else {
    if (!(is >> parsed) || !(is >> std::ws).eof())
      throw UsageError("config key " + key + ": cannot parse \"" + *v + "\"");
    if constexpr (std::is_unsigned_v<T>) {
      if (v->find('-') != std::string::npos)
        throw UsageError("config key " + key + " must be non-negative");
    }
  }
  out = parsed;
}

void read_path(const pt::ptree& tree, const std::string& key, const std::filesystem::path& base,
               std::filesystem::path& out) {
  auto v = tree.get_optional<std::string>(key);
  if (!v) return;
  std::filesystem::path p(*v);
  out = (p.is_relative() && !v->empty()) ? base / p : p;
}

}  // namespace

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig cfg) {
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    if (!std::filesystem::exists(path)) throw IoError("cannot open config " + path.string());
    throw UsageError(std::string("bad config: ") + e.what());
  }
  for (const auto& [section, entries] : tree) {
    auto it = known_keys().find(section);
    if (it == known_keys().end()) throw UsageError("unknown config section [" + section + "]");
    for (const auto& [key, value] : entries)
      if (!it->second.count(key)) throw UsageError("unknown config key " + section + "." + key);
  }
  const auto base = path.parent_path();
  read_path(tree, "paths.corpus", base, cfg.paths.corpus);
  read_path(tree, "paths.embeddings", base, cfg.paths.embeddings);
  read_path(tree, "paths.model_dir", base, cfg.paths.model_dir);
  read_path(tree, "paths.topic_names", base, cfg.paths.topic_names);

  read(tree, "vectorizer.min_df", cfg.min_df);
  read(tree, "split.test_fraction", cfg.test_fraction);
  read(tree, "split.seed", cfg.split_seed);

  read(tree, "nmf.k", cfg.nmf.k);
  read(tree, "nmf.seed", cfg.nmf.seed);
  read(tree, "nmf.max_iter", cfg.nmf.max_iter);
  read(tree, "nmf.tol", cfg.nmf.tol);

  read(tree, "forest.n_trees", cfg.forest.n_trees);
  read(tree, "forest.max_depth", cfg.forest.max_depth);
  read(tree, "forest.min_leaf", cfg.forest.min_leaf);
  read(tree, "forest.feature_subsample", cfg.forest.feature_subsample);
  read(tree, "forest.seed", cfg.forest.seed);
  read(tree, "forest.bootstrap", cfg.forest.bootstrap);
  read(tree, "forest.threads", cfg.forest.threads);

  if (auto ks = tree.get_optional<std::string>("coherence.k")) {
    cfg.coherence_k.clear();
    std::istringstream is(*ks);
    std::string tok;
    while (is >> tok) {
      try {
        cfg.coherence_k.push_back(std::stoul(tok));
      } catch (const std::exception&) {
        throw UsageError("config key coherence.k: cannot parse \"" + tok + "\"");
      }
    }
  }
  read(tree, "coherence.tags", cfg.coherence_tags);

  read(tree, "categorizer.db", cfg.categorizer.db);
  read(tree, "categorizer.ob", cfg.categorizer.ob);
  read(tree, "categorizer.cb", cfg.categorizer.cb);
  read(tree, "categorizer.n", cfg.categorizer.n_topics);
  read(tree, "categorizer.m", cfg.categorizer.tags_per_topic);
  if (auto w = tree.get_optional<std::string>("categorizer.weak_text")) {
    if (*w == "listing") cfg.weak_style = WeakTextStyle::kListing;
    else if (*w == "opposing") cfg.weak_style = WeakTextStyle::kOpposing;
    else throw UsageError("categorizer.weak_text must be listing or opposing");
  }

  read(tree, "delegation.theta", cfg.qualification.theta);
  read(tree, "delegation.min_accuracy", cfg.qualification.min_accuracy);
  read(tree, "delegation.max_gap", cfg.qualification.max_gap);
  if (auto m = tree.get_optional<std::string>("delegation.stats_mode")) {
    if (*m == "predicted") cfg.stats_mode = StatsMode::kPredictedClass;
    else if (*m == "true") cfg.stats_mode = StatsMode::kTrueClass;
    else throw UsageError("delegation.stats_mode must be predicted or true");
  }
  read(tree, "delegation.uncertainty_stub", cfg.uncertainty_stub);

  if (auto e = tree.get_optional<std::string>("tagger.endpoint")) cfg.tagger.endpoint = *e;
  if (auto e = tree.get_optional<std::string>("tagger.auth_env")) cfg.tagger.auth_env = *e;
  read(tree, "tagger.tags_per_image", cfg.tagger.tags_per_image);
  read(tree, "tagger.max_in_flight", cfg.tagger.max_in_flight);
  read(tree, "tagger.attempts", cfg.tagger.attempts);
  if (tree.get_optional<std::string>("tagger.backoff_ms")) {
    long ms = 0;
    read(tree, "tagger.backoff_ms", ms);
    if (ms < 0) throw UsageError("tagger.backoff_ms must be non-negative");
    cfg.tagger.backoff = std::chrono::milliseconds(ms);
  }

  try {
    cfg.qualification.validate();
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0))
    throw UsageError("split.test_fraction must lie strictly between 0 and 1");
  return cfg;
}

}  // namespace peak
