// Writes the bundled synthetic corpus, a matching word-vector file and a topic
// name map into the given directory.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "peak/corpus.hpp"
#include "peak/io_util.hpp"
#include "peak/rng.hpp"
#include "peak/topic_model.hpp"
#include "peak/vectorizer.hpp"

namespace {

struct Theme {
  std::string name;
  double privacy;  // chance that an image drawn from this theme alone is private
  std::vector<std::string> tags;
};

const std::vector<Theme>& themes() {
  static const std::vector<Theme> t = {
      {"People", 0.85, {"person", "woman", "man", "portrait", "face", "girl", "boy", "smile",
                        "adult", "child", "family", "selfie", "eyes", "hair"}},
      {"Home", 0.75, {"indoors", "room", "bed", "sofa", "kitchen", "furniture", "window",
                      "lamp", "bedroom", "bathroom", "curtain", "pillow"}},
      {"Party", 0.8, {"party", "drink", "wine", "beer", "celebration", "dancing", "birthday",
                      "friends", "nightclub", "cake", "music", "glass"}},
      {"Documents", 0.7, {"paper", "text", "document", "handwriting", "card", "screen",
                          "computer", "phone", "desk", "letter", "receipt"}},
      {"Nature", 0.1, {"tree", "landscape", "mountain", "sky", "grass", "forest", "lake",
                       "sunset", "flower", "outdoors", "no person", "cloud", "snow"}},
      {"City", 0.15, {"architecture", "building", "street", "travel", "city", "bridge",
                      "tower", "church", "road", "urban", "skyline", "car"}},
      {"Animals", 0.1, {"animal", "dog", "cat", "bird", "wildlife", "cute", "pet", "horse",
                        "zoo", "fur", "mammal"}},
      {"Art", 0.2, {"painting", "art", "sculpture", "museum", "vintage", "design", "pattern",
                    "illustration", "color", "statue", "exhibition"}},
  };
  return t;
}

double normal(peak::Rng& rng) {
  const double u1 = rng.uniform_open();
  const double u2 = rng.uniform_open();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

peak::Corpus make_corpus(std::size_t n, std::uint64_t seed) {
  peak::Rng rng(seed);
  const auto& th = themes();
  peak::Corpus corpus;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t n_themes = 1 + rng.below(2) + (rng.uniform() < 0.15 ? 1 : 0);
    std::vector<std::size_t> picked;
    while (picked.size() < n_themes) {
      const auto t = static_cast<std::size_t>(rng.below(th.size()));
      if (std::find(picked.begin(), picked.end(), t) == picked.end()) picked.push_back(t);
    }
    std::set<std::string> tags;
    double p = 0.0;
    for (std::size_t rank = 0; rank < picked.size(); ++rank) {
      const Theme& t = th[picked[rank]];
      p += t.privacy;
      const std::size_t want = (rank == 0 ? 6 : 3) + rng.below(4);
      while (tags.size() < want * (rank + 1) && tags.size() < 30)
        tags.insert(t.tags[rng.below(t.tags.size())]);
    }
    p /= static_cast<double>(picked.size());
    // Cross-theme noise tag.
    if (rng.uniform() < 0.5) {
      const Theme& t = th[rng.below(th.size())];
      tags.insert(t.tags[rng.below(t.tags.size())]);
    }

    peak::TaggedImage img;
    char id[32];
    std::snprintf(id, sizeof(id), "img_%04zu", i + 1);
    img.id = id;
    std::vector<std::string> ordered(tags.begin(), tags.end());
    rng.shuffle(std::span<std::string>(ordered));
    img.tags = ordered;
    // Each of three annotators marks private independently so that at least
    // one of them does with probability p.
    const double q = 1.0 - std::cbrt(1.0 - p);
    std::vector<peak::Label> votes;
    for (int a = 0; a < 3; ++a)
      votes.push_back(rng.uniform() < q ? peak::Label::kPrivate : peak::Label::kPublic);
    img.annotations = votes;
    img.label = peak::derive_label(votes);
    const double u = std::clamp(1.0 - 0.9 * std::abs(2.0 * p - 1.0) + 0.25 * normal(rng), 0.0, 0.999);
    img.uncertainty = std::round(u * 1000.0) / 1000.0;
    const double pure_acc = u > 0.7 ? 0.7 : 0.95;
    const bool right = rng.uniform() < pure_acc;
    img.pure_prediction = right ? img.label
                                : (img.label == peak::Label::kPrivate ? peak::Label::kPublic
                                                                      : peak::Label::kPrivate);
    corpus.add(std::move(img));
  }
  return corpus;
}

std::string make_embeddings(std::size_t dim, std::uint64_t seed) {
  peak::Rng rng(seed);
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  for (const Theme& t : themes()) {
    std::vector<double> centre(dim);
    for (auto& c : centre) c = normal(rng);
    for (const auto& tag : t.tags) {
      std::vector<double> v(dim);
      for (std::size_t d = 0; d < dim; ++d) v[d] = centre[d] + 0.7 * normal(rng);
      std::string word = tag;
      std::replace(word.begin(), word.end(), ' ', '_');
      rows.emplace_back(word, v);
    }
  }
  for (const char* w : {"the", "of", "and", "quickly", "blue", "seven", "between", "north"}) {
    std::vector<double> v(dim);
    for (auto& x : v) x = normal(rng);
    rows.emplace_back(w, v);
  }
  std::string out = std::to_string(rows.size()) + " " + std::to_string(dim) + "\n";
  char buf[32];
  for (const auto& [word, v] : rows) {
    out += word;
    for (double x : v) {
      std::snprintf(buf, sizeof(buf), " %.6f", x);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

// Names each fitted topic after the theme owning most of its leading tags.
std::string make_topic_names(const peak::Corpus& corpus, double test_fraction,
                             std::uint64_t split_seed, const peak::NmfParams& params) {
  auto [train, test] = peak::split(corpus, test_fraction, split_seed);
  const auto vocab = peak::fit_vocabulary(train, 2);
  const auto fit = peak::fit_nmf(peak::transform(train, vocab), vocab, params);
  std::map<std::string, std::string> owner;
  for (const Theme& t : themes())
    for (const auto& tag : t.tags) owner.emplace(tag, t.name);
  nlohmann::ordered_json names = nlohmann::ordered_json::object();
  std::map<std::string, int> used;
  for (std::size_t k = 0; k < fit.model.k(); ++k) {
    std::map<std::string, int> votes;
    for (const auto& tag : peak::top_tags(fit.model, k, 8)) ++votes[owner[tag]];
    const auto best = std::max_element(votes.begin(), votes.end(), [](const auto& a, const auto& b) {
      return a.second < b.second;
    });
    std::string name = best->first;
    if (++used[name] > 1) name += " " + std::to_string(used[name]);
    names[std::to_string(k)] = name;
  }
  return names.dump(1) + "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate the bundled synthetic corpus", "peak_synth"};
  std::string out_dir = "data";
  std::size_t n = 300;
  std::uint64_t seed = 7;
  std::size_t k = 8;
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--images", n, "Number of images");
  app.add_option("--seed", seed, "Generator seed");
  app.add_option("--k", k, "Topic count used to name topics");
  CLI11_PARSE(app, argc, argv);

  try {
    const std::filesystem::path dir(out_dir);
    const peak::Corpus corpus = make_corpus(n, seed);
    peak::save_corpus(corpus, dir / "synthetic_corpus.jsonl");
    peak::write_file_atomic(dir / "synthetic_embeddings.txt", make_embeddings(24, seed + 1));
    peak::NmfParams params;
    params.k = k;
    peak::write_file_atomic(dir / "topic_names.json", make_topic_names(corpus, 0.2, 42, params));
    std::size_t priv = 0;
    for (const auto& img : corpus.images()) priv += img.label == peak::Label::kPrivate;
    std::cout << "wrote " << corpus.size() << " images (" << priv << " private) to " << dir.string()
              << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
