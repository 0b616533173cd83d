#include "peak/coherence.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "peak/error.hpp"
#include "peak/io_util.hpp"

namespace peak {

const std::vector<double>* EmbeddingTable::find(const std::string& tag) const {
  auto it = vectors.find(tag);
  return it == vectors.end() ? nullptr : &it->second;
}

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_uint(std::string_view s, std::size_t& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

std::string underscored(std::string s) {
  for (auto& c : s)
    if (c == ' ') c = '_';
  return s;
}

std::vector<std::string> words_of(const std::string& tag) {
  std::vector<std::string> out;
  for (auto w : split_ws(tag)) out.emplace_back(w);
  return out;
}

}  // namespace

EmbeddingTable parse_embeddings(std::string_view text,
                                const std::set<std::string>& needed_tags) {
  std::set<std::string> wanted;
  for (const auto& tag : needed_tags) {
    wanted.insert(tag);
    wanted.insert(underscored(tag));
    for (auto& w : words_of(tag)) wanted.insert(w);
  }

  std::map<std::string, std::vector<double>> raw;
  EmbeddingTable table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (first) {
      first = false;
      std::size_t count = 0, dim = 0;
      if (tokens.size() == 2 && parse_uint(tokens[0], count) && parse_uint(tokens[1], dim)) {
        table.dim = dim;
        continue;
      }
    }
    const std::size_t width = tokens.size() - 1;
    if (table.dim == 0) table.dim = width;
    if (width != table.dim || width == 0)
      throw DataError("embedding line " + std::to_string(line_no) + " has " +
                      std::to_string(width) + " components, expected " +
                      std::to_string(table.dim));
    std::string word(tokens[0]);
    if (!wanted.count(word)) continue;
    std::vector<double> vec(width);
    for (std::size_t d = 0; d < width; ++d) {
      const std::string tok(tokens[d + 1]);
      char* stop = nullptr;
      vec[d] = std::strtod(tok.c_str(), &stop);
      if (stop != tok.c_str() + tok.size() || !std::isfinite(vec[d]))
        throw DataError("embedding line " + std::to_string(line_no) +
                        ": bad component \"" + tok + "\"");
    }
    raw.emplace(std::move(word), std::move(vec));
  }

  for (const auto& tag : needed_tags) {
    if (auto it = raw.find(tag); it != raw.end()) {
      table.vectors.emplace(tag, it->second);
      continue;
    }
    if (auto it = raw.find(underscored(tag)); it != raw.end()) {
      table.vectors.emplace(tag, it->second);
      continue;
    }
    std::vector<double> mean(table.dim, 0.0);
    std::size_t hits = 0;
    for (const auto& w : words_of(tag)) {
      auto it = raw.find(w);
      if (it == raw.end()) continue;
      for (std::size_t d = 0; d < table.dim; ++d) mean[d] += it->second[d];
      ++hits;
    }
    if (hits == 0) {
      table.missing.push_back(tag);
      continue;
    }
    for (auto& v : mean) v /= static_cast<double>(hits);
    table.vectors.emplace(tag, std::move(mean));
  }
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               const std::set<std::string>& needed_tags) {
  return parse_embeddings(read_file(path), needed_tags);
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw DataError("cosine: length mismatch");
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) throw DataError("cosine: zero vector");
  const double c = dot / std::sqrt(uu * vv);
  return std::clamp(c, -1.0, 1.0);
}

std::vector<std::string> embedded_top_tags(const TopicModel& model,
                                           const EmbeddingTable& table,
                                           std::size_t topic, std::size_t n) {
  std::vector<std::string> out;
  const auto ranked = top_tags(model, topic, model.vocab_size());
  const auto terms = model.terms();
  const auto t = static_cast<Eigen::Index>(topic);
  for (const auto& tag : ranked) {
    if (out.size() == n) break;
    const auto col = static_cast<Eigen::Index>(
        std::lower_bound(terms.begin(), terms.end(), tag) - terms.begin());
    if (!(model.H()(t, col) > 0.0)) break;  // ranking is descending
    if (table.find(tag)) out.push_back(tag);
  }
  return out;
}

SimilarityDetail intra_topic_detail(const TopicModel& model,
                                    const EmbeddingTable& table, std::size_t n) {
  if (n < 2) throw DataError("N must be >= 2");
  SimilarityDetail d;
  double total = 0.0;
  for (std::size_t t = 0; t < model.k(); ++t) {
    const auto tags = embedded_top_tags(model, table, t, n);
    if (tags.size() < 2) {
      d.skipped_topics.push_back(t);
      continue;
    }
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < tags.size(); ++a)
      for (std::size_t b = a + 1; b < tags.size(); ++b) {
        sum += cosine(*table.find(tags[a]), *table.find(tags[b]));
        ++pairs;
      }
    total += sum / static_cast<double>(pairs);
    d.pairs += pairs;
    ++d.topics_used;
  }
  if (d.topics_used == 0) throw DataError("no topic has two embedded tags");
  d.value = total / static_cast<double>(d.topics_used);
  return d;
}

double intra_topic_similarity(const TopicModel& model, const EmbeddingTable& table,
                              std::size_t n) {
  return intra_topic_detail(model, table, n).value;
}

SimilarityDetail inter_topic_detail(const TopicModel& model,
                                    const EmbeddingTable& table, std::size_t n) {
  if (n < 1) throw DataError("N must be >= 1");
  SimilarityDetail d;
  std::vector<std::vector<const std::vector<double>*>> topics;
  for (std::size_t t = 0; t < model.k(); ++t) {
    const auto tags = embedded_top_tags(model, table, t, n);
    if (tags.empty()) {
      d.skipped_topics.push_back(t);
      continue;
    }
    auto& vecs = topics.emplace_back();
    for (const auto& tag : tags) vecs.push_back(table.find(tag));
  }
  if (topics.size() < 2) throw DataError("fewer than two topics have embedded tags");
  double sum = 0.0;
  for (std::size_t p = 0; p < topics.size(); ++p)
    for (std::size_t q = p + 1; q < topics.size(); ++q)
      for (const auto* u : topics[p])
        for (const auto* v : topics[q]) {
          sum += cosine(*u, *v);
          ++d.pairs;
        }
  d.topics_used = topics.size();
  d.value = sum / static_cast<double>(d.pairs);
  return d;
}

double inter_topic_similarity(const TopicModel& model, const EmbeddingTable& table,
                              std::size_t n) {
  return inter_topic_detail(model, table, n).value;
}

CoherenceReport select_k(std::span<const std::size_t> candidates,
                         const TfIdfMatrix& X, const Vocabulary& vocab,
                         const EmbeddingTable& table, std::size_t n,
                         const NmfParams& base_params) {
  if (candidates.empty()) throw DataError("no candidate k values");
  CoherenceReport report;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k : candidates) {
    NmfParams p = base_params;
    p.k = k;
    const TopicFit fit = fit_nmf(X, vocab, p);
    CoherenceRow row{k, intra_topic_similarity(fit.model, table, n),
                     inter_topic_similarity(fit.model, table, n)};
    if (row.score() > best) {
      best = row.score();
      report.recommended_k = k;
    }
    report.rows.push_back(row);
  }
  return report;
}

std::string CoherenceReport::to_table() const {
  std::string out = "     k      intra      inter  intra-inter\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%6zu  %9.4f  %9.4f  %11.4f%s\n", r.k, r.intra,
                  r.inter, r.score(), r.k == recommended_k ? "  *" : "");
    out += buf;
  }
  out += "recommended k = " + std::to_string(recommended_k) + "\n";
  return out;
}

std::string CoherenceReport::to_json() const {
  nlohmann::ordered_json j;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json o;
    o["k"] = r.k;
    o["intra"] = r.intra;
    o["inter"] = r.inter;
    o["score"] = r.score();
    arr.push_back(std::move(o));
  }
  j["candidates"] = std::move(arr);
  j["recommended_k"] = recommended_k;
  return j.dump(1) + "\n";
}

}  // namespace peak
