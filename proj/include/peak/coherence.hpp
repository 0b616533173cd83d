#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "peak/topic_model.hpp"

namespace peak {

// Word vectors resolved per tag. Multi-word tags ("no person") use the stored
// phrase vector when present ("no person" or "no_person"), otherwise the mean
// of the vectors of their known words.
struct EmbeddingTable {
  std::size_t dim = 0;
  std::map<std::string, std::vector<double>> vectors;
  std::vector<std::string> missing;  // needed tags with no usable vector

  const std::vector<double>* find(const std::string& tag) const;
  std::size_t found() const { return vectors.size(); }
};

// word2vec text format: optional "count dim" header, then "word v1 ... vD".
// Every line is validated for width; only the needed tags are kept.
EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               const std::set<std::string>& needed_tags);
EmbeddingTable parse_embeddings(std::string_view text,
                                const std::set<std::string>& needed_tags);

double cosine(std::span<const double> u, std::span<const double> v);

struct SimilarityDetail {
  double value = 0.0;
  std::size_t topics_used = 0;
  std::vector<std::size_t> skipped_topics;
  std::size_t pairs = 0;
};

// Top-N tags of a topic that carry positive weight and have an embedding,
// in descending weight order.
std::vector<std::string> embedded_top_tags(const TopicModel& model,
                                           const EmbeddingTable& table,
                                           std::size_t topic, std::size_t n);

// Mean over topics of the mean pairwise cosine among each topic's top-N
// embedded tags. Topics with fewer than two such tags are skipped.
SimilarityDetail intra_topic_detail(const TopicModel& model,
                                    const EmbeddingTable& table, std::size_t n);
double intra_topic_similarity(const TopicModel& model, const EmbeddingTable& table,
                              std::size_t n);

// Mean cosine over every tag pair drawn from two different topics.
SimilarityDetail inter_topic_detail(const TopicModel& model,
                                    const EmbeddingTable& table, std::size_t n);
double inter_topic_similarity(const TopicModel& model, const EmbeddingTable& table,
                              std::size_t n);

struct CoherenceRow {
  std::size_t k = 0;
  double intra = 0.0;
  double inter = 0.0;
  double score() const { return intra - inter; }
};

struct CoherenceReport {
  std::vector<CoherenceRow> rows;
  std::size_t recommended_k = 0;  // highest intra - inter, first on ties

  std::string to_table() const;
  std::string to_json() const;
};

CoherenceReport select_k(std::span<const std::size_t> candidates,
                         const TfIdfMatrix& X, const Vocabulary& vocab,
                         const EmbeddingTable& table, std::size_t n,
                         const NmfParams& base_params);

}  // namespace peak
