#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/SparseCore>

#include "peak/corpus.hpp"

namespace peak {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Lexicographically ordered tag vocabulary with document frequencies.
class Vocabulary {
 public:
  Vocabulary() = default;
  // Terms must be unique; they are sorted on construction.
  Vocabulary(std::vector<std::string> terms, std::vector<std::size_t> doc_freq,
             std::size_t n_docs);

  std::span<const std::string> terms() const { return terms_; }
  std::span<const std::size_t> doc_freq() const { return doc_freq_; }
  std::size_t n_docs() const { return n_docs_; }
  std::size_t size() const { return terms_.size(); }
  std::optional<std::size_t> column(std::string_view term) const;

  // Smoothed idf: ln((1 + n_docs) / (1 + df)) + 1.
  double idf(std::size_t column) const;

  // Digest of the ordered term list; binds models to this vocabulary.
  std::string fingerprint() const;

  std::string to_json() const;
  static Vocabulary from_json(std::string_view text);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.terms_ == b.terms_ && a.doc_freq_ == b.doc_freq_ &&
           a.n_docs_ == b.n_docs_;
  }

 private:
  std::vector<std::string> terms_;
  std::vector<std::size_t> doc_freq_;
  std::size_t n_docs_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
};

struct TfIdfMatrix {
  std::vector<std::string> rows;  // image ids, corpus order
  SparseMatrix values;            // rows x |vocabulary|
  std::string vocab_fingerprint;
  std::size_t zero_rows = 0;      // images with no in-vocabulary tag
};

// Keeps every tag present in at least `min_df` training images.
Vocabulary fit_vocabulary(const Corpus& train, std::size_t min_df = 2);

// entry(i,t) = count(t in image i) * idf(t), then each nonzero row is scaled
// to unit L2 norm. Out-of-vocabulary tags are ignored.
TfIdfMatrix transform(const Corpus& corpus, const Vocabulary& vocab);

// Sparse triplet text format: header "rows cols nnz", then "row col value"
// lines in row-major order.
std::string to_triplet_text(const SparseMatrix& m);
SparseMatrix from_triplet_text(std::string_view text);

}  // namespace peak
