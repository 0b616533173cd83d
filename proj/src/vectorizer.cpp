#include "peak/vectorizer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "peak/error.hpp"
#include "peak/io_util.hpp"

namespace peak {

Vocabulary::Vocabulary(std::vector<std::string> terms,
                       std::vector<std::size_t> doc_freq, std::size_t n_docs)
    : n_docs_(n_docs) {
  if (terms.size() != doc_freq.size())
    throw DataError("vocabulary terms/doc_freq length mismatch");
  std::vector<std::size_t> order(terms.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return terms[a] < terms[b]; });
  terms_.reserve(terms.size());
  doc_freq_.reserve(terms.size());
  for (std::size_t i : order) {
    if (doc_freq[i] < 1) throw DataError("term with zero document frequency");
    if (!index_.emplace(terms[i], terms_.size()).second)
      throw DataError("duplicate vocabulary term \"" + terms[i] + "\"");
    terms_.push_back(std::move(terms[i]));
    doc_freq_.push_back(doc_freq[i]);
  }
}

std::optional<std::size_t> Vocabulary::column(std::string_view term) const {
  auto it = index_.find(std::string(term));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

double Vocabulary::idf(std::size_t column) const {
  return std::log((1.0 + static_cast<double>(n_docs_)) /
                  (1.0 + static_cast<double>(doc_freq_.at(column)))) +
         1.0;
}

std::string Vocabulary::fingerprint() const {
  std::string joined;
  for (const auto& t : terms_) {
    joined += t;
    joined += '\n';
  }
  return fnv1a_hex(joined);
}

std::string Vocabulary::to_json() const {
  nlohmann::ordered_json j;
  j["n_docs"] = n_docs_;
  j["terms"] = terms_;
  j["doc_freq"] = doc_freq_;
  return j.dump(1) + "\n";
}

Vocabulary Vocabulary::from_json(std::string_view text) {
  try {
    auto j = nlohmann::json::parse(text);
    return Vocabulary(j.at("terms").get<std::vector<std::string>>(),
                      j.at("doc_freq").get<std::vector<std::size_t>>(),
                      j.at("n_docs").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid vocabulary JSON: ") + e.what());
  }
}

Vocabulary fit_vocabulary(const Corpus& train, std::size_t min_df) {
  if (train.empty()) throw DataError("cannot fit vocabulary on empty corpus");
  if (min_df < 1) throw DataError("min_df must be >= 1");
  std::map<std::string, std::size_t> df;
  for (const auto& img : train.images()) {
    std::set<std::string_view> seen(img.tags.begin(), img.tags.end());
    for (auto t : seen) ++df[std::string(t)];
  }
  std::vector<std::string> terms;
  std::vector<std::size_t> freq;
  for (auto& [term, count] : df) {
    if (count >= min_df) {
      terms.push_back(term);
      freq.push_back(count);
    }
  }
  if (terms.empty())
    throw DataError("vocabulary empty after min_df=" + std::to_string(min_df) +
                    " filtering");
  return Vocabulary(std::move(terms), std::move(freq), train.size());
}

TfIdfMatrix transform(const Corpus& corpus, const Vocabulary& vocab) {
  TfIdfMatrix out;
  out.vocab_fingerprint = vocab.fingerprint();
  out.rows.reserve(corpus.size());
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& img = corpus[i];
    out.rows.push_back(img.id);
    std::map<std::size_t, double> counts;
    for (const auto& t : img.tags) {
      if (auto col = vocab.column(t)) counts[*col] += 1.0;
    }
    if (counts.empty()) {
      ++out.zero_rows;
      continue;
    }
    double norm2 = 0.0;
    for (auto& [col, v] : counts) {
      v *= vocab.idf(col);
      norm2 += v * v;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (const auto& [col, v] : counts)
      triplets.emplace_back(static_cast<int>(i), static_cast<int>(col), v * inv);
  }
  out.values.resize(static_cast<Eigen::Index>(corpus.size()),
                    static_cast<Eigen::Index>(vocab.size()));
  out.values.setFromTriplets(triplets.begin(), triplets.end());
  out.values.makeCompressed();
  return out;
}

std::string to_triplet_text(const SparseMatrix& m) {
  std::string out = std::to_string(m.rows()) + " " + std::to_string(m.cols()) +
                    " " + std::to_string(m.nonZeros()) + "\n";
  char buf[64];
  for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) {
      std::snprintf(buf, sizeof(buf), "%.17g", it.value());
      out += std::to_string(it.row()) + " " + std::to_string(it.col()) + " " +
             buf + "\n";
    }
  }
  return out;
}

SparseMatrix from_triplet_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  long long rows = 0, cols = 0, nnz = 0;
  if (!(in >> rows >> cols >> nnz) || rows < 0 || cols < 0 || nnz < 0)
    throw DataError("bad sparse triplet header");
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(nnz));
  for (long long k = 0; k < nnz; ++k) {
    long long r = 0, c = 0;
    double v = 0.0;
    if (!(in >> r >> c >> v))
      throw DataError("truncated sparse triplet body at entry " +
                      std::to_string(k));
    if (r < 0 || r >= rows || c < 0 || c >= cols)
      throw DataError("triplet index out of range at entry " + std::to_string(k));
    triplets.emplace_back(static_cast<int>(r), static_cast<int>(c), v);
  }
  SparseMatrix m(rows, cols);
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.makeCompressed();
  return m;
}

}  // namespace peak
