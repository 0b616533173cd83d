#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "peak/vectorizer.hpp"

namespace peak {

struct NmfParams {
  std::size_t k = 20;
  std::uint64_t seed = 42;
  std::size_t max_iter = 300;
  double tol = 1e-5;
};

// Denominator guard for the multiplicative updates.
inline constexpr double kNmfEpsilon = 1e-12;

struct NmfFactors {
  Eigen::MatrixXd W;  // rows x k
  Eigen::MatrixXd H;  // k x cols
  // Objective after initialisation followed by one entry per iteration.
  std::vector<double> fit_log;
  // fit_log indices at which a collapsed topic was re-seeded. The objective
  // is non-increasing between consecutive restarts.
  std::vector<std::size_t> restarts;
};

// Lee-Seung multiplicative updates for min ||X - WH||_F with W, H >= 0.
// Stops after max_iter iterations or once the relative objective decrease
// drops below tol. Deterministic for a given seed.
NmfFactors factorize(const SparseMatrix& X, const NmfParams& params);
NmfFactors factorize(const Eigen::MatrixXd& X, const NmfParams& params);

// Frobenius norm of X - WH, computed row by row without cancellation.
double objective(const SparseMatrix& X, const Eigen::MatrixXd& W,
                 const Eigen::MatrixXd& H);
double objective(const Eigen::MatrixXd& X, const Eigen::MatrixXd& W,
                 const Eigen::MatrixXd& H);

class TopicModel {
 public:
  TopicModel() = default;
  TopicModel(Eigen::MatrixXd H, std::vector<std::string> terms,
             std::string vocab_fingerprint);

  std::size_t k() const { return static_cast<std::size_t>(H_.rows()); }
  std::size_t vocab_size() const { return terms_.size(); }
  const Eigen::MatrixXd& H() const { return H_; }
  std::span<const std::string> terms() const { return terms_; }
  std::span<const std::string> names() const { return names_; }
  const std::string& name(std::size_t topic) const { return names_.at(topic); }
  const std::string& vocab_fingerprint() const { return fingerprint_; }

  std::vector<double> fit_log;
  std::vector<std::size_t> restarts;
  std::size_t fit_iterations = 0;

  // Replaces the names of the mapped topics; others keep "topic_i".
  TopicModel with_names(const std::map<std::size_t, std::string>& mapping) const;

  std::string to_json() const;
  static TopicModel from_json(std::string_view text);

 private:
  Eigen::MatrixXd H_;
  std::vector<std::string> terms_;
  std::vector<std::string> names_;
  std::string fingerprint_;
};

struct TopicFit {
  TopicModel model;
  Eigen::MatrixXd W;
};

// Requires 1 <= k <= min(rows, cols) and non-negative input.
TopicFit fit_nmf(const TfIdfMatrix& X, const Vocabulary& vocab,
                 const NmfParams& params);

struct ProjectionParams {
  std::size_t max_iter = 500;
  double tol = 1e-8;
};

// Non-negative w minimising ||x - wH|| with H fixed, starting from w = 1.
Eigen::VectorXd transform_image(std::span<const double> row,
                                const TopicModel& model,
                                const ProjectionParams& params = {});

// Projects every row of X; checks the vocabulary fingerprint.
Eigen::MatrixXd transform_rows(const TfIdfMatrix& X, const TopicModel& model,
                               const ProjectionParams& params = {});

// The n heaviest tags of a topic, ties broken lexicographically.
std::vector<std::string> top_tags(const TopicModel& model, std::size_t topic,
                                  std::size_t n);

TopicModel apply_names(const TopicModel& model,
                       const std::map<std::size_t, std::string>& mapping);

}  // namespace peak
