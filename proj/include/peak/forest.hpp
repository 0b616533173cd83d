#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "peak/corpus.hpp"

namespace peak {

// One row per sample, one column per topic.
using FeatureMatrix = Eigen::MatrixXd;

// Flattened CART node. Internal nodes route x[feature] <= threshold to left.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf: fraction of private samples
  double cover = 0.0;  // bootstrap samples routed through the node

  bool is_leaf() const { return left < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> x) const;
  friend bool operator==(const Tree&, const Tree&) = default;
};

struct ForestParams {
  std::size_t n_trees = 100;
  std::size_t max_depth = 12;
  std::size_t min_leaf = 5;
  // Features examined per split; 0 selects floor(sqrt(k)).
  std::size_t feature_subsample = 0;
  std::uint64_t seed = 42;
  bool bootstrap = true;
  // Training threads; 0 uses hardware concurrency. Output does not depend on it.
  std::size_t threads = 0;

  friend bool operator==(const ForestParams& a, const ForestParams& b) {
    return a.n_trees == b.n_trees && a.max_depth == b.max_depth &&
           a.min_leaf == b.min_leaf && a.feature_subsample == b.feature_subsample &&
           a.seed == b.seed && a.bootstrap == b.bootstrap;
  }
};

struct Prediction {
  double probability_private = 0.0;
  Label label = Label::kPublic;
};

// Probabilities of exactly 0.5 resolve to private.
Label label_for(double probability_private);

struct Forest {
  std::vector<Tree> trees;
  std::size_t n_features = 0;
  ForestParams params;
  double base_value = 0.0;  // mean predicted probability over the training rows

  friend bool operator==(const Forest&, const Forest&) = default;

  std::string to_json() const;
  static Forest from_json(std::string_view text);
};

Forest train_forest(const FeatureMatrix& X, std::span<const Label> labels,
                    const ForestParams& params = {});

Prediction predict(const Forest& forest, std::span<const double> w);
Prediction predict(const Forest& forest, const Eigen::VectorXd& w);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct Metrics {
  double accuracy = 0.0;
  // confusion[true][predicted], index 0 = public, 1 = private.
  std::array<std::array<std::size_t, 2>, 2> confusion{};
  ClassMetrics public_class;
  ClassMetrics private_class;

  std::string to_json() const;
};

Metrics metrics_from_confusion(const std::array<std::array<std::size_t, 2>, 2>& c);
Metrics metrics_from_predictions(std::span<const Label> truth,
                                 std::span<const Label> predicted);
Metrics evaluate(const Forest& forest, const FeatureMatrix& X,
                 std::span<const Label> labels);

}  // namespace peak
