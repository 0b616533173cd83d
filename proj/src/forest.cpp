#include "peak/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "peak/error.hpp"
#include "peak/rng.hpp"

namespace peak {

double Tree::predict(std::span<const double> x) const {
  int idx = 0;
  while (!nodes[static_cast<std::size_t>(idx)].is_leaf()) {
    const auto& n = nodes[static_cast<std::size_t>(idx)];
    idx = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(idx)].value;
}

Label label_for(double probability_private) {
  return probability_private >= 0.5 ? Label::kPrivate : Label::kPublic;
}

namespace {

double gini(double n_private, double n) {
  if (n <= 0.0) return 0.0;
  const double p = n_private / n;
  return 2.0 * p * (1.0 - p);
}

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& X, std::span<const Label> labels,
              const ForestParams& params, std::size_t m_try, Rng& rng)
      : X_(X), labels_(labels), params_(params), m_try_(m_try), rng_(rng),
        features_(static_cast<std::size_t>(X.cols())) {
    std::iota(features_.begin(), features_.end(), std::size_t{0});
  }

  Tree build(std::vector<std::size_t> samples) {
    Tree tree;
    grow(tree, samples, 0);
    return tree;
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;
  };

  int grow(Tree& tree, std::span<std::size_t> samples, std::size_t depth) {
    const auto idx = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    const double n = static_cast<double>(samples.size());
    double n_private = 0.0;
    for (auto s : samples) n_private += labels_[s] == Label::kPrivate ? 1.0 : 0.0;
    tree.nodes.back().cover = n;
    tree.nodes.back().value = n_private / n;

    const bool pure = n_private == 0.0 || n_private == n;
    if (pure || depth >= params_.max_depth || samples.size() < 2 * params_.min_leaf)
      return idx;

    const Split best = find_split(samples, gini(n_private, n) * n);
    if (best.feature < 0) return idx;

    auto mid = std::partition(samples.begin(), samples.end(), [&](std::size_t s) {
      return X_(static_cast<Eigen::Index>(s), best.feature) <= best.threshold;
    });
    const auto n_left = static_cast<std::size_t>(mid - samples.begin());
    // Partition order depends only on the input order, which is deterministic.
    const int left = grow(tree, samples.subspan(0, n_left), depth + 1);
    const int right = grow(tree, samples.subspan(n_left), depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(idx)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = right;
    node.value = 0.0;
    return idx;
  }

  Split find_split(std::span<const std::size_t> samples, double parent_impurity) {
    // Partial Fisher-Yates draws m_try distinct features.
    for (std::size_t i = 0; i < m_try_; ++i) {
      const auto j = i + static_cast<std::size_t>(rng_.below(features_.size() - i));
      std::swap(features_[i], features_[j]);
    }
    Split best;
    best.impurity = parent_impurity - 1e-12;
    std::vector<std::pair<double, bool>> column(samples.size());
    const std::size_t total = samples.size();
    const std::size_t min_leaf = std::max<std::size_t>(1, params_.min_leaf);
    for (std::size_t fi = 0; fi < m_try_; ++fi) {
      const auto f = static_cast<Eigen::Index>(features_[fi]);
      double total_private = 0.0;
      for (std::size_t i = 0; i < total; ++i) {
        column[i] = {X_(static_cast<Eigen::Index>(samples[i]), f),
                     labels_[samples[i]] == Label::kPrivate};
        total_private += column[i].second ? 1.0 : 0.0;
      }
      std::sort(column.begin(), column.end());
      double left_private = 0.0;
      for (std::size_t i = 0; i + 1 < total; ++i) {
        left_private += column[i].second ? 1.0 : 0.0;
        const std::size_t n_left = i + 1;
        if (column[i].first == column[i + 1].first) continue;
        if (n_left < min_leaf || total - n_left < min_leaf) continue;
        const double nl = static_cast<double>(n_left);
        const double nr = static_cast<double>(total - n_left);
        const double impurity = gini(left_private, nl) * nl +
                                gini(total_private - left_private, nr) * nr;
        if (impurity < best.impurity) {
          const double a = column[i].first;
          const double b = column[i + 1].first;
          double thr = a + (b - a) / 2.0;
          if (!(thr < b)) thr = a;
          best = {static_cast<int>(f), thr, impurity};
        }
      }
    }
    return best;
  }

  const FeatureMatrix& X_;
  std::span<const Label> labels_;
  const ForestParams& params_;
  std::size_t m_try_;
  Rng& rng_;
  std::vector<std::size_t> features_;
};

}  // namespace

Forest train_forest(const FeatureMatrix& X, std::span<const Label> labels,
                    const ForestParams& params) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (n == 0) throw DataError("empty training set");
  if (labels.size() != n) throw DataError("features/labels length mismatch");
  if (n < 2) throw DataError("at least two training samples are required");
  if (X.cols() < 1) throw DataError("no features");
  if (params.n_trees < 1) throw DataError("n_trees must be >= 1");
  if (!X.allFinite()) throw DataError("non-finite feature value");
  const auto n_private = static_cast<std::size_t>(
      std::count(labels.begin(), labels.end(), Label::kPrivate));
  if (n_private == 0 || n_private == n)
    throw DataError("training set contains a single class");

  const auto k = static_cast<std::size_t>(X.cols());
  std::size_t m_try = params.feature_subsample;
  if (m_try == 0)
    m_try = std::max<std::size_t>(1, static_cast<std::size_t>(
                                         std::floor(std::sqrt(static_cast<double>(k)))));
  m_try = std::min(m_try, k);

  Forest forest;
  forest.n_features = k;
  forest.params = params;
  forest.trees.resize(params.n_trees);

  auto train_one = [&](std::size_t t) {
    Rng rng(derive_seed(params.seed, t));
    std::vector<std::size_t> samples(n);
    if (params.bootstrap) {
      for (auto& s : samples) s = static_cast<std::size_t>(rng.below(n));
    } else {
      std::iota(samples.begin(), samples.end(), std::size_t{0});
    }
    TreeBuilder builder(X, labels, params, m_try, rng);
    forest.trees[t] = builder.build(std::move(samples));
  };

  std::size_t threads = params.threads;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, params.n_trees);
  if (threads <= 1) {
    for (std::size_t t = 0; t < params.n_trees; ++t) train_one(t);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < params.n_trees; t += threads) train_one(t);
      });
    }
    for (auto& th : pool) th.join();
  }

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd row = X.row(static_cast<Eigen::Index>(i)).transpose();
    total += predict(forest, row).probability_private;
  }
  forest.base_value = total / static_cast<double>(n);
  return forest;
}

Prediction predict(const Forest& forest, std::span<const double> w) {
  if (w.size() != forest.n_features)
    throw DataError("feature vector has length " + std::to_string(w.size()) +
                    ", forest expects " + std::to_string(forest.n_features));
  if (forest.trees.empty()) throw DataError("forest has no trees");
  double sum = 0.0;
  for (const auto& tree : forest.trees) sum += tree.predict(w);
  Prediction p;
  p.probability_private = sum / static_cast<double>(forest.trees.size());
  p.label = label_for(p.probability_private);
  return p;
}

Prediction predict(const Forest& forest, const Eigen::VectorXd& w) {
  return predict(forest, std::span<const double>(w.data(), static_cast<std::size_t>(w.size())));
}

Metrics metrics_from_confusion(const std::array<std::array<std::size_t, 2>, 2>& c) {
  Metrics m;
  m.confusion = c;
  const double total = static_cast<double>(c[0][0] + c[0][1] + c[1][0] + c[1][1]);
  if (total == 0.0) throw DataError("empty test set");
  m.accuracy = static_cast<double>(c[0][0] + c[1][1]) / total;
  auto per_class = [&](std::size_t cls) {
    ClassMetrics cm;
    const std::size_t other = 1 - cls;
    const double tp = static_cast<double>(c[cls][cls]);
    const double fp = static_cast<double>(c[other][cls]);
    const double fn = static_cast<double>(c[cls][other]);
    cm.support = c[cls][0] + c[cls][1];
    cm.precision = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
    cm.recall = tp + fn > 0.0 ? tp / (tp + fn) : 0.0;
    cm.f1 = cm.precision + cm.recall > 0.0
                ? 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall)
                : 0.0;
    return cm;
  };
  m.public_class = per_class(0);
  m.private_class = per_class(1);
  return m;
}

Metrics metrics_from_predictions(std::span<const Label> truth,
                                 std::span<const Label> predicted) {
  if (truth.size() != predicted.size())
    throw DataError("truth/prediction length mismatch");
  std::array<std::array<std::size_t, 2>, 2> c{};
  for (std::size_t i = 0; i < truth.size(); ++i)
    ++c[truth[i] == Label::kPrivate][predicted[i] == Label::kPrivate];
  return metrics_from_confusion(c);
}

Metrics evaluate(const Forest& forest, const FeatureMatrix& X,
                 std::span<const Label> labels) {
  if (X.rows() == 0) throw DataError("empty test set");
  if (static_cast<std::size_t>(X.rows()) != labels.size())
    throw DataError("features/labels length mismatch");
  std::vector<Label> predicted;
  predicted.reserve(labels.size());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    Eigen::VectorXd row = X.row(i).transpose();
    predicted.push_back(predict(forest, row).label);
  }
  return metrics_from_predictions(labels, predicted);
}

std::string Metrics::to_json() const {
  nlohmann::ordered_json j;
  j["accuracy"] = accuracy;
  j["confusion"] = {{confusion[0][0], confusion[0][1]},
                    {confusion[1][0], confusion[1][1]}};
  auto cls = [](const ClassMetrics& c) {
    nlohmann::ordered_json o;
    o["precision"] = c.precision;
    o["recall"] = c.recall;
    o["f1"] = c.f1;
    o["support"] = c.support;
    return o;
  };
  j["private"] = cls(private_class);
  j["public"] = cls(public_class);
  return j.dump(1) + "\n";
}

std::string Forest::to_json() const {
  nlohmann::ordered_json j;
  j["n_features"] = n_features;
  nlohmann::ordered_json p;
  p["n_trees"] = params.n_trees;
  p["max_depth"] = params.max_depth;
  p["min_leaf"] = params.min_leaf;
  p["feature_subsample"] = params.feature_subsample;
  p["seed"] = params.seed;
  p["bootstrap"] = params.bootstrap;
  j["params"] = std::move(p);
  j["base_value"] = base_value;
  auto trees_json = nlohmann::ordered_json::array();
  for (const auto& tree : trees) {
    auto nodes = nlohmann::ordered_json::array();
    for (const auto& n : tree.nodes) {
      nlohmann::ordered_json o;
      o["feature"] = n.feature;
      o["threshold"] = n.threshold;
      o["left"] = n.left;
      o["right"] = n.right;
      o["value"] = n.value;
      o["cover"] = n.cover;
      nodes.push_back(std::move(o));
    }
    trees_json.push_back(std::move(nodes));
  }
  j["trees"] = std::move(trees_json);
  return j.dump() + "\n";
}

Forest Forest::from_json(std::string_view text) {
  try {
    auto j = nlohmann::json::parse(text);
    Forest f;
    f.n_features = j.at("n_features").get<std::size_t>();
    const auto& p = j.at("params");
    f.params.n_trees = p.at("n_trees").get<std::size_t>();
    f.params.max_depth = p.at("max_depth").get<std::size_t>();
    f.params.min_leaf = p.at("min_leaf").get<std::size_t>();
    f.params.feature_subsample = p.at("feature_subsample").get<std::size_t>();
    f.params.seed = p.at("seed").get<std::uint64_t>();
    f.params.bootstrap = p.at("bootstrap").get<bool>();
    f.base_value = j.at("base_value").get<double>();
    for (const auto& tj : j.at("trees")) {
      Tree tree;
      for (const auto& o : tj) {
        TreeNode n;
        n.feature = o.at("feature").get<int>();
        n.threshold = o.at("threshold").get<double>();
        n.left = o.at("left").get<int>();
        n.right = o.at("right").get<int>();
        n.value = o.at("value").get<double>();
        n.cover = o.at("cover").get<double>();
        tree.nodes.push_back(n);
      }
      const auto size = static_cast<int>(tree.nodes.size());
      if (size == 0) throw DataError("tree without nodes");
      for (const auto& n : tree.nodes) {
        if (n.is_leaf()) continue;
        if (n.left >= size || n.right < 0 || n.right >= size || n.feature < 0 ||
            static_cast<std::size_t>(n.feature) >= f.n_features)
          throw DataError("tree node references out of range");
      }
      f.trees.push_back(std::move(tree));
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid forest JSON: ") + e.what());
  }
}

}  // namespace peak
