#include "peak/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <bit>
#include <cstdint>
#include <numeric>

#include <json.hpp>

#include "peak/error.hpp"

namespace peak {

double ShapAttribution::output() const {
  return base + std::accumulate(phi.begin(), phi.end(), 0.0);
}

namespace {

void check_forest(const Forest& forest, std::span<const double> w) {
  if (w.size() != forest.n_features)
    throw DataError("feature vector has length " + std::to_string(w.size()) +
                    ", forest expects " + std::to_string(forest.n_features));
  if (forest.trees.empty()) throw DataError("forest has no trees");
  for (const auto& tree : forest.trees)
    for (const auto& n : tree.nodes)
      if (!(n.cover > 0.0)) throw DataError("tree node without cover statistics");
}

double expected_from(const Tree& tree, int idx) {
  const auto& n = tree.nodes[static_cast<std::size_t>(idx)];
  if (n.is_leaf()) return n.value;
  const auto& l = tree.nodes[static_cast<std::size_t>(n.left)];
  const auto& r = tree.nodes[static_cast<std::size_t>(n.right)];
  return (l.cover * expected_from(tree, n.left) + r.cover * expected_from(tree, n.right)) /
         n.cover;
}

// One entry of the decision path tracked by TreeSHAP. `pweight` holds the
// permutation weight of subsets of a given size that reach this depth.
struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double pweight = 0.0;
};

void extend_path(PathElement* path, std::size_t depth, double zero_fraction,
                 double one_fraction, int feature) {
  path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
  const double d1 = static_cast<double>(depth + 1);
  for (std::size_t i = depth; i-- > 0;) {
    path[i + 1].pweight += one_fraction * path[i].pweight * static_cast<double>(i + 1) / d1;
    path[i].pweight = zero_fraction * path[i].pweight * static_cast<double>(depth - i) / d1;
  }
}

void unwind_path(PathElement* path, std::size_t depth, std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const double d1 = static_cast<double>(depth + 1);
  double next_one_portion = path[depth].pweight;
  for (std::size_t i = depth; i-- > 0;) {
    if (one != 0.0) {
      const double tmp = path[i].pweight;
      path[i].pweight = next_one_portion * d1 / (static_cast<double>(i + 1) * one);
      next_one_portion = tmp - path[i].pweight * zero * static_cast<double>(depth - i) / d1;
    } else {
      path[i].pweight = path[i].pweight * d1 / (zero * static_cast<double>(depth - i));
    }
  }
  for (std::size_t i = index; i < depth; ++i) {
    path[i].feature = path[i + 1].feature;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
}

// Total permutation weight of the path with element `index` removed.
double unwound_path_sum(const PathElement* path, std::size_t depth, std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const double d1 = static_cast<double>(depth + 1);
  double next_one_portion = path[depth].pweight;
  double total = 0.0;
  for (std::size_t i = depth; i-- > 0;) {
    if (one != 0.0) {
      const double tmp = next_one_portion * d1 / (static_cast<double>(i + 1) * one);
      total += tmp;
      next_one_portion =
          path[i].pweight - tmp * zero * (static_cast<double>(depth - i) / d1);
    } else if (zero != 0.0) {
      total += (path[i].pweight / zero) / (static_cast<double>(depth - i) / d1);
    }
  }
  return total;
}

class PathDependentShap {
 public:
  PathDependentShap(const Tree& tree, std::span<const double> x, std::span<double> phi)
      : tree_(tree), x_(x), phi_(phi) {
    std::size_t max_depth = depth_of(0);
    // Each recursion level stores its own copy of the path.
    storage_.resize((max_depth + 3) * (max_depth + 4) / 2);
  }

  void run() { recurse(0, storage_.data(), 0, 1.0, 1.0, -1); }

 private:
  std::size_t depth_of(int idx) const {
    const auto& n = tree_.nodes[static_cast<std::size_t>(idx)];
    if (n.is_leaf()) return 0;
    return 1 + std::max(depth_of(n.left), depth_of(n.right));
  }

  void recurse(int idx, PathElement* parent_path, std::size_t depth,
               double zero_fraction, double one_fraction, int feature) {
    PathElement* path = parent_path + depth + 1;
    std::copy(parent_path, parent_path + depth + 1, path);
    extend_path(path, depth, zero_fraction, one_fraction, feature);

    const auto& node = tree_.nodes[static_cast<std::size_t>(idx)];
    if (node.is_leaf()) {
      for (std::size_t i = 1; i <= depth; ++i) {
        const double w = unwound_path_sum(path, depth, i);
        const auto& el = path[i];
        phi_[static_cast<std::size_t>(el.feature)] +=
            w * (el.one_fraction - el.zero_fraction) * node.value;
      }
      return;
    }

    const bool go_left = x_[static_cast<std::size_t>(node.feature)] <= node.threshold;
    const int hot = go_left ? node.left : node.right;
    const int cold = go_left ? node.right : node.left;
    const double hot_zero = tree_.nodes[static_cast<std::size_t>(hot)].cover / node.cover;
    const double cold_zero = tree_.nodes[static_cast<std::size_t>(cold)].cover / node.cover;
    double incoming_zero = 1.0;
    double incoming_one = 1.0;

    // A feature already on the path is unwound so it appears only once.
    std::size_t path_index = 0;
    for (; path_index <= depth; ++path_index)
      if (path[path_index].feature == node.feature) break;
    if (path_index != depth + 1) {
      incoming_zero = path[path_index].zero_fraction;
      incoming_one = path[path_index].one_fraction;
      unwind_path(path, depth, path_index);
      --depth;
    }
    recurse(hot, path, depth + 1, hot_zero * incoming_zero, incoming_one, node.feature);
    recurse(cold, path, depth + 1, cold_zero * incoming_zero, 0.0, node.feature);
  }

  const Tree& tree_;
  std::span<const double> x_;
  std::span<double> phi_;
  std::vector<PathElement> storage_;
};

// Expected tree output when only the features in `mask` are known.
double conditional_expectation(const Tree& tree, int idx, std::span<const double> x,
                               std::uint32_t mask) {
  const auto& n = tree.nodes[static_cast<std::size_t>(idx)];
  if (n.is_leaf()) return n.value;
  if (mask & (1u << n.feature)) {
    const int next = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    return conditional_expectation(tree, next, x, mask);
  }
  const auto& l = tree.nodes[static_cast<std::size_t>(n.left)];
  const auto& r = tree.nodes[static_cast<std::size_t>(n.right)];
  return (l.cover * conditional_expectation(tree, n.left, x, mask) +
          r.cover * conditional_expectation(tree, n.right, x, mask)) /
         n.cover;
}

}  // namespace

double expected_value(const Tree& tree) {
  if (tree.nodes.empty()) throw DataError("tree has no nodes");
  return expected_from(tree, 0);
}

double expected_value(const Forest& forest) {
  if (forest.trees.empty()) throw DataError("forest has no trees");
  double sum = 0.0;
  for (const auto& t : forest.trees) sum += expected_value(t);
  return sum / static_cast<double>(forest.trees.size());
}

std::vector<double> tree_shap(const Tree& tree, std::span<const double> w,
                              std::size_t n_features) {
  std::vector<double> phi(n_features, 0.0);
  PathDependentShap(tree, w, phi).run();
  return phi;
}

ShapAttribution tree_shap(const Forest& forest, std::span<const double> w) {
  check_forest(forest, w);
  ShapAttribution out;
  out.phi.assign(forest.n_features, 0.0);
  for (const auto& tree : forest.trees) PathDependentShap(tree, w, out.phi).run();
  const double scale = 1.0 / static_cast<double>(forest.trees.size());
  for (auto& v : out.phi) v *= scale;
  out.base = expected_value(forest);
  return out;
}

ShapAttribution brute_force_shap(const Forest& forest, std::span<const double> w) {
  if (forest.n_features > kBruteForceFeatureLimit)
    throw DataError("feature count exceeds oracle limit of " +
                    std::to_string(kBruteForceFeatureLimit));
  check_forest(forest, w);
  const std::size_t k = forest.n_features;
  const std::uint32_t n_masks = 1u << k;
  std::vector<double> value(n_masks, 0.0);
  for (std::uint32_t mask = 0; mask < n_masks; ++mask) {
    double sum = 0.0;
    for (const auto& tree : forest.trees) sum += conditional_expectation(tree, 0, w, mask);
    value[mask] = sum / static_cast<double>(forest.trees.size());
  }

  // weight[s] = s! (k - s - 1)! / k!
  std::vector<double> factorial(k + 1, 1.0);
  for (std::size_t i = 1; i <= k; ++i) factorial[i] = factorial[i - 1] * static_cast<double>(i);
  std::vector<double> weight(k, 0.0);
  for (std::size_t s = 0; s < k; ++s)
    weight[s] = factorial[s] * factorial[k - s - 1] / factorial[k];

  ShapAttribution out;
  out.phi.assign(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const std::uint32_t bit = 1u << i;
    double acc = 0.0;
    for (std::uint32_t mask = 0; mask < n_masks; ++mask) {
      if (mask & bit) continue;
      acc += weight[static_cast<std::size_t>(std::popcount(mask))] *
             (value[mask | bit] - value[mask]);
    }
    out.phi[i] = acc;
  }
  out.base = value[0];
  return out;
}

NormalizedAttribution normalize(const ShapAttribution& attr) {
  NormalizedAttribution out;
  const std::size_t k = attr.phi.size();
  out.output = attr.output();
  double total = 0.0;
  for (double v : attr.phi) total += std::abs(v);
  out.norm.assign(k, 0.0);
  out.signs.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double v = attr.phi[i];
    out.signs[i] = v > 0.0 ? Sign::kPositive : (v < 0.0 ? Sign::kNegative : Sign::kZero);
    if (total > 0.0) out.norm[i] = std::abs(v) / total;
  }
  out.degenerate = !(total > 0.0);
  out.order.resize(k);
  std::iota(out.order.begin(), out.order.end(), std::size_t{0});
  std::stable_sort(out.order.begin(), out.order.end(), [&](std::size_t a, std::size_t b) {
    return out.norm[a] > out.norm[b];
  });
  return out;
}

std::string to_json_line(const ShapAttribution& attr) {
  nlohmann::ordered_json j;
  j["id"] = attr.id;
  j["base"] = attr.base;
  j["phi"] = attr.phi;
  return j.dump();
}

ShapAttribution attribution_from_json_line(std::string_view line) {
  try {
    auto j = nlohmann::json::parse(line);
    ShapAttribution a;
    a.id = j.at("id").get<std::string>();
    a.base = j.at("base").get<double>();
    a.phi = j.at("phi").get<std::vector<double>>();
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid attribution record: ") + e.what());
  }
}

}  // namespace peak
