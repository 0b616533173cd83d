#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "peak/forest.hpp"

namespace peak {

// The explained scalar is the forest's probability of the private class, so a
// positive contribution pushes toward private and a negative one toward public.
struct ShapAttribution {
  std::string id;
  std::vector<double> phi;  // one entry per topic
  double base = 0.0;        // cover-weighted expected forest output

  // base + sum(phi); equals the forest prediction by local accuracy.
  double output() const;
};

enum class Sign { kNegative = -1, kZero = 0, kPositive = 1 };

struct NormalizedAttribution {
  std::vector<double> norm;  // |phi_i| / sum_j |phi_j|
  std::vector<Sign> signs;
  // Topic indices by norm descending, ties by ascending index.
  std::vector<std::size_t> order;
  bool degenerate = false;   // every phi was zero
  double output = 0.0;       // forwarded model output (probability of private)
};

// Cover-weighted mean of leaf values, i.e. the expectation used as the
// attribution baseline.
double expected_value(const Tree& tree);
double expected_value(const Forest& forest);

// Path-dependent TreeSHAP, averaged over the forest's trees. Polynomial in
// tree depth; requires positive cover on every node.
ShapAttribution tree_shap(const Forest& forest, std::span<const double> w);
std::vector<double> tree_shap(const Tree& tree, std::span<const double> w,
                              std::size_t n_features);

inline constexpr std::size_t kBruteForceFeatureLimit = 16;

// Exact Shapley values by enumerating all 2^k feature subsets, with features
// outside a coalition marginalised by cover along the tree paths. Verification
// oracle for tree_shap.
ShapAttribution brute_force_shap(const Forest& forest, std::span<const double> w);

NormalizedAttribution normalize(const ShapAttribution& attr);

// {"id":..., "base":..., "phi":[...]}
std::string to_json_line(const ShapAttribution& attr);
ShapAttribution attribution_from_json_line(std::string_view line);

}  // namespace peak
