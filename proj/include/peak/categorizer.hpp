#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "peak/attribution.hpp"
#include "peak/corpus.hpp"
#include "peak/topic_model.hpp"

namespace peak {

enum class Category { kDominant, kOpposing, kCollaborative, kWeak };
inline constexpr std::array<Category, 4> kAllCategories = {
    Category::kDominant, Category::kOpposing, Category::kCollaborative,
    Category::kWeak};

std::string_view to_string(Category c);
Category parse_category(std::string_view text);

struct CategorizerConfig {
  double db = 0.7;  // Dominant lower bound
  double ob = 0.2;  // Opposing lower bound
  double cb = 0.8;  // Collaborative lower bound
  std::size_t n_topics = 0;         // topics examined; 0 means all k
  std::size_t tags_per_topic = 20;  // depth of each topic's tag list

  // Requires 0 < ob <= db <= 1, 0 < cb <= 1 and 1 <= N <= k.
  void validate(std::size_t k) const;
};

// How Weak explanations are worded. The listing form names the top three
// topics like a Collaborative explanation; the opposing form reuses the
// Opposing sentence when the topics pull in both directions.
enum class WeakTextStyle { kListing, kOpposing };

struct TopicTags {
  std::size_t topic = 0;
  std::string name;
  std::vector<std::string> tags;  // heaviest topic weight first
  Sign sign = Sign::kZero;
  // No image tag is among the topic's tags; `tags` holds the topic's own
  // leading tags instead.
  bool model_derived = false;

  friend bool operator==(const TopicTags&, const TopicTags&) = default;
};

struct Explanation {
  std::string id;
  Category category = Category::kWeak;
  Label predicted = Label::kPublic;  // class named in the text
  Label direction = Label::kPublic;  // side the selected topics lean toward
  std::string text;
  // Opposing: private-leaning (positive) entries first, then public-leaning.
  std::vector<TopicTags> topics;

  std::vector<const TopicTags*> side(Sign sign) const;
  friend bool operator==(const Explanation&, const Explanation&) = default;
};

// Assigns one of the four categories and selects the topics and tags shown
// to the user. The text is produced with `weak_style` for Weak results.
Explanation categorize(const NormalizedAttribution& attr, const TaggedImage& image,
                       const TopicModel& model, const CategorizerConfig& cfg,
                       WeakTextStyle weak_style = WeakTextStyle::kListing);

// {"id":..., "category":..., "predicted":..., "direction":..., "topics":[{"name":...,
// "tags":[...], "sign":"+|-|0", "topic":i}], "text":...}
std::string to_json_line(const Explanation& e);
Explanation explanation_from_json_line(std::string_view line);

struct PartitionRow {
  std::string name;  // "all" or "uncertain"
  std::size_t total = 0;
  // percent[category][class], class index 0 = public, 1 = private.
  std::array<std::array<double, 2>, 4> percent{};
  std::array<std::array<std::size_t, 2>, 4> count{};
};

struct PartitionReport {
  std::vector<PartitionRow> rows;
  std::string to_table() const;
  std::string to_json() const;
};

// Category x true-class frequency table. When `theta` is given, a second row
// covers images whose uncertainty exceeds it.
PartitionReport partition_report(const Corpus& corpus,
                                 std::span<const Explanation> explanations,
                                 std::optional<double> theta = std::nullopt);

}  // namespace peak
