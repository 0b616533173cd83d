#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "peak/categorizer.hpp"

namespace peak {

// Fills the category's sentence pattern. `supporting` topics push toward
// `class_label`; `opposing` topics push toward the other class (Opposing only).
// Throws DataError when the topic counts do not fit the category.
std::string explanatory_text(Category category, Label class_label,
                             std::span<const std::string> supporting,
                             std::span<const std::string> opposing,
                             WeakTextStyle weak_style = WeakTextStyle::kListing);

struct CardOptions {
  double width = 800.0;
  std::string private_stroke = "#c0392b";
  std::string public_stroke = "#2471a3";
  std::string neutral_stroke = "#7f8c8d";
  std::size_t max_tags = 6;
};

struct CircleLayout {
  std::string name;
  double cx = 0.0;
  double cy = 0.0;
  double r = 0.0;
  std::vector<std::string> tags;
};

struct ExplanationCard {
  std::string svg;
  std::string text;
  std::vector<CircleLayout> layout;
};

ExplanationCard render_card(const Explanation& explanation,
                            const CardOptions& options = {});

// Static HTML page embedding each card next to its id and text.
std::string render_gallery(std::span<const Explanation> explanations,
                           const CardOptions& options = {});

std::string xml_escape(std::string_view text);

}  // namespace peak
