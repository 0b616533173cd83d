#include "peak/renderer.hpp"

#include <algorithm>
#include <cstdio>

#include "peak/error.hpp"

namespace peak {

namespace {

std::string join_names(std::span<const std::string> names) {
  if (names.size() == 1) return names[0];
  if (names.size() == 2) return names[0] + " and " + names[1];
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i > 0) out += ", ";
    if (i + 1 == names.size()) out += "and ";
    out += names[i];
  }
  return out;
}

std::string topic_phrase(std::span<const std::string> names) {
  return (names.size() == 1 ? "the topic " : "the topics ") + join_names(names);
}

std::string class_word(Label l) { return std::string(to_string(l)); }
Label other(Label l) { return l == Label::kPrivate ? Label::kPublic : Label::kPrivate; }

std::string assigned_sentence(Label cls, std::span<const std::string> topics,
                              const char* tail) {
  return "The generated explanation for the image being assigned to the " +
         class_word(cls) + " class is that it is related to " + topic_phrase(topics) +
         tail;
}

std::string opposing_sentence(Label cls, std::span<const std::string> supporting,
                              std::span<const std::string> opposing) {
  return "Even though it is related to " + topic_phrase(opposing) +
         " with the specific tags below (which signals the " + class_word(other(cls)) +
         " class), it is also related to " + topic_phrase(supporting) +
         " and for that reason, it is classified as " + class_word(cls);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

std::vector<std::string> wrap(const std::string& text, std::size_t width) {
  std::vector<std::string> lines;
  std::string line;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find(' ', pos);
    if (end == std::string::npos) end = text.size();
    const std::string word = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.size() + 1 + word.size() > width) {
      lines.push_back(line);
      line.clear();
    }
    if (!line.empty()) line += ' ';
    line += word;
  }
  if (!line.empty()) lines.push_back(line);
  return lines;
}

const std::string& stroke_for(Sign s, const CardOptions& o) {
  if (s == Sign::kPositive) return o.private_stroke;
  if (s == Sign::kNegative) return o.public_stroke;
  return o.neutral_stroke;
}

}  // namespace

std::string xml_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string explanatory_text(Category category, Label class_label,
                             std::span<const std::string> supporting,
                             std::span<const std::string> opposing,
                             WeakTextStyle weak_style) {
  switch (category) {
    case Category::kDominant:
      if (supporting.size() != 1 || !opposing.empty())
        throw DataError("Dominant explanation needs exactly one topic");
      return assigned_sentence(class_label, supporting, " with the specific tags");
    case Category::kOpposing:
      if (supporting.empty() || opposing.empty())
        throw DataError("Opposing explanation needs topics on both sides");
      return opposing_sentence(class_label, supporting, opposing);
    case Category::kCollaborative:
      if (supporting.empty() || supporting.size() > 3 || !opposing.empty())
        throw DataError("Collaborative explanation needs one to three topics");
      return assigned_sentence(class_label, supporting, " with these specific tags");
    case Category::kWeak: {
      if (weak_style == WeakTextStyle::kOpposing && !supporting.empty() && !opposing.empty())
        return opposing_sentence(class_label, supporting, opposing);
      std::vector<std::string> all(supporting.begin(), supporting.end());
      all.insert(all.end(), opposing.begin(), opposing.end());
      if (all.empty() || all.size() > 3)
        throw DataError("Weak explanation needs one to three topics");
      return assigned_sentence(class_label, all, " with these specific tags");
    }
  }
  throw DataError("unknown category");
}

ExplanationCard render_card(const Explanation& explanation, const CardOptions& options) {
  if (explanation.topics.empty()) throw DataError("explanation has no topics");
  ExplanationCard card;
  card.text = explanation.text;

  // Opposing cards put the topics backing the verdict on the left and the
  // counter-signal on the right, separated by a divider.
  std::vector<const TopicTags*> left, right;
  if (explanation.category == Category::kOpposing) {
    const Sign verdict =
        explanation.predicted == Label::kPrivate ? Sign::kPositive : Sign::kNegative;
    for (const auto& t : explanation.topics) (t.sign == verdict ? left : right).push_back(&t);
  } else {
    for (const auto& t : explanation.topics) left.push_back(&t);
  }
  const bool divided = !right.empty();
  const std::size_t slots = left.size() + right.size() + (divided ? 1 : 0);
  const double margin = 20.0;
  const double slot_w = (options.width - 2 * margin) / static_cast<double>(slots);
  const double r = std::clamp(slot_w / 2.0 - 8.0, 30.0, 95.0);
  const double banner_h = 56.0;
  const double cy = banner_h + 24.0 + r;
  const auto text_lines = wrap(explanation.text, static_cast<std::size_t>(options.width / 7.5));
  const double text_top = cy + r + 36.0;
  const double height = text_top + 18.0 * static_cast<double>(text_lines.size()) + 16.0;

  auto place = [&](const TopicTags* t, std::size_t slot) {
    CircleLayout c;
    c.name = t->name;
    c.cx = margin + slot_w * (static_cast<double>(slot) + 0.5);
    c.cy = cy;
    c.r = r;
    const std::size_t n = std::min(options.max_tags, t->tags.size());
    c.tags.assign(t->tags.begin(), t->tags.begin() + static_cast<long>(n));
    return c;
  };
  std::size_t slot = 0;
  for (const auto* t : left) card.layout.push_back(place(t, slot++));
  const double divider_x = margin + slot_w * (static_cast<double>(slot) + 0.5);
  if (divided) ++slot;
  for (const auto* t : right) card.layout.push_back(place(t, slot++));

  const std::string verdict = class_word(explanation.predicted);
  const std::string& banner_fill =
      explanation.predicted == Label::kPrivate ? options.private_stroke : options.public_stroke;

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
       fmt(options.width) + "\" height=\"" + fmt(height) + "\" viewBox=\"0 0 " +
       fmt(options.width) + " " + fmt(height) + "\">\n";
  s += "  <rect class=\"background\" x=\"0\" y=\"0\" width=\"" + fmt(options.width) +
       "\" height=\"" + fmt(height) + "\" fill=\"#ffffff\"/>\n";
  s += "  <rect class=\"banner\" x=\"0\" y=\"0\" width=\"" + fmt(options.width) +
       "\" height=\"" + fmt(banner_h) + "\" fill=\"" + banner_fill + "\"/>\n";
  s += "  <text class=\"verdict\" x=\"" + fmt(margin) + "\" y=\"36.0\" font-family=\"sans-serif\" "
       "font-size=\"24\" font-weight=\"bold\" fill=\"#ffffff\">" + xml_escape(verdict) + "</text>\n";
  s += "  <text class=\"category\" x=\"" + fmt(options.width - margin) +
       "\" y=\"35.0\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"16\" "
       "fill=\"#ffffff\">" + xml_escape(to_string(explanation.category)) + "</text>\n";
  if (divided) {
    s += "  <line class=\"divider\" x1=\"" + fmt(divider_x) + "\" y1=\"" +
         fmt(cy - r) + "\" x2=\"" + fmt(divider_x) + "\" y2=\"" + fmt(cy + r) +
         "\" stroke=\"#999999\" stroke-dasharray=\"6 4\"/>\n";
  }
  for (std::size_t i = 0; i < card.layout.size(); ++i) {
    const auto& c = card.layout[i];
    const TopicTags* src = i < left.size() ? left[i] : right[i - left.size()];
    s += "  <g class=\"topic\">\n";
    s += "    <circle cx=\"" + fmt(c.cx) + "\" cy=\"" + fmt(c.cy) + "\" r=\"" + fmt(c.r) +
         "\" fill=\"none\" stroke=\"" + stroke_for(src->sign, options) +
         "\" stroke-width=\"3\"/>\n";
    s += "    <text class=\"topic-name\" x=\"" + fmt(c.cx) + "\" y=\"" +
         fmt(c.cy - c.r + 28.0) + "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"16\" font-weight=\"bold\">" + xml_escape(c.name) + "</text>\n";
    const double line_h = std::min(16.0, (1.4 * c.r - 20.0) / std::max<double>(1.0, static_cast<double>(c.tags.size())));
    const double first_y = c.cy - c.r + 52.0;
    for (std::size_t j = 0; j < c.tags.size(); ++j) {
      s += "    <text class=\"tag\" x=\"" + fmt(c.cx) + "\" y=\"" +
           fmt(first_y + line_h * static_cast<double>(j)) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\"" +
           (src->model_derived ? " font-style=\"italic\"" : "") + ">" +
           xml_escape(c.tags[j]) + "</text>\n";
    }
    s += "  </g>\n";
  }
  s += "  <text class=\"explanation\" x=\"" + fmt(margin) + "\" y=\"" + fmt(text_top) +
       "\" font-family=\"sans-serif\" font-size=\"13\">\n";
  for (std::size_t i = 0; i < text_lines.size(); ++i) {
    s += "    <tspan x=\"" + fmt(margin) + "\" dy=\"" + (i == 0 ? "0.0" : "18.0") + "\">" +
         xml_escape(text_lines[i]) + "</tspan>\n";
  }
  s += "  </text>\n";
  s += "</svg>\n";
  card.svg = std::move(s);
  return card;
}

std::string render_gallery(std::span<const Explanation> explanations,
                           const CardOptions& options) {
  std::string html =
      "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
      "<title>Explanation gallery</title>\n"
      "<style>body{font-family:sans-serif} .card{display:flex;gap:24px;"
      "border-bottom:1px solid #ddd;padding:12px} .meta{width:260px}</style>\n"
      "</head>\n<body>\n";
  for (const auto& e : explanations) {
    const auto card = render_card(e, options);
    std::string svg = card.svg;
    if (svg.rfind("<?xml", 0) == 0) svg = svg.substr(svg.find('\n') + 1);
    html += "<div class=\"card\">\n<div class=\"meta\"><h3>" + xml_escape(e.id) + "</h3><p>" +
            xml_escape(to_string(e.category)) + " / " + class_word(e.predicted) + "</p><p>" +
            xml_escape(e.text) + "</p></div>\n" + svg + "</div>\n";
  }
  html += "</body>\n</html>\n";
  return html;
}

}  // namespace peak
