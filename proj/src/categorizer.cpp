#include "peak/categorizer.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>

#include <json.hpp>

#include "peak/error.hpp"
#include "peak/renderer.hpp"

namespace peak {

std::string_view to_string(Category c) {
  switch (c) {
    case Category::kDominant: return "dominant";
    case Category::kOpposing: return "opposing";
    case Category::kCollaborative: return "collaborative";
    case Category::kWeak: return "weak";
  }
  return "weak";
}

Category parse_category(std::string_view text) {
  for (Category c : kAllCategories)
    if (to_string(c) == text) return c;
  throw DataError("unknown category \"" + std::string(text) + "\"");
}

void CategorizerConfig::validate(std::size_t k) const {
  if (!(ob > 0.0 && ob <= db && db <= 1.0))
    throw DataError("categorizer bounds must satisfy 0 < ob <= db <= 1");
  if (!(cb > 0.0 && cb <= 1.0)) throw DataError("cb must lie in (0, 1]");
  const std::size_t n = n_topics == 0 ? k : n_topics;
  if (n < 1 || n > k)
    throw DataError("N=" + std::to_string(n) + " outside [1, " + std::to_string(k) + "]");
  if (tags_per_topic < 1) throw DataError("tags per topic must be >= 1");
}

std::vector<const TopicTags*> Explanation::side(Sign sign) const {
  std::vector<const TopicTags*> out;
  for (const auto& t : topics)
    if (t.sign == sign) out.push_back(&t);
  return out;
}

namespace {

Sign sign_of(Label l) { return l == Label::kPrivate ? Sign::kPositive : Sign::kNegative; }
Label lean_of(Sign s) { return s == Sign::kPositive ? Label::kPrivate : Label::kPublic; }

TopicTags topic_tags(std::size_t topic, Sign sign, const TaggedImage& image,
                     const TopicModel& model, std::size_t depth) {
  TopicTags out;
  out.topic = topic;
  out.name = model.name(topic);
  out.sign = sign;
  const std::set<std::string> image_tags(image.tags.begin(), image.tags.end());
  std::vector<std::string> ranked;
  const auto terms = model.terms();
  for (auto& tag : top_tags(model, topic, depth)) {
    const auto col = std::find(terms.begin(), terms.end(), tag) - terms.begin();
    if (model.H()(static_cast<Eigen::Index>(topic), col) > 0.0) ranked.push_back(std::move(tag));
  }
  for (const auto& tag : ranked)
    if (image_tags.count(tag)) out.tags.push_back(tag);
  if (out.tags.empty()) {
    out.model_derived = true;
    out.tags.assign(ranked.begin(), ranked.begin() + static_cast<long>(std::min<std::size_t>(3, ranked.size())));
  }
  return out;
}

std::vector<std::string> names_of(const std::vector<TopicTags>& v, Sign sign) {
  std::vector<std::string> out;
  for (const auto& t : v)
    if (t.sign == sign) out.push_back(t.name);
  return out;
}

}  // namespace

Explanation categorize(const NormalizedAttribution& attr, const TaggedImage& image,
                       const TopicModel& model, const CategorizerConfig& cfg,
                       WeakTextStyle weak_style) {
  const std::size_t k = model.k();
  if (attr.norm.size() != k || attr.signs.size() != k || attr.order.size() != k)
    throw DataError("attribution has " + std::to_string(attr.norm.size()) +
                    " topics, model has " + std::to_string(k));
  cfg.validate(k);
  const std::size_t n_examined = cfg.n_topics == 0 ? k : cfg.n_topics;
  const std::size_t depth = cfg.tags_per_topic;

  Explanation e;
  e.id = image.id;
  e.predicted = label_for(attr.output);
  e.direction = e.predicted;

  auto weak = [&] {
    e.category = Category::kWeak;
    for (std::size_t i = 0; i < std::min<std::size_t>(3, k); ++i) {
      const std::size_t t = attr.order[i];
      e.topics.push_back(topic_tags(t, attr.signs[t], image, model, depth));
    }
  };

  if (attr.degenerate) {
    weak();
  } else if (attr.norm[attr.order[0]] >= cfg.db) {
    const std::size_t t = attr.order[0];
    e.category = Category::kDominant;
    e.direction = lean_of(attr.signs[t]);
    e.topics.push_back(topic_tags(t, attr.signs[t], image, model, depth));
  } else {
    double c_sum_pos = 0.0, c_sum_neg = 0.0;
    std::vector<std::size_t> c_pos, c_neg, o_pos, o_neg;
    for (std::size_t n = 0; n < n_examined; ++n) {
      const std::size_t t = attr.order[n];
      if (attr.signs[t] == Sign::kPositive) {
        c_sum_pos += attr.norm[t];
        c_pos.push_back(t);
        if (attr.norm[t] >= cfg.ob) o_pos.push_back(t);
      } else if (attr.signs[t] == Sign::kNegative) {
        c_sum_neg += attr.norm[t];
        c_neg.push_back(t);
        if (attr.norm[t] >= cfg.ob) o_neg.push_back(t);
      }
    }
    auto take = [&](const std::vector<std::size_t>& ids, Sign s, std::size_t limit) {
      for (std::size_t i = 0; i < std::min(limit, ids.size()); ++i)
        e.topics.push_back(topic_tags(ids[i], s, image, model, depth));
    };
    if (!o_pos.empty() && !o_neg.empty()) {
      e.category = Category::kOpposing;
      take(o_pos, Sign::kPositive, o_pos.size());
      take(o_neg, Sign::kNegative, o_neg.size());
    } else if (c_sum_pos >= cfg.cb) {
      e.category = Category::kCollaborative;
      e.direction = Label::kPrivate;
      take(c_pos, Sign::kPositive, 3);
    } else if (c_sum_neg >= cfg.cb) {
      e.category = Category::kCollaborative;
      e.direction = Label::kPublic;
      take(c_neg, Sign::kNegative, 3);
    } else {
      weak();
    }
  }

  std::vector<std::string> supporting, opposing;
  if (e.category == Category::kOpposing) {
    supporting = names_of(e.topics, sign_of(e.predicted));
    opposing = names_of(e.topics, sign_of(e.predicted == Label::kPrivate ? Label::kPublic
                                                                          : Label::kPrivate));
  } else if (e.category == Category::kWeak && weak_style == WeakTextStyle::kOpposing) {
    supporting = names_of(e.topics, sign_of(e.predicted));
    for (const auto& t : e.topics)
      if (t.sign != sign_of(e.predicted)) opposing.push_back(t.name);
  } else {
    for (const auto& t : e.topics) supporting.push_back(t.name);
  }
  e.text = explanatory_text(e.category, e.predicted, supporting, opposing, weak_style);
  return e;
}

std::string to_json_line(const Explanation& e) {
  nlohmann::ordered_json j;
  j["id"] = e.id;
  j["category"] = to_string(e.category);
  j["predicted"] = to_string(e.predicted);
  j["direction"] = e.direction == Label::kPrivate ? "private-leaning" : "public-leaning";
  auto topics = nlohmann::ordered_json::array();
  for (const auto& t : e.topics) {
    nlohmann::ordered_json o;
    o["name"] = t.name;
    o["tags"] = t.tags;
    o["sign"] = t.sign == Sign::kPositive ? "+" : (t.sign == Sign::kNegative ? "-" : "0");
    o["topic"] = t.topic;
    if (t.model_derived) o["model_derived"] = true;
    topics.push_back(std::move(o));
  }
  j["topics"] = std::move(topics);
  j["text"] = e.text;
  return j.dump();
}

Explanation explanation_from_json_line(std::string_view line) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw DataError("explanation line is not a JSON object");
  try {
    Explanation e;
    e.id = j.at("id").get<std::string>();
    e.category = parse_category(j.at("category").get<std::string>());
    e.predicted = parse_label(j.at("predicted").get<std::string>());
    const auto dir = j.at("direction").get<std::string>();
    if (dir == "private-leaning") e.direction = Label::kPrivate;
    else if (dir == "public-leaning") e.direction = Label::kPublic;
    else throw DataError("unknown direction \"" + dir + "\"");
    for (const auto& o : j.at("topics")) {
      TopicTags t;
      t.name = o.at("name").get<std::string>();
      t.tags = o.at("tags").get<std::vector<std::string>>();
      const auto sign = o.at("sign").get<std::string>();
      if (sign == "+") t.sign = Sign::kPositive;
      else if (sign == "-") t.sign = Sign::kNegative;
      else if (sign == "0") t.sign = Sign::kZero;
      else throw DataError("unknown sign \"" + sign + "\"");
      t.topic = o.at("topic").get<std::size_t>();
      t.model_derived = o.value("model_derived", false);
      e.topics.push_back(std::move(t));
    }
    e.text = j.at("text").get<std::string>();
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("malformed explanation line: ") + ex.what());
  }
}

PartitionReport partition_report(const Corpus& corpus,
                                 std::span<const Explanation> explanations,
                                 std::optional<double> theta) {
  if (corpus.empty()) throw DataError("empty corpus");
  std::map<std::string_view, const Explanation*> by_id;
  for (const auto& e : explanations) by_id.emplace(e.id, &e);

  PartitionRow all{"all"};
  PartitionRow uncertain{"uncertain"};
  for (const auto& img : corpus.images()) {
    auto it = by_id.find(img.id);
    if (it == by_id.end()) throw DataError("missing explanation for image \"" + img.id + "\"");
    const auto c = static_cast<std::size_t>(it->second->category);
    const std::size_t cls = img.label == Label::kPrivate ? 1 : 0;
    ++all.count[c][cls];
    ++all.total;
    if (theta) {
      if (!img.uncertainty)
        throw DataError("image \"" + img.id + "\" has no uncertainty score");
      if (*img.uncertainty > *theta) {
        ++uncertain.count[c][cls];
        ++uncertain.total;
      }
    }
  }
  PartitionReport report;
  auto finish = [&](PartitionRow row) {
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t cls = 0; cls < 2; ++cls)
        row.percent[c][cls] = row.total == 0 ? 0.0
                                             : 100.0 * static_cast<double>(row.count[c][cls]) /
                                                   static_cast<double>(row.total);
    report.rows.push_back(std::move(row));
  };
  finish(std::move(all));
  if (theta) finish(std::move(uncertain));
  return report;
}

std::string PartitionReport::to_table() const {
  std::string out =
      "            dominant         opposing         collaborative    weak\n"
      "            public  private  public  private  public  private  public  private\n";
  char buf[64];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%-10s", row.name.c_str());
    out += buf;
    for (std::size_t c = 0; c < 4; ++c) {
      std::snprintf(buf, sizeof(buf), "  %6.1f  %6.1f ", row.percent[c][0], row.percent[c][1]);
      out += buf;
    }
    out += " (n=" + std::to_string(row.total) + ")\n";
  }
  return out;
}

std::string PartitionReport::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& row : rows) {
    nlohmann::ordered_json r;
    r["name"] = row.name;
    r["total"] = row.total;
    nlohmann::ordered_json cells;
    for (Category c : kAllCategories) {
      const auto ci = static_cast<std::size_t>(c);
      nlohmann::ordered_json cell;
      cell["public"] = {{"count", row.count[ci][0]}, {"percent", row.percent[ci][0]}};
      cell["private"] = {{"count", row.count[ci][1]}, {"percent", row.percent[ci][1]}};
      cells[std::string(to_string(c))] = std::move(cell);
    }
    r["cells"] = std::move(cells);
    j.push_back(std::move(r));
  }
  return j.dump(1) + "\n";
}

}  // namespace peak
