#include <doctest.h>

#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "peak/error.hpp"
#include "peak/renderer.hpp"

using namespace peak;

namespace pt = boost::property_tree;

namespace {

std::vector<std::string> v(std::initializer_list<std::string> s) { return s; }

Explanation make(Category c, Label predicted, std::vector<TopicTags> topics) {
  Explanation e;
  e.id = "img_1";
  e.category = c;
  e.predicted = predicted;
  e.direction = predicted;
  e.topics = std::move(topics);
  std::vector<std::string> sup, opp;
  const Sign verdict = predicted == Label::kPrivate ? Sign::kPositive : Sign::kNegative;
  for (const auto& t : e.topics)
    (c == Category::kOpposing && t.sign != verdict ? opp : sup).push_back(t.name);
  e.text = explanatory_text(c, predicted, sup, opp);
  return e;
}

TopicTags tt(std::string name, std::vector<std::string> tags, Sign s) {
  TopicTags t;
  t.name = std::move(name);
  t.tags = std::move(tags);
  t.sign = s;
  return t;
}

pt::ptree parse_svg(const std::string& svg) {
  std::istringstream is(svg);
  pt::ptree tree;
  pt::read_xml(is, tree);
  return tree;
}

std::size_t count_groups(const pt::ptree& svg) {
  std::size_t n = 0;
  for (const auto& [name, child] : svg)
    if (name == "g" && child.get<std::string>("<xmlattr>.class") == "topic") ++n;
  return n;
}

std::size_t occurrences(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("explanatory text templates") {
  CHECK(explanatory_text(Category::kDominant, Label::kPrivate, v({"Child"}), {}) ==
        "The generated explanation for the image being assigned to the private class is that it "
        "is related to the topic Child with the specific tags");
  CHECK(explanatory_text(Category::kOpposing, Label::kPublic, v({"Design"}), v({"Child"})) ==
        "Even though it is related to the topic Child with the specific tags below (which "
        "signals the private class), it is also related to the topic Design and for that "
        "reason, it is classified as public");
  CHECK(explanatory_text(Category::kCollaborative, Label::kPrivate, v({"People", "Fashion", "Room"}), {}) ==
        "The generated explanation for the image being assigned to the private class is that it "
        "is related to the topics People, Fashion, and Room with these specific tags");
  CHECK(explanatory_text(Category::kCollaborative, Label::kPublic, v({"Nature", "City"}), {}) ==
        "The generated explanation for the image being assigned to the public class is that it "
        "is related to the topics Nature and City with these specific tags");
  CHECK(explanatory_text(Category::kWeak, Label::kPublic, v({"A", "B", "C"}), {}).find(
            "the topics A, B, and C with these specific tags") != std::string::npos);
}

TEST_CASE("explanatory text arity checks") {
  CHECK_THROWS_AS(explanatory_text(Category::kDominant, Label::kPrivate, v({"A", "B"}), {}), DataError);
  CHECK_THROWS_AS(explanatory_text(Category::kOpposing, Label::kPrivate, v({"A"}), {}), DataError);
  CHECK_THROWS_AS(explanatory_text(Category::kCollaborative, Label::kPrivate, v({"A", "B", "C", "D"}), {}),
                  DataError);
  CHECK_THROWS_AS(explanatory_text(Category::kWeak, Label::kPrivate, {}, {}), DataError);
}

TEST_CASE("dominant card: one circle, two tag lines, private banner") {
  const Explanation e =
      make(Category::kDominant, Label::kPrivate, {tt("Child", v({"child", "baby"}), Sign::kPositive)});
  const ExplanationCard card = render_card(e);
  REQUIRE(card.layout.size() == 1);
  CHECK(card.layout[0].tags.size() == 2);
  CHECK(card.text == e.text);
  const pt::ptree tree = parse_svg(card.svg);
  const pt::ptree& svg = tree.get_child("svg");
  CHECK(count_groups(svg) == 1);
  CHECK(card.svg.find("<text class=\"verdict\"") != std::string::npos);
  bool banner = false;
  for (const auto& [name, child] : svg)
    if (name == "text" && child.get<std::string>("<xmlattr>.class") == "verdict")
      banner = child.data() == "private";
  CHECK(banner);
  CHECK(occurrences(card.svg, "class=\"tag\"") == 2);
  CHECK(occurrences(card.svg, ">Child<") == 1);
}

TEST_CASE("opposing card has two separated sides") {
  Explanation e = make(Category::kOpposing, Label::kPublic,
                       {tt("Child", v({"kid"}), Sign::kPositive), tt("Design", v({"art"}), Sign::kNegative)});
  const ExplanationCard card = render_card(e);
  REQUIRE(card.layout.size() == 2);
  CHECK(card.layout[0].name == "Design");
  CHECK(card.layout[1].name == "Child");
  CHECK(card.layout[0].cx < card.layout[1].cx);
  CHECK(card.svg.find("class=\"divider\"") != std::string::npos);
  const pt::ptree tree = parse_svg(card.svg);
  CHECK(count_groups(tree.get_child("svg")) == 2);
}

TEST_CASE("tags are capped, escaped and model-derived tags styled") {
  TopicTags t = tt("A & <B>", v({"1", "2", "3", "4", "5", "6", "7", "8"}), Sign::kNegative);
  t.model_derived = true;
  Explanation e = make(Category::kCollaborative, Label::kPublic, {t});
  const ExplanationCard card = render_card(e);
  CHECK(card.layout[0].tags.size() == 6);
  CHECK(card.svg.find("A &amp; &lt;B&gt;") != std::string::npos);
  CHECK(card.svg.find("font-style=\"italic\"") != std::string::npos);
  CHECK_NOTHROW(parse_svg(card.svg));
  CHECK(xml_escape("\"'&<>") == "&quot;&apos;&amp;&lt;&gt;");
}

TEST_CASE("rendering is byte-deterministic") {
  const Explanation e = make(Category::kCollaborative, Label::kPrivate,
                             {tt("People", v({"man"}), Sign::kPositive), tt("Room", v({"bed"}), Sign::kPositive),
                              tt("Party", v({"cake"}), Sign::kPositive)});
  CHECK(render_card(e).svg == render_card(e).svg);
  CardOptions wide;
  wide.width = 1200;
  CHECK(render_card(e, wide).svg != render_card(e).svg);
  const ExplanationCard card = render_card(e);
  for (const auto& name : {"People", "Room", "Party"}) CHECK(occurrences(e.text, name) == 1);
  CHECK(count_groups(parse_svg(card.svg).get_child("svg")) == 3);
}

TEST_CASE("empty explanations are rejected and galleries list every card") {
  Explanation empty;
  CHECK_THROWS_AS(render_card(empty), DataError);
  const std::vector<Explanation> es = {
      make(Category::kDominant, Label::kPublic, {tt("Nature", v({"tree"}), Sign::kNegative)}),
      make(Category::kDominant, Label::kPrivate, {tt("Child", v({"kid"}), Sign::kPositive)})};
  const std::string html = render_gallery(es);
  CHECK(occurrences(html, "<svg ") == 2);
  CHECK(html.find("<?xml") == std::string::npos);
}
