#include <doctest.h>

#include <filesystem>
#include <set>
#include <string>

#include "peak/corpus.hpp"
#include "peak/error.hpp"
#include "peak/io_util.hpp"
#include "peak/rng.hpp"

using namespace peak;

namespace {

std::string record(const std::string& id, const std::string& label = "public") {
  return "{\"id\":\"" + id + "\",\"tags\":[\"tree\",\"sky\"],\"label\":\"" + label + "\"}\n";
}

Corpus numbered(std::size_t n) {
  Corpus c;
  for (std::size_t i = 0; i < n; ++i) {
    TaggedImage img;
    img.id = "img" + std::to_string(i);
    img.tags = {"a", "b"};
    c.add(img);
  }
  return c;
}

template <typename F>
std::string error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("load two valid lines") {
  const Corpus c = parse_corpus(record("a") + record("b", "private"));
  REQUIRE(c.size() == 2);
  CHECK(c[0].id == "a");
  CHECK(c[1].label == Label::kPrivate);
  CHECK(c.find("b") != nullptr);
  CHECK(c.index_of("b") == 1);
  CHECK(c.find("zzz") == nullptr);
}

TEST_CASE("duplicate id names both lines") {
  std::string text = record("x1") + record("x2") + record("img1") + record("x3") + record("x4") +
                     record("x5") + record("img1");
  const std::string msg = error_of([&] { parse_corpus(text); });
  CHECK(msg.find("img1") != std::string::npos);
  CHECK(msg.find("lines 3 and 7") != std::string::npos);
}

TEST_CASE("labels are case-sensitive") {
  const std::string msg = error_of([] { parse_corpus(record("a", "Private")); });
  CHECK(msg.find("unknown label") != std::string::npos);
  CHECK(msg.find("line 1") != std::string::npos);
  CHECK_THROWS_AS(parse_label("PUBLIC"), DataError);
}

TEST_CASE("malformed records are rejected with line numbers") {
  CHECK(error_of([] { parse_corpus(record("a") + "{not json\n"); }).find("line 2") !=
        std::string::npos);
  CHECK_THROWS_AS(parse_corpus("{\"id\":\"a\",\"tags\":[],\"label\":\"public\"}"), DataError);
  CHECK_THROWS_AS(parse_corpus("{\"id\":\"a\",\"tags\":[\"  \"],\"label\":\"public\"}"), DataError);
  CHECK_THROWS_AS(parse_corpus("{\"id\":\"\",\"tags\":[\"a\"],\"label\":\"public\"}"), DataError);
  CHECK_THROWS_AS(parse_corpus("{\"id\":\"a\",\"tags\":[\"a\"],\"label\":\"public\",\"uncertainty\":1.5}"),
                  DataError);
  CHECK_THROWS_AS(parse_corpus("{\"id\":\"a\",\"tags\":[\"a\"]}"), DataError);
}

TEST_CASE("blank lines are skipped and empty tags allowed for tag-fetch input") {
  CHECK(parse_corpus("\n" + record("a") + "\n\n").size() == 1);
  const Corpus c = parse_corpus("{\"id\":\"a\",\"label\":\"public\",\"image\":\"http://x/1.jpg\"}",
                                LoadOptions{.require_tags = false});
  CHECK(c[0].tags.empty());
  CHECK(c[0].image_ref == "http://x/1.jpg");
}

TEST_CASE("tags are trimmed and lowercased, duplicates kept") {
  const Corpus c =
      parse_corpus("{\"id\":\"a\",\"tags\":[\" Tree \",\"tree\",\"SKY\"],\"label\":\"public\"}");
  CHECK(c[0].tags == std::vector<std::string>{"tree", "tree", "sky"});
  CHECK(normalize_tag("  No Person\t") == "no person");
}

TEST_CASE("label derived from annotations") {
  CHECK(derive_label(std::vector{Label::kPublic, Label::kPrivate, Label::kPublic}) == Label::kPrivate);
  CHECK(derive_label(std::vector{Label::kPublic, Label::kPublic}) == Label::kPublic);
  CHECK_THROWS_AS(derive_label(std::vector<Label>{}), DataError);

  const Corpus c = parse_corpus(
      "{\"id\":\"a\",\"tags\":[\"x\"],\"annotations\":[\"public\",\"private\"]}");
  CHECK(c[0].label == Label::kPrivate);
  CHECK_THROWS_AS(parse_corpus("{\"id\":\"a\",\"tags\":[\"x\"],\"label\":\"public\","
                               "\"annotations\":[\"public\",\"private\"]}"),
                  DataError);
}

TEST_CASE("derive_label is monotone under added private votes") {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Label> votes(1 + rng.below(6));
    for (auto& v : votes) v = rng.uniform() < 0.3 ? Label::kPrivate : Label::kPublic;
    const Label before = derive_label(votes);
    votes.insert(votes.begin() + static_cast<long>(rng.below(votes.size() + 1)), Label::kPrivate);
    CHECK(derive_label(votes) == Label::kPrivate);
    if (before == Label::kPrivate) CHECK(derive_label(votes) == before);
  }
}

TEST_CASE("save then load is the identity") {
  Rng rng(11);
  Corpus c;
  for (int i = 0; i < 40; ++i) {
    TaggedImage img;
    img.id = "id_" + std::to_string(i);
    for (std::size_t t = 0, n = 1 + rng.below(5); t < n; ++t)
      img.tags.push_back("t" + std::to_string(rng.below(7)));
    if (rng.uniform() < 0.5) {
      img.annotations = std::vector<Label>{};
      for (std::size_t a = 0, n = 1 + rng.below(3); a < n; ++a)
        img.annotations->push_back(rng.uniform() < 0.5 ? Label::kPrivate : Label::kPublic);
      img.label = derive_label(*img.annotations);
    } else {
      img.label = rng.uniform() < 0.5 ? Label::kPrivate : Label::kPublic;
    }
    if (rng.uniform() < 0.5) img.uncertainty = rng.uniform();
    if (rng.uniform() < 0.5) img.split = rng.uniform() < 0.5 ? Split::kTrain : Split::kTest;
    if (rng.uniform() < 0.5) img.pure_prediction = Label::kPublic;
    if (rng.uniform() < 0.2) img.image_ref = "file:///img/" + img.id;
    c.add(img);
  }
  CHECK(parse_corpus(serialize_corpus(c)) == c);

  const auto dir = std::filesystem::temp_directory_path() / "peak_test_corpus";
  std::filesystem::remove_all(dir);
  save_corpus(c, dir / "c.jsonl");
  CHECK(load_corpus(dir / "c.jsonl") == c);
  CHECK(serialize_corpus(load_corpus(dir / "c.jsonl")) == read_file(dir / "c.jsonl"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("missing file is an io error") {
  CHECK_THROWS_AS(load_corpus("/nonexistent/peak/corpus.jsonl"), IoError);
}

TEST_CASE("split 100 images 80/20 deterministically") {
  const Corpus c = numbered(100);
  auto [train, test] = split(c, 0.2, 7);
  CHECK(train.size() == 80);
  CHECK(test.size() == 20);
  auto [train2, test2] = split(c, 0.2, 7);
  CHECK(train == train2);
  CHECK(test == test2);

  std::set<std::string> ids;
  for (const auto& img : train.images()) {
    CHECK(img.split == Split::kTrain);
    ids.insert(img.id);
  }
  for (const auto& img : test.images()) {
    CHECK(img.split == Split::kTest);
    CHECK(ids.insert(img.id).second);
  }
  CHECK(ids.size() == 100);
  // Both halves keep corpus order.
  for (std::size_t i = 1; i < test.size(); ++i)
    CHECK(*c.index_of(test[i - 1].id) < *c.index_of(test[i].id));

  auto [train3, test3] = split(c, 0.2, 8);
  CHECK_FALSE(test3 == test);
}

TEST_CASE("existing split tags are honored") {
  std::vector<TaggedImage> images;
  for (int i = 0; i < 10; ++i) {
    TaggedImage img;
    img.id = std::to_string(i);
    img.tags = {"a"};
    img.split = i < 3 ? Split::kTest : Split::kTrain;
    images.push_back(img);
  }
  auto [train, test] = split(Corpus(images), 0.9, 1);
  CHECK(test.size() == 3);
  CHECK(train.size() == 7);
}

TEST_CASE("split fraction out of range") {
  const Corpus c = numbered(10);
  CHECK_THROWS_AS(split(c, 1.0, 1), DataError);
  CHECK_THROWS_AS(split(c, 0.0, 1), DataError);
  CHECK_THROWS_AS(split(c, -0.1, 1), DataError);
}
