#include "peak/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "peak/error.hpp"
#include "peak/io_util.hpp"
#include "peak/rng.hpp"

namespace peak {

using ojson = nlohmann::ordered_json;

std::string_view to_string(Label label) {
  return label == Label::kPrivate ? "private" : "public";
}

Label parse_label(std::string_view text) {
  if (text == "public") return Label::kPublic;
  if (text == "private") return Label::kPrivate;
  throw DataError("unknown label \"" + std::string(text) +
                  "\" (expected lowercase public|private)");
}

std::string_view to_string(Split split) {
  return split == Split::kTest ? "test" : "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "test") return Split::kTest;
  throw DataError("unknown split \"" + std::string(text) + "\"");
}

Label derive_label(std::span<const Label> annotations) {
  if (annotations.empty()) throw DataError("empty annotation list");
  const bool any_private =
      std::any_of(annotations.begin(), annotations.end(),
                  [](Label l) { return l == Label::kPrivate; });
  return any_private ? Label::kPrivate : Label::kPublic;
}

std::string normalize_tag(std::string_view tag) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!tag.empty() && is_space(tag.front())) tag.remove_prefix(1);
  while (!tag.empty() && is_space(tag.back())) tag.remove_suffix(1);
  std::string out(tag);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

Corpus::Corpus(std::vector<TaggedImage> images) {
  images_.reserve(images.size());
  for (auto& img : images) add(std::move(img));
}

void Corpus::add(TaggedImage image) {
  if (image.id.empty()) throw DataError("image id must not be empty");
  auto [it, inserted] = index_.emplace(image.id, images_.size());
  if (!inserted) throw DataError("duplicate id \"" + image.id + "\"");
  images_.push_back(std::move(image));
}

const TaggedImage* Corpus::find(std::string_view id) const {
  auto idx = index_of(id);
  return idx ? &images_[*idx] : nullptr;
}

std::optional<std::size_t> Corpus::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

TaggedImage parse_record(const ojson& rec, LoadOptions opts) {
  if (!rec.is_object()) throw DataError("record is not a JSON object");
  TaggedImage img;

  auto id = rec.find("id");
  if (id == rec.end() || !id->is_string())
    throw DataError("missing string field \"id\"");
  img.id = id->get<std::string>();
  if (img.id.empty()) throw DataError("empty id");

  if (auto tags = rec.find("tags"); tags != rec.end()) {
    if (!tags->is_array()) throw DataError("\"tags\" must be an array");
    for (const auto& t : *tags) {
      if (!t.is_string()) throw DataError("tags must be strings");
      std::string norm = normalize_tag(t.get<std::string>());
      if (norm.empty()) throw DataError("empty tag");
      img.tags.push_back(std::move(norm));
    }
  }
  if (opts.require_tags && img.tags.empty())
    throw DataError("image \"" + img.id + "\" has no tags");

  if (auto ann = rec.find("annotations"); ann != rec.end() && !ann->is_null()) {
    if (!ann->is_array()) throw DataError("\"annotations\" must be an array");
    std::vector<Label> labels;
    for (const auto& a : *ann) {
      if (!a.is_string()) throw DataError("annotations must be strings");
      labels.push_back(parse_label(a.get<std::string>()));
    }
    if (labels.empty()) throw DataError("empty annotation list");
    img.annotations = std::move(labels);
  }

  auto label = rec.find("label");
  if (label != rec.end() && !label->is_null()) {
    if (!label->is_string()) throw DataError("\"label\" must be a string");
    img.label = parse_label(label->get<std::string>());
    if (img.annotations && derive_label(*img.annotations) != img.label)
      throw DataError("label \"" + std::string(to_string(img.label)) +
                      "\" contradicts annotations");
  } else if (img.annotations) {
    img.label = derive_label(*img.annotations);
  } else {
    throw DataError("missing \"label\" and no annotations to derive it from");
  }

  if (auto u = rec.find("uncertainty"); u != rec.end() && !u->is_null()) {
    if (!u->is_number()) throw DataError("\"uncertainty\" must be a number");
    const double v = u->get<double>();
    if (!(v >= 0.0 && v <= 1.0))
      throw DataError("uncertainty outside [0,1]");
    img.uncertainty = v;
  }
  if (auto s = rec.find("split"); s != rec.end() && !s->is_null()) {
    if (!s->is_string()) throw DataError("\"split\" must be a string");
    img.split = parse_split(s->get<std::string>());
  }
  if (auto p = rec.find("pure_prediction"); p != rec.end() && !p->is_null()) {
    if (!p->is_string()) throw DataError("\"pure_prediction\" must be a string");
    img.pure_prediction = parse_label(p->get<std::string>());
  }
  if (auto r = rec.find("image"); r != rec.end() && !r->is_null()) {
    if (!r->is_string()) throw DataError("\"image\" must be a string");
    img.image_ref = r->get<std::string>();
  }
  return img;
}

}  // namespace

Corpus parse_corpus(std::string_view text, LoadOptions opts) {
  Corpus corpus;
  std::unordered_map<std::string, std::size_t> first_line;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }
    const std::string where = "line " + std::to_string(line_no) + ": ";
    ojson rec;
    try {
      rec = ojson::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + "malformed JSON (" + e.what() + ")");
    }
    TaggedImage img;
    try {
      img = parse_record(rec, opts);
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
    auto [it, inserted] = first_line.emplace(img.id, line_no);
    if (!inserted) {
      throw DataError("duplicate id \"" + img.id + "\" on lines " +
                      std::to_string(it->second) + " and " +
                      std::to_string(line_no));
    }
    corpus.add(std::move(img));
    if (end == text.size()) break;
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, LoadOptions opts) {
  return parse_corpus(read_file(path), opts);
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& img : corpus.images()) {
    ojson rec;
    rec["id"] = img.id;
    rec["tags"] = img.tags;
    rec["label"] = to_string(img.label);
    if (img.annotations) {
      ojson ann = ojson::array();
      for (Label l : *img.annotations) ann.push_back(to_string(l));
      rec["annotations"] = std::move(ann);
    }
    if (img.uncertainty) rec["uncertainty"] = *img.uncertainty;
    if (img.split) rec["split"] = to_string(*img.split);
    if (img.pure_prediction) rec["pure_prediction"] = to_string(*img.pure_prediction);
    if (img.image_ref) rec["image"] = *img.image_ref;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_corpus(corpus));
}

std::pair<Corpus, Corpus> split(const Corpus& corpus, double test_fraction,
                                std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw DataError("test_fraction must lie strictly between 0 and 1");

  const std::size_t n = corpus.size();
  std::vector<Split> assigned(n, Split::kTrain);
  std::vector<std::size_t> untagged;
  for (std::size_t i = 0; i < n; ++i) {
    if (corpus[i].split) {
      assigned[i] = *corpus[i].split;
    } else {
      untagged.push_back(i);
    }
  }
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(untagged));
  const auto n_test = static_cast<std::size_t>(
      std::llround(test_fraction * static_cast<double>(untagged.size())));
  for (std::size_t j = 0; j < n_test; ++j) assigned[untagged[j]] = Split::kTest;

  Corpus train, test;
  for (std::size_t i = 0; i < n; ++i) {
    TaggedImage img = corpus[i];
    img.split = assigned[i];
    (assigned[i] == Split::kTest ? test : train).add(std::move(img));
  }
  return {std::move(train), std::move(test)};
}

}  // namespace peak
