#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace peak {

enum class Label { kPublic, kPrivate };
enum class Split { kTrain, kTest };

// Parsing is case-sensitive: only "public" and "private" are accepted.
std::string_view to_string(Label label);
Label parse_label(std::string_view text);
std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct TaggedImage {
  std::string id;
  std::vector<std::string> tags;
  Label label = Label::kPublic;
  std::optional<std::vector<Label>> annotations;
  std::optional<double> uncertainty;
  std::optional<Split> split;
  // Upstream assistant's decision, consumed by the delegation simulation.
  std::optional<Label> pure_prediction;
  // Source reference (URL or path) used by the tagger adapter.
  std::optional<std::string> image_ref;

  friend bool operator==(const TaggedImage&, const TaggedImage&) = default;
};

// Private iff at least one annotator said private. Throws DataError on an
// empty list.
Label derive_label(std::span<const Label> annotations);

// Lowercases and trims a tag. Returns an empty string for blank input.
std::string normalize_tag(std::string_view tag);

// Insertion-ordered collection of images with unique ids. Immutable once
// built; the mutating entry point is add(), used while loading.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<TaggedImage> images);

  void add(TaggedImage image);

  std::span<const TaggedImage> images() const { return images_; }
  std::size_t size() const { return images_.size(); }
  bool empty() const { return images_.empty(); }
  const TaggedImage& operator[](std::size_t i) const { return images_[i]; }
  const TaggedImage* find(std::string_view id) const;
  std::optional<std::size_t> index_of(std::string_view id) const;

  friend bool operator==(const Corpus& a, const Corpus& b) {
    return a.images_ == b.images_;
  }

 private:
  std::vector<TaggedImage> images_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct LoadOptions {
  // tag-fetch input lists images before their tags exist.
  bool require_tags = true;
};

// JSON-lines, one object per line; blank lines are skipped. Records that fail
// validation raise DataError naming the offending line number.
Corpus load_corpus(const std::filesystem::path& path, LoadOptions opts = {});
Corpus parse_corpus(std::string_view text, LoadOptions opts = {});

std::string serialize_corpus(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

// Deterministic train/test partition. Images that already carry a split tag
// keep it; the remainder are shuffled with `seed` and round(test_fraction * n)
// of them go to test. Both halves preserve corpus order and carry split tags.
std::pair<Corpus, Corpus> split(const Corpus& corpus, double test_fraction,
                                std::uint64_t seed);

}  // namespace peak
