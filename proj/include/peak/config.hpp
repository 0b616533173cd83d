#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "peak/categorizer.hpp"
#include "peak/delegation.hpp"
#include "peak/forest.hpp"
#include "peak/tagger.hpp"
#include "peak/topic_model.hpp"

namespace peak {

struct PipelineConfig {
  struct Paths {
    std::filesystem::path corpus;
    std::filesystem::path embeddings;
    std::filesystem::path model_dir = "model";
    std::filesystem::path topic_names;
  } paths;

  std::size_t min_df = 2;
  double test_fraction = 0.2;
  std::uint64_t split_seed = 42;

  NmfParams nmf;
  ForestParams forest;

  std::vector<std::size_t> coherence_k = {10, 20};
  std::size_t coherence_tags = 20;

  CategorizerConfig categorizer;
  WeakTextStyle weak_style = WeakTextStyle::kListing;

  QualificationCriteria qualification;
  StatsMode stats_mode = StatsMode::kPredictedClass;
  bool uncertainty_stub = false;

  TaggerConfig tagger;
};

// Reads an INI file over the defaults. Unknown sections or keys and values
// out of range raise UsageError. Relative paths resolve against the file's
// directory.
PipelineConfig load_config(const std::filesystem::path& path,
                           PipelineConfig base = {});

}  // namespace peak
