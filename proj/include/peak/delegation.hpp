#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>

#include "peak/categorizer.hpp"
#include "peak/corpus.hpp"

namespace peak {

struct QualificationCriteria {
  double min_accuracy = 0.85;  // strict lower bound on both accuracies
  double max_gap = 0.05;       // strict upper bound on |all - uncertain|
  double theta = 0.7;          // uncertainty threshold

  void validate() const;
};

// Accuracies arrive as fractions; strict comparisons absorb representation
// error up to this slack so that 0.95 vs 0.90 counts as a gap of exactly 0.05.
inline constexpr double kQualificationSlack = 1e-9;

struct PairKey {
  Category category = Category::kWeak;
  Label cls = Label::kPublic;
  friend auto operator<=>(const PairKey&, const PairKey&) = default;
};

std::string to_string(const PairKey& key);  // e.g. "dominant-private"

struct PairStats {
  std::optional<double> accuracy_all;
  std::optional<double> accuracy_uncertain;
  std::size_t n_all = 0;
  std::size_t n_uncertain = 0;
};

using TrainStats = std::map<PairKey, PairStats>;

// A pair qualifies iff both accuracies exceed min_accuracy and they differ by
// less than max_gap. Throws DataError unless all eight pairs are present.
std::set<PairKey> qualify_pairs(const TrainStats& stats,
                                const QualificationCriteria& criteria);

enum class Certainty { kCertain, kUncertain };

// Uncertain iff uncertainty > theta.
Certainty gate(double uncertainty, double theta);

// Uses the image's own score, else `fallback` (the stub), else throws.
Certainty gate(const TaggedImage& image, double theta,
               std::optional<double> fallback = std::nullopt);

// Stand-in uncertainty from forest vote dispersion, 1 - |2p - 1|. Not an
// evidential estimate; for synthetic studies only.
double stub_uncertainty(double probability_private);

struct PeakDecision {
  Label predicted = Label::kPublic;
  Category category = Category::kWeak;
  double probability_private = 0.0;
};

using PeakOracle = std::function<PeakDecision(const TaggedImage&)>;

// Which class a (category, class) pair is keyed by when gathering training
// statistics. Online routing always keys on the predicted class.
enum class StatsMode { kPredictedClass, kTrueClass };

struct GateSettings {
  double theta = 0.7;
  bool uncertainty_stub = false;
};

TrainStats compute_train_stats(const Corpus& train, const PeakOracle& peak,
                               const GateSettings& gate_settings,
                               StatsMode mode = StatsMode::kPredictedClass);

struct Tally {
  std::size_t count = 0;
  std::size_t correct = 0;
  double accuracy() const;  // 0 when count == 0
};

struct DelegationReport {
  std::size_t total = 0;
  Tally pure;                          // certain images, upstream decision
  std::map<PairKey, Tally> peak;       // uncertain images decided by PEAK
  std::size_t delegated = 0;           // uncertain images sent to the user
  std::size_t uncertain = 0;

  Tally peak_total() const;
  double machine_accuracy() const;     // over pure + peak handled images
  double fraction_delegated() const;
  // Upstream assistant alone: every uncertain image goes to the user.
  double baseline_fraction_delegated() const;
  double baseline_accuracy() const;

  std::string to_json() const;
  std::string to_table() const;
};

// Certain images keep the upstream prediction; uncertain ones go to PEAK and
// are accepted only when (category, predicted class) is qualified.
DelegationReport simulate(const Corpus& test, const PeakOracle& peak,
                          const std::set<PairKey>& qualified,
                          const GateSettings& gate_settings);

std::string stats_to_json(const TrainStats& stats, const std::set<PairKey>& qualified);

}  // namespace peak
