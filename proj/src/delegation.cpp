#include "peak/delegation.hpp"

#include <array>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "peak/error.hpp"

namespace peak {

void QualificationCriteria::validate() const {
  auto in_unit = [](double v) { return v > 0.0 && v <= 1.0; };
  if (!in_unit(min_accuracy) || !in_unit(max_gap) || !in_unit(theta))
    throw DataError("qualification criteria must lie in (0, 1]");
}

std::string to_string(const PairKey& key) {
  return std::string(to_string(key.category)) + "-" + std::string(to_string(key.cls));
}

std::set<PairKey> qualify_pairs(const TrainStats& stats,
                                const QualificationCriteria& criteria) {
  criteria.validate();
  std::set<PairKey> out;
  for (Category c : kAllCategories) {
    for (Label cls : {Label::kPublic, Label::kPrivate}) {
      const PairKey key{c, cls};
      auto it = stats.find(key);
      if (it == stats.end()) throw DataError("missing statistics for pair " + to_string(key));
      const auto& s = it->second;
      if (!s.accuracy_all || !s.accuracy_uncertain) continue;
      const double all = *s.accuracy_all;
      const double unc = *s.accuracy_uncertain;
      const bool high = all > criteria.min_accuracy + kQualificationSlack &&
                        unc > criteria.min_accuracy + kQualificationSlack;
      const bool consistent = std::abs(all - unc) < criteria.max_gap - kQualificationSlack;
      if (high && consistent) out.insert(key);
    }
  }
  return out;
}

Certainty gate(double uncertainty, double theta) {
  return uncertainty > theta ? Certainty::kUncertain : Certainty::kCertain;
}

Certainty gate(const TaggedImage& image, double theta, std::optional<double> fallback) {
  if (image.uncertainty) return gate(*image.uncertainty, theta);
  if (fallback) return gate(*fallback, theta);
  throw DataError("image \"" + image.id + "\" has no uncertainty and the stub is disabled");
}

double stub_uncertainty(double probability_private) {
  return 1.0 - std::abs(2.0 * probability_private - 1.0);
}

namespace {

Certainty gate_with(const TaggedImage& img, const GateSettings& g,
                    const std::optional<PeakDecision>& decision) {
  std::optional<double> fallback;
  if (g.uncertainty_stub && !img.uncertainty && decision)
    fallback = stub_uncertainty(decision->probability_private);
  return gate(img, g.theta, fallback);
}

}  // namespace

TrainStats compute_train_stats(const Corpus& train, const PeakOracle& peak,
                               const GateSettings& gate_settings, StatsMode mode) {
  if (train.empty()) throw DataError("empty training corpus");
  std::map<PairKey, std::array<Tally, 2>> tallies;  // [0] all, [1] uncertain
  for (Category c : kAllCategories)
    for (Label cls : {Label::kPublic, Label::kPrivate}) tallies[{c, cls}];
  for (const auto& img : train.images()) {
    const PeakDecision d = peak(img);
    const PairKey key{d.category, mode == StatsMode::kPredictedClass ? d.predicted : img.label};
    const bool correct = d.predicted == img.label;
    auto& t = tallies[key];
    ++t[0].count;
    t[0].correct += correct;
    if (gate_with(img, gate_settings, d) == Certainty::kUncertain) {
      ++t[1].count;
      t[1].correct += correct;
    }
  }
  TrainStats stats;
  for (const auto& [key, t] : tallies) {
    PairStats s;
    s.n_all = t[0].count;
    s.n_uncertain = t[1].count;
    if (t[0].count) s.accuracy_all = t[0].accuracy();
    if (t[1].count) s.accuracy_uncertain = t[1].accuracy();
    stats[key] = s;
  }
  return stats;
}

double Tally::accuracy() const {
  return count == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(count);
}

Tally DelegationReport::peak_total() const {
  Tally t;
  for (const auto& [key, v] : peak) {
    t.count += v.count;
    t.correct += v.correct;
  }
  return t;
}

double DelegationReport::machine_accuracy() const {
  const Tally p = peak_total();
  const std::size_t n = pure.count + p.count;
  return n == 0 ? 0.0 : static_cast<double>(pure.correct + p.correct) / static_cast<double>(n);
}

double DelegationReport::fraction_delegated() const {
  return total == 0 ? 0.0 : static_cast<double>(delegated) / static_cast<double>(total);
}

double DelegationReport::baseline_fraction_delegated() const {
  return total == 0 ? 0.0 : static_cast<double>(uncertain) / static_cast<double>(total);
}

double DelegationReport::baseline_accuracy() const { return pure.accuracy(); }

DelegationReport simulate(const Corpus& test, const PeakOracle& peak,
                          const std::set<PairKey>& qualified,
                          const GateSettings& gate_settings) {
  if (test.empty()) throw DataError("empty test corpus");
  DelegationReport r;
  for (const auto& img : test.images()) {
    ++r.total;
    std::optional<PeakDecision> decision;
    if (!img.uncertainty && gate_settings.uncertainty_stub) decision = peak(img);
    if (gate_with(img, gate_settings, decision) == Certainty::kCertain) {
      if (!img.pure_prediction)
        throw DataError("certain image \"" + img.id + "\" has no pure_prediction");
      ++r.pure.count;
      r.pure.correct += *img.pure_prediction == img.label;
      continue;
    }
    ++r.uncertain;
    if (!decision) decision = peak(img);
    const PairKey key{decision->category, decision->predicted};
    if (qualified.count(key)) {
      auto& t = r.peak[key];
      ++t.count;
      t.correct += decision->predicted == img.label;
    } else {
      ++r.delegated;
    }
  }
  return r;
}

std::string DelegationReport::to_json() const {
  nlohmann::ordered_json j;
  j["total"] = total;
  j["uncertain"] = uncertain;
  j["handled_by_pure"] = {{"count", pure.count}, {"accuracy", pure.accuracy()}};
  const Tally p = peak_total();
  nlohmann::ordered_json pairs = nlohmann::ordered_json::object();
  for (const auto& [key, t] : peak)
    pairs[to_string(key)] = {{"count", t.count}, {"accuracy", t.accuracy()}};
  j["handled_by_peak"] = {{"count", p.count}, {"accuracy", p.accuracy()}, {"pairs", pairs}};
  j["delegated_to_user"] = delegated;
  j["overall_accuracy"] = machine_accuracy();
  j["fraction_delegated"] = fraction_delegated();
  j["baseline"] = {{"fraction_delegated", baseline_fraction_delegated()},
                   {"accuracy", baseline_accuracy()}};
  return j.dump(1) + "\n";
}

std::string DelegationReport::to_table() const {
  std::string out;
  char buf[160];
  auto row = [&](const std::string& name, std::size_t n, const std::string& acc) {
    std::snprintf(buf, sizeof(buf), "%-28s %8zu  %s\n", name.c_str(), n, acc.c_str());
    out += buf;
  };
  auto pct = [](double v) {
    char b[32];
    std::snprintf(b, sizeof(b), "%.3f", v);
    return std::string(b);
  };
  std::snprintf(buf, sizeof(buf), "%-28s %8s  %s\n", "route", "images", "accuracy");
  out += buf;
  row("upstream (certain)", pure.count, pct(pure.accuracy()));
  for (const auto& [key, t] : peak) row("peak " + to_string(key), t.count, pct(t.accuracy()));
  row("delegated to user", delegated, "-");
  row("total", total, pct(machine_accuracy()));
  std::snprintf(buf, sizeof(buf),
                "fraction delegated %.3f (upstream alone %.3f), machine accuracy %.3f "
                "(upstream alone %.3f)\n",
                fraction_delegated(), baseline_fraction_delegated(), machine_accuracy(),
                baseline_accuracy());
  out += buf;
  return out;
}

std::string stats_to_json(const TrainStats& stats, const std::set<PairKey>& qualified) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [key, s] : stats) {
    nlohmann::ordered_json o;
    o["n_all"] = s.n_all;
    o["n_uncertain"] = s.n_uncertain;
    o["accuracy_all"] = s.accuracy_all ? nlohmann::ordered_json(*s.accuracy_all) : nullptr;
    o["accuracy_uncertain"] =
        s.accuracy_uncertain ? nlohmann::ordered_json(*s.accuracy_uncertain) : nullptr;
    o["qualified"] = qualified.count(key) > 0;
    j[to_string(key)] = std::move(o);
  }
  return j.dump(1) + "\n";
}

}  // namespace peak
