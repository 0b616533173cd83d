#include <doctest.h>

#include "delegation_fixtures.hpp"
#include "peak/delegation.hpp"
#include "peak/error.hpp"
#include "peak/rng.hpp"

using namespace peak;

namespace {

PairStats pair(double all, double unc) {
  PairStats s;
  s.accuracy_all = all;
  s.accuracy_uncertain = unc;
  s.n_all = 10;
  s.n_uncertain = 5;
  return s;
}

TrainStats uniform_stats(double all, double unc) {
  TrainStats t;
  for (Category c : kAllCategories)
    for (Label l : {Label::kPublic, Label::kPrivate}) t[{c, l}] = pair(all, unc);
  return t;
}

const PairKey kDomPriv{Category::kDominant, Label::kPrivate};
const PairKey kColPriv{Category::kCollaborative, Label::kPrivate};

}  // namespace

TEST_CASE("published table qualifies exactly two pairs") {
  const auto q = qualify_pairs(fixture::published_stats(), {});
  CHECK(q == std::set<PairKey>{kDomPriv, kColPriv});
}

TEST_CASE("qualification boundaries are strict") {
  auto t = uniform_stats(0.5, 0.5);
  t[kDomPriv] = pair(0.84, 0.84);
  CHECK(qualify_pairs(t, {}).empty());
  t[kDomPriv] = pair(0.85, 0.85);
  CHECK(qualify_pairs(t, {}).empty());
  t[kDomPriv] = pair(0.95, 0.89);
  CHECK(qualify_pairs(t, {}).empty());
  t[kDomPriv] = pair(0.95, 0.90);
  CHECK(qualify_pairs(t, {}).empty());
  t[kDomPriv] = pair(0.95, 0.9001);
  CHECK(qualify_pairs(t, {}) == std::set<PairKey>{kDomPriv});
  t[kDomPriv] = pair(0.86, 0.86);
  CHECK(qualify_pairs(t, {}) == std::set<PairKey>{kDomPriv});
}

TEST_CASE("pairs without evidence never qualify and missing pairs are errors") {
  auto t = uniform_stats(0.95, 0.95);
  t[kDomPriv].accuracy_uncertain.reset();
  CHECK(qualify_pairs(t, {}).size() == 7);
  t.erase(kColPriv);
  CHECK_THROWS_AS(qualify_pairs(t, {}), DataError);
  QualificationCriteria bad;
  bad.theta = 0.0;
  CHECK_THROWS_AS(qualify_pairs(uniform_stats(0.9, 0.9), bad), DataError);
}

TEST_CASE("gate") {
  CHECK(gate(0.9, 0.7) == Certainty::kUncertain);
  CHECK(gate(0.7, 0.7) == Certainty::kCertain);
  TaggedImage img;
  img.id = "x";
  CHECK_THROWS_AS(gate(img, 0.7), DataError);
  CHECK(gate(img, 0.7, 0.8) == Certainty::kUncertain);
  img.uncertainty = 0.1;
  CHECK(gate(img, 0.7, 0.8) == Certainty::kCertain);
  CHECK(stub_uncertainty(0.5) == 1.0);
  CHECK(stub_uncertainty(1.0) == 0.0);
  CHECK(std::abs(stub_uncertainty(0.8) - 0.4) < 1e-15);
}

TEST_CASE("published composition reproduces the headline numbers") {
  const auto world = fixture::published_world();
  const auto q = qualify_pairs(fixture::published_stats(), {});
  const DelegationReport r = simulate(world.test, world.oracle(), q, {0.7, false});
  CHECK(r.total == 5000);
  CHECK(r.uncertain == 1700);
  CHECK(r.pure.count == 3300);
  CHECK(r.peak.at(kDomPriv).count == 119);
  CHECK(r.peak.at(kColPriv).count == 425);
  CHECK(r.delegated == 1156);
  CHECK(std::abs(r.fraction_delegated() - 0.23) < 0.01);
  CHECK(std::abs(r.machine_accuracy() - 0.959) < 0.005);
  CHECK(std::abs(r.baseline_fraction_delegated() - 0.34) < 1e-12);

  const DelegationReport base = simulate(world.test, world.oracle(), {}, {0.7, false});
  CHECK(base.delegated == 1700);
  CHECK(base.fraction_delegated() == base.baseline_fraction_delegated());
  CHECK(base.machine_accuracy() == base.baseline_accuracy());
  CHECK(std::abs(base.machine_accuracy() - 0.963) < 0.0005);
}

TEST_CASE("all-certain corpora are handled by the upstream assistant") {
  const auto world = fixture::published_world();
  const DelegationReport r =
      simulate(world.test, world.oracle(), qualify_pairs(fixture::published_stats(), {}), {0.95, false});
  CHECK(r.fraction_delegated() == 0.0);
  CHECK(r.machine_accuracy() == r.pure.accuracy());
}

TEST_CASE("partition, monotonicity and extreme thresholds") {
  Rng rng(77);
  Corpus test;
  std::map<std::string, PeakDecision> decisions;
  for (int i = 0; i < 400; ++i) {
    TaggedImage img;
    img.id = "r" + std::to_string(i);
    img.tags = {"a"};
    img.label = rng.uniform() < 0.4 ? Label::kPrivate : Label::kPublic;
    img.uncertainty = rng.uniform_open() * 0.999;
    img.pure_prediction = rng.uniform() < 0.9 ? img.label : Label::kPublic;
    decisions[img.id] = PeakDecision{rng.uniform() < 0.5 ? Label::kPrivate : Label::kPublic,
                                     kAllCategories[rng.below(4)], rng.uniform()};
    test.add(img);
  }
  const PeakOracle oracle = [&](const TaggedImage& img) { return decisions.at(img.id); };
  std::vector<PairKey> all_pairs;
  for (Category c : kAllCategories)
    for (Label l : {Label::kPublic, Label::kPrivate}) all_pairs.push_back({c, l});

  for (int trial = 0; trial < 50; ++trial) {
    std::set<PairKey> q;
    for (const auto& p : all_pairs)
      if (rng.uniform() < 0.4) q.insert(p);
    const double theta = rng.uniform();
    const DelegationReport r = simulate(test, oracle, q, {theta, false});
    CHECK(r.pure.count + r.peak_total().count + r.delegated == test.size());
    CHECK(r.fraction_delegated() >= 0.0);
    CHECK(r.fraction_delegated() <= 1.0);
    std::set<PairKey> bigger = q;
    bigger.insert(all_pairs[rng.below(all_pairs.size())]);
    CHECK(simulate(test, oracle, bigger, {theta, false}).fraction_delegated() <= r.fraction_delegated());
  }
  CHECK(simulate(test, oracle, {}, {0.0, false}).uncertain == test.size());
  CHECK(simulate(test, oracle, {}, {1.0, false}).uncertain == 0);
}

TEST_CASE("missing inputs") {
  Corpus c;
  TaggedImage img;
  img.id = "a";
  img.tags = {"x"};
  img.uncertainty = 0.1;
  c.add(img);
  const PeakOracle oracle = [](const TaggedImage&) { return PeakDecision{}; };
  CHECK_THROWS_AS(simulate(c, oracle, {}, {0.7, false}), DataError);
  CHECK_THROWS_AS(simulate(Corpus{}, oracle, {}, {0.7, false}), DataError);

  Corpus no_u;
  img.uncertainty.reset();
  img.pure_prediction = Label::kPublic;
  no_u.add(img);
  CHECK_THROWS_AS(simulate(no_u, oracle, {}, {0.7, false}), DataError);
  const PeakOracle sure = [](const TaggedImage&) {
    return PeakDecision{Label::kPrivate, Category::kDominant, 0.99};
  };
  CHECK(simulate(no_u, sure, {}, {0.7, true}).pure.count == 1);
}

TEST_CASE("training statistics in both keying modes") {
  Corpus train;
  std::map<std::string, PeakDecision> d;
  auto add = [&](const std::string& id, Label truth, double u, Label pred, Category c) {
    TaggedImage img;
    img.id = id;
    img.tags = {"x"};
    img.label = truth;
    img.uncertainty = u;
    train.add(img);
    d[id] = PeakDecision{pred, c, 0.5};
  };
  add("a", Label::kPrivate, 0.9, Label::kPrivate, Category::kDominant);
  add("b", Label::kPublic, 0.2, Label::kPrivate, Category::kDominant);
  add("c", Label::kPublic, 0.9, Label::kPublic, Category::kWeak);
  const PeakOracle oracle = [&](const TaggedImage& img) { return d.at(img.id); };

  const TrainStats pred = compute_train_stats(train, oracle, {0.7, false});
  CHECK(pred.size() == 8);
  CHECK(pred.at(kDomPriv).n_all == 2);
  CHECK(*pred.at(kDomPriv).accuracy_all == 0.5);
  CHECK(*pred.at(kDomPriv).accuracy_uncertain == 1.0);
  CHECK_FALSE(pred.at(kColPriv).accuracy_all.has_value());

  const TrainStats truth = compute_train_stats(train, oracle, {0.7, false}, StatsMode::kTrueClass);
  CHECK(truth.at(kDomPriv).n_all == 1);
  CHECK(*truth.at({Category::kDominant, Label::kPublic}).accuracy_all == 0.0);
}

TEST_CASE("report serialisation") {
  const auto world = fixture::published_world();
  const auto q = qualify_pairs(fixture::published_stats(), {});
  const DelegationReport r = simulate(world.test, world.oracle(), q, {0.7, false});
  const std::string json = r.to_json();
  CHECK(json.find("\"delegated_to_user\": 1156") != std::string::npos);
  CHECK(json.find("\"dominant-private\"") != std::string::npos);
  CHECK(r.to_table().find("delegated to user") != std::string::npos);
  CHECK(stats_to_json(fixture::published_stats(), q).find("\"qualified\": true") != std::string::npos);
}
