#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "peak/corpus.hpp"
#include "peak/error.hpp"
#include "peak/topic_model.hpp"
#include "peak/vectorizer.hpp"

using namespace peak;

namespace {

bool non_increasing(const std::vector<double>& log) {
  for (std::size_t i = 1; i < log.size(); ++i)
    if (log[i] > log[i - 1] + 1e-10) return false;
  return true;
}

TopicModel model_from(const Eigen::MatrixXd& H) {
  std::vector<std::string> terms;
  for (Eigen::Index j = 0; j < H.cols(); ++j) terms.push_back("t" + std::to_string(100 + j));
  return TopicModel(H, terms, "fp");
}

TfIdfMatrix to_tfidf(const Eigen::MatrixXd& X, const std::string& fp) {
  TfIdfMatrix m;
  m.values = X.sparseView();
  for (Eigen::Index i = 0; i < X.rows(); ++i) m.rows.push_back("r" + std::to_string(i));
  m.vocab_fingerprint = fp;
  return m;
}

}  // namespace

TEST_CASE("objective on hand cases and against a naive loop") {
  Eigen::MatrixXd one(1, 1);
  one << 1.0;
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(1, 1);
  CHECK(objective(one, zero, zero) == 1.0);

  const auto p = oracle::planted(3, 4, 2, 9);
  CHECK(objective(p.X, p.W, p.H) < 1e-14);

  Rng rng(1);
  Eigen::MatrixXd X(3, 4), W(3, 2), H(2, 4);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform();
  for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = rng.uniform();
  for (Eigen::Index i = 0; i < H.size(); ++i) H.data()[i] = rng.uniform();
  CHECK(std::abs(objective(X, W, H) - oracle::frobenius_residual(X, W, H)) < 1e-12);
  const SparseMatrix Xs = X.sparseView();
  CHECK(std::abs(objective(Xs, W, H) - oracle::frobenius_residual(X, W, H)) < 1e-12);
  CHECK_THROWS_AS(objective(X, Eigen::MatrixXd::Zero(3, 3), H), DataError);
}

TEST_CASE("planted factorization is recovered") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto p = oracle::planted(60, 80, 5, seed);
    NmfParams params;
    params.k = 5;
    params.seed = seed;
    const NmfFactors f = factorize(p.X, params);
    CHECK(non_increasing(f.fit_log));
    CHECK(oracle::frobenius_residual(p.X, f.W, f.H) / p.X.norm() < 0.05);
    CHECK(f.W.minCoeff() >= 0.0);
    CHECK(f.H.minCoeff() >= 0.0);
  }
}

TEST_CASE("identity 2x2 factorizes exactly") {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
  NmfParams params;
  params.k = 2;
  params.max_iter = 5000;
  params.tol = 1e-14;
  const NmfFactors f = factorize(I, params);
  CHECK(f.fit_log.back() < 1e-6);
  CHECK(non_increasing(f.fit_log));
}

TEST_CASE("fit rejects bad k and negative input") {
  const auto p = oracle::planted(5, 6, 2, 3);
  NmfParams params;
  params.k = 0;
  CHECK_THROWS_AS(factorize(p.X, params), DataError);
  params.k = 6;
  CHECK_THROWS_AS(factorize(p.X, params), DataError);
  Eigen::MatrixXd neg = p.X;
  neg(0, 0) = -1.0;
  params.k = 2;
  CHECK_THROWS_AS(factorize(neg, params), DataError);
}

TEST_CASE("fit is deterministic and sparse and dense inputs agree") {
  const auto p = oracle::planted(30, 40, 4, 21);
  NmfParams params;
  params.k = 4;
  params.seed = 5;
  const NmfFactors a = factorize(p.X, params);
  const NmfFactors b = factorize(p.X, params);
  CHECK(a.H == b.H);
  CHECK(a.fit_log == b.fit_log);
  const SparseMatrix Xs = p.X.sparseView();
  const NmfFactors c = factorize(Xs, params);
  CHECK((c.W * c.H - a.W * a.H).norm() < 1e-8 * p.X.norm());
}

TEST_CASE("fit_nmf checks the vocabulary and records diagnostics") {
  Corpus corpus;
  const std::vector<std::vector<std::string>> sets = {
      {"tree", "sky", "grass"}, {"tree", "sky"}, {"person", "face"}, {"person", "face", "smile"},
      {"tree", "grass"},        {"face", "smile"}};
  for (std::size_t i = 0; i < sets.size(); ++i) {
    TaggedImage img;
    img.id = "i" + std::to_string(i);
    img.tags = sets[i];
    corpus.add(img);
  }
  const Vocabulary vocab = fit_vocabulary(corpus, 1);
  TfIdfMatrix X = transform(corpus, vocab);
  NmfParams params;
  params.k = 2;
  const TopicFit fit = fit_nmf(X, vocab, params);
  CHECK(fit.model.k() == 2);
  CHECK(fit.model.names()[0] == "topic_0");
  CHECK(fit.model.vocab_fingerprint() == vocab.fingerprint());
  CHECK(fit.model.fit_iterations + 1 == fit.model.fit_log.size());
  CHECK(non_increasing(fit.model.fit_log));
  CHECK(fit.W.rows() == 6);

  const TopicModel back = TopicModel::from_json(fit.model.to_json());
  CHECK(back.H() == fit.model.H());
  CHECK(back.to_json() == fit.model.to_json());

  X.vocab_fingerprint = "other";
  CHECK_THROWS_AS(fit_nmf(X, vocab, params), DataError);
  CHECK_THROWS_AS(transform_rows(X, fit.model), DataError);
}

TEST_CASE("projecting a topic row recovers its topic") {
  const auto p = oracle::planted(10, 30, 6, 77);
  const TopicModel model = model_from(p.H);
  for (Eigen::Index j = 0; j < p.H.rows(); ++j) {
    Eigen::VectorXd x = p.H.row(j).transpose();
    x /= x.norm();
    const Eigen::VectorXd w = transform_image(std::span<const double>(x.data(), x.size()), model);
    Eigen::Index best = 0;
    w.maxCoeff(&best);
    CHECK(best == j);
    CHECK(w.minCoeff() >= 0.0);
  }
}

TEST_CASE("projection of a zero row and of bad rows") {
  const auto p = oracle::planted(4, 5, 2, 3);
  const TopicModel model = model_from(p.H);
  const std::vector<double> zero(5, 0.0);
  CHECK(transform_image(zero, model).norm() == 0.0);
  CHECK_THROWS_AS(transform_image(std::vector<double>(4, 0.1), model), DataError);
  std::vector<double> neg(5, 0.1);
  neg[2] = -0.5;
  CHECK_THROWS_AS(transform_image(neg, model), DataError);

  const TfIdfMatrix X = to_tfidf(p.X, "fp");
  const Eigen::MatrixXd W = transform_rows(X, model);
  CHECK(W.rows() == 4);
  CHECK(W.minCoeff() >= 0.0);
}

TEST_CASE("top_tags ordering, clamp and ties") {
  Eigen::MatrixXd H(2, 4);
  H << 0.5, 0.9, 0.5, 0.1,
       0.0, 0.2, 0.2, 0.3;
  const TopicModel model = model_from(H);
  CHECK(top_tags(model, 0, 3) == std::vector<std::string>{"t101", "t100", "t102"});
  CHECK(top_tags(model, 1, 10) == std::vector<std::string>{"t103", "t101", "t102", "t100"});
  CHECK(top_tags(model, 0, 10).size() == 4);
  CHECK_THROWS_AS(top_tags(model, 2, 1), DataError);
}

TEST_CASE("apply_names") {
  Eigen::MatrixXd H = Eigen::MatrixXd::Constant(20, 3, 0.5);
  const TopicModel model = model_from(H);
  const TopicModel named = apply_names(model, {{0, "Nature"}});
  CHECK(named.names()[0] == "Nature");
  CHECK(named.names()[1] == "topic_1");
  CHECK(named.names().size() == 20);
  CHECK(apply_names(model, {}).to_json() == model.to_json());
  CHECK_THROWS_AS(apply_names(model, {{25, "X"}}), DataError);
}
