#include "peak/topic_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "peak/error.hpp"
#include "peak/rng.hpp"

namespace peak {

namespace {

// Above this many cells the per-iteration log switches from the exact
// row-streamed residual to the Gram-trace expansion.
constexpr double kExactObjectiveCells = 16e6;
constexpr std::size_t kLogTail = 100;

double sum_of(const SparseMatrix& X) { return X.sum(); }
double sum_of(const Eigen::MatrixXd& X) { return X.sum(); }

double min_of(const SparseMatrix& X) {
  double lo = 0.0;
  for (Eigen::Index r = 0; r < X.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(X, r); it; ++it)
      lo = std::min(lo, it.value());
  return lo;
}
double min_of(const Eigen::MatrixXd& X) {
  return X.size() == 0 ? 0.0 : std::min(0.0, X.minCoeff());
}

double squared_norm(const SparseMatrix& X) { return X.squaredNorm(); }
double squared_norm(const Eigen::MatrixXd& X) { return X.squaredNorm(); }

Eigen::MatrixXd wt_x(const Eigen::MatrixXd& W, const SparseMatrix& X) {
  return (X.transpose() * W).transpose();
}
Eigen::MatrixXd wt_x(const Eigen::MatrixXd& W, const Eigen::MatrixXd& X) {
  return W.transpose() * X;
}

void check_input(double min_entry, std::size_t rows, std::size_t cols,
                 const NmfParams& p) {
  if (min_entry < 0.0) throw DataError("NMF input has a negative entry");
  if (p.k < 1 || p.k > std::min(rows, cols))
    throw DataError("k=" + std::to_string(p.k) + " outside [1, " +
                    std::to_string(std::min(rows, cols)) + "]");
  if (p.max_iter < 1) throw DataError("max_iter must be >= 1");
  if (!(p.tol > 0.0)) throw DataError("tol must be > 0");
}

void fill_uniform(Eigen::MatrixXd& M, Rng& rng, double scale) {
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j)
      M(i, j) = rng.uniform_open() * scale;
}

template <typename XT>
NmfFactors factorize_impl(const XT& X, const NmfParams& p) {
  const auto n = static_cast<std::size_t>(X.rows());
  const auto m = static_cast<std::size_t>(X.cols());
  check_input(min_of(X), n, m, p);
  const auto k = static_cast<Eigen::Index>(p.k);
  const double mean = sum_of(X) / (static_cast<double>(n) * static_cast<double>(m));
  if (!(mean > 0.0)) throw DataError("NMF input is all zeros");

  Rng rng(p.seed);
  const double scale = mean / static_cast<double>(p.k);
  NmfFactors f;
  f.W.resize(X.rows(), k);
  f.H.resize(k, X.cols());
  fill_uniform(f.W, rng, scale);
  fill_uniform(f.H, rng, scale);

  const bool exact_log =
      static_cast<double>(n) * static_cast<double>(m) <= kExactObjectiveCells;
  const double x_norm2 = squared_norm(X);
  std::vector<bool> reseeded(p.k, false);

  f.fit_log.push_back(objective(X, f.W, f.H));
  for (std::size_t iter = 1; iter <= p.max_iter; ++iter) {
    const Eigen::MatrixXd WtX = wt_x(f.W, X);
    const Eigen::MatrixXd WtW = f.W.transpose() * f.W;
    f.H.array() *= WtX.array() / ((WtW * f.H).array() + kNmfEpsilon);

    const Eigen::MatrixXd XHt = X * f.H.transpose();
    const Eigen::MatrixXd HHt = f.H * f.H.transpose();
    f.W.array() *= XHt.array() / ((f.W * HHt).array() + kNmfEpsilon);

    bool restarted = false;
    for (Eigen::Index t = 0; t < k; ++t) {
      if (f.H.row(t).sum() > 0.0 && f.W.col(t).sum() > 0.0) continue;
      if (reseeded[static_cast<std::size_t>(t)])
        throw DataError("topic " + std::to_string(t) +
                        " collapsed again after re-seeding; reduce k");
      reseeded[static_cast<std::size_t>(t)] = true;
      for (Eigen::Index j = 0; j < f.H.cols(); ++j)
        f.H(t, j) = rng.uniform_open() * scale;
      for (Eigen::Index i = 0; i < f.W.rows(); ++i)
        f.W(i, t) = rng.uniform_open() * scale;
      restarted = true;
    }

    double obj;
    if (exact_log || restarted) {
      obj = objective(X, f.W, f.H);
    } else {
      const Eigen::MatrixXd WtW2 = f.W.transpose() * f.W;
      const double r2 = x_norm2 - 2.0 * (f.W.array() * XHt.array()).sum() +
                        (WtW2.array() * HHt.array()).sum();
      obj = std::sqrt(std::max(0.0, r2));
    }
    const double prev = f.fit_log.back();
    f.fit_log.push_back(obj);
    if (restarted) {
      f.restarts.push_back(f.fit_log.size() - 1);
      continue;
    }
    if (obj == 0.0) break;
    if (prev > 0.0 && (prev - obj) / prev < p.tol) break;
  }
  return f;
}

}  // namespace

NmfFactors factorize(const SparseMatrix& X, const NmfParams& params) {
  return factorize_impl(X, params);
}

NmfFactors factorize(const Eigen::MatrixXd& X, const NmfParams& params) {
  return factorize_impl(X, params);
}

double objective(const SparseMatrix& X, const Eigen::MatrixXd& W,
                 const Eigen::MatrixXd& H) {
  if (W.rows() != X.rows() || H.cols() != X.cols() || W.cols() != H.rows())
    throw DataError("objective: shape mismatch");
  double total = 0.0;
  Eigen::RowVectorXd r(X.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    r.noalias() = W.row(i) * H;
    for (SparseMatrix::InnerIterator it(X, i); it; ++it) r(it.col()) -= it.value();
    total += r.squaredNorm();
  }
  return std::sqrt(total);
}

double objective(const Eigen::MatrixXd& X, const Eigen::MatrixXd& W,
                 const Eigen::MatrixXd& H) {
  if (W.rows() != X.rows() || H.cols() != X.cols() || W.cols() != H.rows())
    throw DataError("objective: shape mismatch");
  return (X - W * H).norm();
}

TopicModel::TopicModel(Eigen::MatrixXd H, std::vector<std::string> terms,
                       std::string vocab_fingerprint)
    : H_(std::move(H)), terms_(std::move(terms)),
      fingerprint_(std::move(vocab_fingerprint)) {
  if (static_cast<std::size_t>(H_.cols()) != terms_.size())
    throw DataError("topic matrix width does not match vocabulary");
  if (H_.size() > 0 && H_.minCoeff() < 0.0)
    throw DataError("topic matrix has a negative entry");
  names_.reserve(k());
  for (std::size_t t = 0; t < k(); ++t) names_.push_back("topic_" + std::to_string(t));
}

TopicModel TopicModel::with_names(
    const std::map<std::size_t, std::string>& mapping) const {
  TopicModel out = *this;
  for (const auto& [topic, name] : mapping) {
    if (topic >= k())
      throw DataError("topic name key " + std::to_string(topic) +
                      " out of range for k=" + std::to_string(k()));
    out.names_[topic] = name;
  }
  return out;
}

TopicModel apply_names(const TopicModel& model,
                       const std::map<std::size_t, std::string>& mapping) {
  return model.with_names(mapping);
}

std::string TopicModel::to_json() const {
  nlohmann::ordered_json j;
  j["k"] = k();
  j["names"] = names_;
  j["vocab_fingerprint"] = fingerprint_;
  j["terms"] = terms_;
  auto rows = nlohmann::ordered_json::array();
  for (Eigen::Index t = 0; t < H_.rows(); ++t) {
    std::vector<double> row(H_.row(t).begin(), H_.row(t).end());
    rows.push_back(row);
  }
  j["H"] = std::move(rows);
  j["fit_iterations"] = fit_iterations;
  j["restarts"] = restarts;
  const std::size_t from = fit_log.size() > kLogTail ? fit_log.size() - kLogTail : 0;
  j["fit_log_tail"] = std::vector<double>(fit_log.begin() + static_cast<long>(from),
                                          fit_log.end());
  return j.dump(1) + "\n";
}

TopicModel TopicModel::from_json(std::string_view text) {
  try {
    auto j = nlohmann::json::parse(text);
    const auto k = j.at("k").get<std::size_t>();
    auto terms = j.at("terms").get<std::vector<std::string>>();
    const auto& rows = j.at("H");
    if (rows.size() != k) throw DataError("H row count differs from k");
    Eigen::MatrixXd H(static_cast<Eigen::Index>(k),
                      static_cast<Eigen::Index>(terms.size()));
    for (std::size_t t = 0; t < k; ++t) {
      auto row = rows.at(t).get<std::vector<double>>();
      if (row.size() != terms.size()) throw DataError("H row width mismatch");
      for (std::size_t c = 0; c < row.size(); ++c)
        H(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) = row[c];
    }
    TopicModel model(std::move(H), std::move(terms),
                     j.at("vocab_fingerprint").get<std::string>());
    auto names = j.at("names").get<std::vector<std::string>>();
    if (names.size() != k) throw DataError("names length differs from k");
    model.names_ = std::move(names);
    model.fit_iterations = j.value("fit_iterations", std::size_t{0});
    model.restarts = j.value("restarts", std::vector<std::size_t>{});
    model.fit_log = j.value("fit_log_tail", std::vector<double>{});
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid topic model JSON: ") + e.what());
  }
}

TopicFit fit_nmf(const TfIdfMatrix& X, const Vocabulary& vocab,
                 const NmfParams& params) {
  if (X.vocab_fingerprint != vocab.fingerprint())
    throw DataError("TF-IDF matrix was built with a different vocabulary");
  NmfFactors f = factorize(X.values, params);
  std::vector<std::string> terms(vocab.terms().begin(), vocab.terms().end());
  TopicFit out{TopicModel(std::move(f.H), std::move(terms), vocab.fingerprint()),
               std::move(f.W)};
  out.model.fit_iterations = f.fit_log.size() - 1;
  out.model.fit_log = std::move(f.fit_log);
  out.model.restarts = std::move(f.restarts);
  return out;
}

namespace {

Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::MatrixXd& H,
                        const Eigen::MatrixXd& HHt, const ProjectionParams& p) {
  const Eigen::Index k = H.rows();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(k);
  if (x.squaredNorm() == 0.0) return w;
  w.setOnes();
  const Eigen::VectorXd Hx = H * x;
  const double xx = x.squaredNorm();
  auto obj = [&](const Eigen::VectorXd& v) {
    return std::sqrt(std::max(0.0, xx - 2.0 * v.dot(Hx) + v.dot(HHt * v)));
  };
  double prev = obj(w);
  for (std::size_t it = 0; it < p.max_iter; ++it) {
    w.array() *= Hx.array() / ((HHt * w).array() + kNmfEpsilon);
    const double cur = obj(w);
    if (cur == 0.0 || (prev > 0.0 && (prev - cur) / prev < p.tol)) break;
    prev = cur;
  }
  return w;
}

}  // namespace

Eigen::VectorXd transform_image(std::span<const double> row,
                                const TopicModel& model,
                                const ProjectionParams& params) {
  if (row.size() != model.vocab_size())
    throw DataError("row length " + std::to_string(row.size()) +
                    " does not match vocabulary size " +
                    std::to_string(model.vocab_size()));
  Eigen::VectorXd x(static_cast<Eigen::Index>(row.size()));
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (row[i] < 0.0) throw DataError("negative TF-IDF entry");
    x(static_cast<Eigen::Index>(i)) = row[i];
  }
  const Eigen::MatrixXd HHt = model.H() * model.H().transpose();
  return project(x, model.H(), HHt, params);
}

Eigen::MatrixXd transform_rows(const TfIdfMatrix& X, const TopicModel& model,
                               const ProjectionParams& params) {
  if (X.vocab_fingerprint != model.vocab_fingerprint())
    throw DataError("vocabulary fingerprint mismatch between matrix and model");
  if (static_cast<std::size_t>(X.values.cols()) != model.vocab_size())
    throw DataError("matrix width does not match model vocabulary");
  const Eigen::MatrixXd HHt = model.H() * model.H().transpose();
  Eigen::MatrixXd W(X.values.rows(), static_cast<Eigen::Index>(model.k()));
  for (Eigen::Index i = 0; i < X.values.rows(); ++i) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(X.values.cols());
    for (SparseMatrix::InnerIterator it(X.values, i); it; ++it) x(it.col()) = it.value();
    W.row(i) = project(x, model.H(), HHt, params).transpose();
  }
  return W;
}

std::vector<std::string> top_tags(const TopicModel& model, std::size_t topic,
                                  std::size_t n) {
  if (topic >= model.k())
    throw DataError("topic index " + std::to_string(topic) + " out of range");
  if (n < 1) throw DataError("n must be >= 1");
  std::vector<std::size_t> order(model.vocab_size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto& H = model.H();
  const auto t = static_cast<Eigen::Index>(topic);
  auto terms = model.terms();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double wa = H(t, static_cast<Eigen::Index>(a));
    const double wb = H(t, static_cast<Eigen::Index>(b));
    if (wa != wb) return wa > wb;
    return terms[a] < terms[b];
  });
  order.resize(std::min(n, order.size()));
  std::vector<std::string> out;
  out.reserve(order.size());
  for (std::size_t c : order) out.push_back(terms[c]);
  return out;
}

}  // namespace peak
