#pragma once

#include "sgm/dataio.hpp"
#include "sgm/sgm.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace sgm {

// ---------------------------------------------------------------------------
// k-nearest-neighbour classifier
//
// Determinism rules: neighbours are ordered by (squared distance, training
// index); the majority vote breaks ties toward the smallest label.

struct KnnClassifier {
  MatrixX<double> points;  // dim x n, one training point per column
  std::vector<int> labels;
  int neighbors = 15;
};

inline KnnClassifier knn_fit(const MatrixX<double>& points,
                             const std::vector<int>& labels, int neighbors) {
  detail::require(points.cols() >= 1, "knn_fit: need at least one point");
  detail::require(static_cast<Index>(labels.size()) == points.cols(),
                  "knn_fit: labels do not match points");
  detail::require(neighbors >= 1 && neighbors <= points.cols(),
                  "knn_fit: neighbors must lie in [1, point count]");
  return {points, labels, neighbors};
}

inline int knn_predict_one(const KnnClassifier& model,
                           const VectorX<double>& query) {
  detail::require(query.size() == model.points.rows(),
                  "knn_predict: query dimension mismatch");
  const Index n = model.points.cols();
  std::vector<std::pair<double, Index>> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    order[static_cast<std::size_t>(i)] = {
        (model.points.col(i) - query).squaredNorm(), i};
  }
  const auto mid = order.begin() + model.neighbors;
  std::partial_sort(order.begin(), mid, order.end());

  std::map<int, int> votes;  // ordered: ties resolve to the smallest label
  for (auto it = order.begin(); it != mid; ++it) {
    ++votes[model.labels[static_cast<std::size_t>(it->second)]];
  }
  int best_label = votes.begin()->first;
  int best_count = votes.begin()->second;
  for (const auto& [label, count] : votes) {
    if (count > best_count) {
      best_label = label;
      best_count = count;
    }
  }
  return best_label;
}

inline std::vector<int> knn_predict(const KnnClassifier& model,
                                    const MatrixX<double>& queries) {
  std::vector<int> out(static_cast<std::size_t>(queries.cols()));
  for (Index q = 0; q < queries.cols(); ++q) {
    out[static_cast<std::size_t>(q)] = knn_predict_one(model, queries.col(q));
  }
  return out;
}

inline double accuracy(const std::vector<int>& predicted,
                       const std::vector<int>& truth) {
  detail::require(!predicted.empty() && predicted.size() == truth.size(),
                  "accuracy: size mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == truth[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

// ---------------------------------------------------------------------------
// Deterministic shuffling
//
// Fisher-Yates driven by mt19937_64 with modulo reduction. The modulo bias is
// far below anything observable at these sizes, and unlike
// std::uniform_int_distribution the stream is identical on every platform.

inline std::vector<Index> seeded_permutation(Index count, std::uint64_t seed) {
  detail::require(count >= 1, "seeded_permutation: count must be positive");
  std::vector<Index> perm(static_cast<std::size_t>(count));
  std::iota(perm.begin(), perm.end(), Index(0));
  std::mt19937_64 gen(seed);
  for (Index i = count - 1; i > 0; --i) {
    const auto j = static_cast<Index>(gen() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  return perm;
}

// ---------------------------------------------------------------------------
// Transfer experiment on the three tiled views
//
// Labels are known for classifier-training samples of the central view only;
// test samples arrive through the side views. Methods:
//   alone01 / alone02  no mapping; side-view features queried against raw
//                      central-view training features
//   mca01   / mca02    pairwise map (central + one side view)
//   stacked            pairwise map against both side views stacked to 98-dim
//   sgm                three-way map; test features are the weighted centroid
//                      of the two mapped side views

enum class Method { alone01, alone02, mca01, mca02, stacked, sgm };

inline const std::vector<std::pair<Method, std::string>>& method_names() {
  static const std::vector<std::pair<Method, std::string>> names = {
      {Method::alone01, "alone01"}, {Method::alone02, "alone02"},
      {Method::mca01, "mca01"},     {Method::mca02, "mca02"},
      {Method::stacked, "stacked"}, {Method::sgm, "sgm"},
  };
  return names;
}

inline std::string method_name(Method m) {
  for (const auto& [method, name] : method_names()) {
    if (method == m) return name;
  }
  throw std::invalid_argument("method_name: unknown method");
}

inline Method parse_method(const std::string& name) {
  for (const auto& [method, n] : method_names()) {
    if (n == name) return method;
  }
  std::string valid;
  for (const auto& [method, n] : method_names()) {
    if (!valid.empty()) valid += ", ";
    valid += n;
  }
  throw std::invalid_argument("unknown method '" + name + "' (expected one of " +
                              valid + ")");
}

struct ExperimentSpec {
  Method method = Method::sgm;
  Index k = 10;
  Index n_matched = 20;       // samples matched across views for map training
  Index n_knn_train = 1000;   // classifier training samples (superset of matched)
  Index n_knn_test = 500;     // held-out queries, disjoint from training
  int neighbors = 15;
  std::vector<double> weights = {0.2, 0.8};  // side-view weights for sgm
  std::uint64_t seed = 0;
  double rel_tol = 1e-12;
  int max_outer_iters = 100;
};

struct ExperimentResult {
  Method method = Method::sgm;
  Index k = 0;
  Index n = 0;
  double accuracy = 0.0;
  bool has_trace_ratio = false;
  double trace_ratio = 0.0;
};

// Weighted centroid of the mapped side views: one column per test sample,
// sum_i w_i g_i(x_i), using the model's own training weights.
inline MatrixX<double> centroid_testset(
    const SgmModel<double>& model,
    const std::vector<MatrixX<double>>& side_tests) {
  detail::require(side_tests.size() == model.weights.size(),
                  "centroid_testset: need one test block per non-central modality");
  detail::require(!side_tests.empty() && side_tests[0].cols() >= 1,
                  "centroid_testset: empty test set");
  MatrixX<double> out = MatrixX<double>::Zero(model.k, side_tests[0].cols());
  for (std::size_t i = 0; i < side_tests.size(); ++i) {
    detail::require(side_tests[i].cols() == out.cols(),
                    "centroid_testset: test blocks differ in sample count");
    out += model.weights[i] *
           model.apply(static_cast<Index>(i + 1), side_tests[i]);
  }
  return out;
}

namespace detail {

inline MatrixX<double> take_columns(const MatrixX<double>& m,
                                    const std::vector<Index>& perm,
                                    Index first, Index count) {
  MatrixX<double> out(m.rows(), count);
  for (Index i = 0; i < count; ++i) {
    out.col(i) = m.col(perm[static_cast<std::size_t>(first + i)]);
  }
  return out;
}

inline std::vector<int> take_labels(const std::vector<int>& labels,
                                    const std::vector<Index>& perm,
                                    Index first, Index count) {
  std::vector<int> out(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) {
    out[static_cast<std::size_t>(i)] =
        labels[static_cast<std::size_t>(perm[static_cast<std::size_t>(first + i)])];
  }
  return out;
}

}  // namespace detail

inline ExperimentResult run_experiment(const TiledModalities& tiles,
                                       const ExperimentSpec& spec) {
  const Index total = tiles.x0.cols();
  detail::require(spec.n_matched >= 2, "experiment: n must be at least 2");
  detail::require(spec.n_matched <= spec.n_knn_train,
                  "experiment: n cannot exceed the classifier training count");
  detail::require(spec.n_knn_train + spec.n_knn_test <= total,
                  "experiment: training plus test samples exceed the dataset");
  detail::require(spec.n_knn_test >= 1, "experiment: need at least one test sample");
  detail::require(spec.k >= 1, "experiment: k must be positive");

  // One permutation drives every method at a given seed: matched samples are
  // the first n of the classifier-training block, test samples follow it.
  const std::vector<Index> perm = seeded_permutation(total, spec.seed);
  const std::vector<int> train_labels =
      detail::take_labels(tiles.labels, perm, 0, spec.n_knn_train);
  const std::vector<int> test_labels =
      detail::take_labels(tiles.labels, perm, spec.n_knn_train, spec.n_knn_test);

  ExperimentResult result;
  result.method = spec.method;
  result.k = spec.k;
  result.n = spec.n_matched;

  if (spec.method == Method::alone01 || spec.method == Method::alone02) {
    const MatrixX<double>& side =
        spec.method == Method::alone01 ? tiles.x1 : tiles.x2;
    const KnnClassifier knn =
        knn_fit(detail::take_columns(tiles.x0, perm, 0, spec.n_knn_train),
                train_labels, spec.neighbors);
    const std::vector<int> pred = knn_predict(
        knn, detail::take_columns(side, perm, spec.n_knn_train, spec.n_knn_test));
    result.accuracy = accuracy(pred, test_labels);
    return result;
  }

  std::vector<MatrixX<double>> datasets;
  std::vector<const MatrixX<double>*> side_views;
  std::vector<double> weights;
  MatrixX<double> stacked;
  datasets.push_back(detail::take_columns(tiles.x0, perm, 0, spec.n_matched));

  switch (spec.method) {
    case Method::mca01:
      datasets.push_back(detail::take_columns(tiles.x1, perm, 0, spec.n_matched));
      side_views.push_back(&tiles.x1);
      weights = {1.0};
      break;
    case Method::mca02:
      datasets.push_back(detail::take_columns(tiles.x2, perm, 0, spec.n_matched));
      side_views.push_back(&tiles.x2);
      weights = {1.0};
      break;
    case Method::stacked:
      stacked.resize(tiles.x1.rows() + tiles.x2.rows(), total);
      stacked.topRows(tiles.x1.rows()) = tiles.x1;
      stacked.bottomRows(tiles.x2.rows()) = tiles.x2;
      datasets.push_back(detail::take_columns(stacked, perm, 0, spec.n_matched));
      side_views.push_back(&stacked);
      weights = {1.0};
      break;
    case Method::sgm:
      datasets.push_back(detail::take_columns(tiles.x1, perm, 0, spec.n_matched));
      datasets.push_back(detail::take_columns(tiles.x2, perm, 0, spec.n_matched));
      side_views.push_back(&tiles.x1);
      side_views.push_back(&tiles.x2);
      weights = spec.weights;
      break;
    default:
      throw std::invalid_argument("experiment: unhandled method");
  }

  SgmConfig<double> config;
  config.k = spec.k;
  config.weights = weights;
  config.rel_tol = spec.rel_tol;
  config.max_outer_iters = spec.max_outer_iters;
  const SgmModel<double> model = train<double>(datasets, {}, config);

  const KnnClassifier knn = knn_fit(
      model.apply(0, detail::take_columns(tiles.x0, perm, 0, spec.n_knn_train)),
      train_labels, spec.neighbors);

  // Test features: weighted centroid of the mapped side views, with the same
  // weights used for training the maps.
  std::vector<MatrixX<double>> side_tests;
  side_tests.reserve(side_views.size());
  for (const MatrixX<double>* view : side_views) {
    side_tests.push_back(detail::take_columns(*view, perm, spec.n_knn_train,
                                              spec.n_knn_test));
  }
  const MatrixX<double> queries = centroid_testset(model, side_tests);
  result.accuracy = accuracy(knn_predict(knn, queries), test_labels);
  if (spec.method == Method::sgm) {
    result.has_trace_ratio = true;
    result.trace_ratio = model.trace_ratio;
  }
  return result;
}

// Runs every (method, k) pair with otherwise identical settings.
inline std::vector<ExperimentResult> run_sweep(const TiledModalities& tiles,
                                               const std::vector<Method>& methods,
                                               const std::vector<Index>& ks,
                                               const ExperimentSpec& base) {
  detail::require(!methods.empty() && !ks.empty(),
                  "sweep: need at least one method and one k");
  std::vector<ExperimentResult> results;
  results.reserve(methods.size() * ks.size());
  for (const Method method : methods) {
    for (const Index k : ks) {
      ExperimentSpec spec = base;
      spec.method = method;
      spec.k = k;
      results.push_back(run_experiment(tiles, spec));
    }
  }
  return results;
}

inline std::string results_to_csv(const std::vector<ExperimentResult>& results) {
  std::string out = "method,k,n,accuracy,trace_ratio\n";
  for (const auto& r : results) {
    out += method_name(r.method);
    out += ',' + std::to_string(r.k);
    out += ',' + std::to_string(r.n);
    out += ',' + format_g17(r.accuracy);
    out += ',';
    if (r.has_trace_ratio) out += format_g17(r.trace_ratio);
    out += '\n';
  }
  return out;
}

inline std::string results_to_json(const std::vector<ExperimentResult>& results) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : results) {
    nlohmann::json row;
    row["method"] = method_name(r.method);
    row["k"] = r.k;
    row["n"] = r.n;
    row["accuracy"] = r.accuracy;
    if (r.has_trace_ratio) {
      row["trace_ratio"] = r.trace_ratio;
    } else {
      row["trace_ratio"] = nullptr;
    }
    arr.push_back(row);
  }
  return arr.dump(2) + "\n";
}

}  // namespace sgm
