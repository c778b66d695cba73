#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sgm/eval.hpp"

#include "helpers.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

using sgm::Index;
using sgm::MatrixX;
using sgm::Method;
using sgm::VectorX;

namespace {

// Small synthetic stand-in for the tiled image views: three 8-dim views of
// the same sample set with three label classes.
sgm::TiledModalities synthetic_tiles(Index n, testutil::SplitMix64& rng,
                                     bool identical = false) {
  sgm::TiledModalities tiles;
  tiles.x0 = testutil::random_matrix(8, n, rng);
  tiles.x1 = identical ? tiles.x0 : testutil::random_matrix(8, n, rng);
  tiles.x2 = identical ? tiles.x0 : testutil::random_matrix(8, n, rng);
  tiles.labels.resize(static_cast<std::size_t>(n));
  for (auto& label : tiles.labels) label = static_cast<int>(rng.below(3));
  return tiles;
}

// Reference kNN: full sort, majority vote, ties to the smallest label.
int knn_oracle(const MatrixX<double>& points, const std::vector<int>& labels,
               const VectorX<double>& query, int neighbors) {
  std::vector<std::pair<double, Index>> order;
  for (Index j = 0; j < points.cols(); ++j) {
    order.emplace_back((points.col(j) - query).squaredNorm(), j);
  }
  std::sort(order.begin(), order.end());
  std::map<int, int> votes;
  for (int j = 0; j < neighbors; ++j) {
    ++votes[labels[static_cast<std::size_t>(order[static_cast<std::size_t>(j)].second)]];
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

}  // namespace

TEST_CASE("knn classifies with a single training point") {
  MatrixX<double> points(2, 1);
  points << 3.0, 4.0;
  const auto knn = sgm::knn_fit(points, {9}, 1);
  VectorX<double> q(2);
  q << -100.0, 100.0;
  CHECK(sgm::knn_predict_one(knn, q) == 9);
}

TEST_CASE("knn breaks vote ties toward the smaller label") {
  MatrixX<double> points(1, 2);
  points << 1.0, -1.0;
  const auto knn = sgm::knn_fit(points, {5, 3}, 2);
  VectorX<double> q(1);
  q << 0.0;
  CHECK(sgm::knn_predict_one(knn, q) == 3);
}

TEST_CASE("knn self-classification is perfect with one neighbor") {
  testutil::SplitMix64 rng(81);
  const MatrixX<double> points = testutil::random_matrix(3, 40, rng);
  std::vector<int> labels(40);
  for (auto& l : labels) l = static_cast<int>(rng.below(4));
  const auto knn = sgm::knn_fit(points, labels, 1);
  CHECK(sgm::accuracy(sgm::knn_predict(knn, points), labels) == 1.0);
}

TEST_CASE("knn matches an exhaustive-sort oracle") {
  testutil::SplitMix64 rng(82);
  const MatrixX<double> points = testutil::random_matrix(4, 50, rng);
  std::vector<int> labels(50);
  for (auto& l : labels) l = static_cast<int>(rng.below(2));

  for (const int neighbors : {1, 5, 15}) {
    const auto knn = sgm::knn_fit(points, labels, neighbors);
    for (int trial = 0; trial < 25; ++trial) {
      const VectorX<double> q = testutil::random_matrix(4, 1, rng);
      CHECK(sgm::knn_predict_one(knn, q) == knn_oracle(points, labels, q, neighbors));
    }
  }
}

TEST_CASE("knn_fit validates the neighbor count and shapes") {
  testutil::SplitMix64 rng(83);
  const MatrixX<double> points = testutil::random_matrix(2, 5, rng);
  const std::vector<int> labels(5, 0);
  CHECK_THROWS_AS(sgm::knn_fit(points, labels, 0), std::invalid_argument);
  CHECK_THROWS_AS(sgm::knn_fit(points, labels, 6), std::invalid_argument);
  CHECK_THROWS_AS(sgm::knn_fit(points, std::vector<int>(4, 0), 1),
                  std::invalid_argument);
}

TEST_CASE("accuracy counts exact agreements") {
  CHECK(sgm::accuracy({1, 2, 3, 4}, {1, 2, 0, 4}) == doctest::Approx(0.75));
  CHECK_THROWS_AS(sgm::accuracy({1}, {1, 2}), std::invalid_argument);
}

TEST_CASE("seeded permutations are reproducible permutations") {
  const std::vector<Index> p42 = sgm::seeded_permutation(8, 42);
  CHECK(p42 == std::vector<Index>{7, 0, 5, 1, 2, 4, 3, 6});
  const std::vector<Index> p0 = sgm::seeded_permutation(8, 0);
  CHECK(p0 == std::vector<Index>{4, 5, 2, 0, 7, 1, 3, 6});

  CHECK(sgm::seeded_permutation(100, 13) == sgm::seeded_permutation(100, 13));
  CHECK(sgm::seeded_permutation(100, 13) != sgm::seeded_permutation(100, 14));

  std::vector<Index> sorted = sgm::seeded_permutation(100, 13);
  std::sort(sorted.begin(), sorted.end());
  std::vector<Index> iota(100);
  std::iota(iota.begin(), iota.end(), Index{0});
  CHECK(sorted == iota);
}

TEST_CASE("method names parse and print consistently") {
  for (const auto& [method, name] : sgm::method_names()) {
    CHECK(sgm::parse_method(name) == method);
    CHECK(sgm::method_name(method) == name);
  }
  CHECK_THROWS_AS(sgm::parse_method("bogus"), std::invalid_argument);
  try {
    sgm::parse_method("bogus");
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    CHECK(what.find("alone01") != std::string::npos);
    CHECK(what.find("sgm") != std::string::npos);
  }
}

TEST_CASE("centroid_testset reduces to a single mapped view when m is 1") {
  testutil::SplitMix64 rng(84);
  sgm::SgmConfig<double> config;
  config.k = 3;
  config.weights = {1.0};
  std::vector<MatrixX<double>> datasets;
  for (int i = 0; i < 2; ++i) datasets.push_back(testutil::random_matrix(6, 15, rng));
  const auto model = sgm::train<double>(datasets, {}, config);

  const MatrixX<double> tests = testutil::random_matrix(6, 7, rng);
  CHECK(sgm::centroid_testset(model, {tests}) == model.apply(1, tests));
}

TEST_CASE("a zero-weight view drops out of the centroid") {
  testutil::SplitMix64 rng(85);
  sgm::SgmConfig<double> config;
  config.k = 2;
  config.weights = {1.0, 0.0};
  std::vector<MatrixX<double>> datasets;
  for (int i = 0; i < 3; ++i) datasets.push_back(testutil::random_matrix(5, 12, rng));
  const auto model = sgm::train<double>(datasets, {}, config);

  const MatrixX<double> t1 = testutil::random_matrix(5, 6, rng);
  const MatrixX<double> t2 = testutil::random_matrix(5, 6, rng);
  CHECK(sgm::centroid_testset(model, {t1, t2}) == model.apply(1, t1));
}

TEST_CASE("centroid_testset matches the weighted-sum definition") {
  testutil::SplitMix64 rng(86);
  sgm::SgmConfig<double> config;
  config.k = 3;
  config.weights = {0.3, 0.7};
  std::vector<MatrixX<double>> datasets;
  for (int i = 0; i < 3; ++i) datasets.push_back(testutil::random_matrix(6, 14, rng));
  const auto model = sgm::train<double>(datasets, {}, config);

  const MatrixX<double> t1 = testutil::random_matrix(6, 5, rng);
  const MatrixX<double> t2 = testutil::random_matrix(6, 5, rng);
  const MatrixX<double> expected =
      0.3 * model.apply(1, t1) + 0.7 * model.apply(2, t2);
  CHECK((sgm::centroid_testset(model, {t1, t2}) - expected).norm() < 1e-12);

  CHECK_THROWS_AS(sgm::centroid_testset(model, {t1}), std::invalid_argument);
}

TEST_CASE("experiments on identical views align perfectly") {
  testutil::SplitMix64 rng(87);
  const auto tiles = synthetic_tiles(160, rng, /*identical=*/true);

  sgm::ExperimentSpec spec;
  spec.method = Method::sgm;
  spec.k = 3;
  spec.n_matched = 12;
  spec.n_knn_train = 100;
  spec.n_knn_test = 50;
  spec.neighbors = 5;

  const auto result = sgm::run_experiment(tiles, spec);
  CHECK(result.has_trace_ratio);
  CHECK(result.trace_ratio == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(result.n == 12);
  CHECK(result.k == 3);

  // With x1 == x2, the two single-view pipelines are the same computation.
  sgm::ExperimentSpec m1 = spec;
  m1.method = Method::mca01;
  sgm::ExperimentSpec m2 = spec;
  m2.method = Method::mca02;
  const auto r1 = sgm::run_experiment(tiles, m1);
  const auto r2 = sgm::run_experiment(tiles, m2);
  CHECK(r1.accuracy == r2.accuracy);
  CHECK_FALSE(r1.has_trace_ratio);
}

TEST_CASE("raw-view baselines ignore the subspace dimension") {
  testutil::SplitMix64 rng(88);
  const auto tiles = synthetic_tiles(120, rng);

  sgm::ExperimentSpec spec;
  spec.method = Method::alone01;
  spec.n_matched = 10;
  spec.n_knn_train = 80;
  spec.n_knn_test = 30;
  spec.neighbors = 3;

  spec.k = 2;
  const double acc_low = sgm::run_experiment(tiles, spec).accuracy;
  spec.k = 7;
  const double acc_high = sgm::run_experiment(tiles, spec).accuracy;
  CHECK(acc_low == acc_high);
}

TEST_CASE("experiments are deterministic for a fixed seed") {
  testutil::SplitMix64 rng(89);
  const auto tiles = synthetic_tiles(150, rng);

  sgm::ExperimentSpec spec;
  spec.method = Method::sgm;
  spec.k = 4;
  spec.n_matched = 15;
  spec.n_knn_train = 90;
  spec.n_knn_test = 40;
  spec.neighbors = 7;
  spec.seed = 5;

  const auto a = sgm::run_experiment(tiles, spec);
  const auto b = sgm::run_experiment(tiles, spec);
  CHECK(a.accuracy == b.accuracy);
  CHECK(a.trace_ratio == b.trace_ratio);

  spec.seed = 6;
  const auto c = sgm::run_experiment(tiles, spec);
  // A different split may coincide in accuracy, but the trained maps differ.
  CHECK(c.trace_ratio != a.trace_ratio);
}

TEST_CASE("a sweep is the cross product of methods and dimensions") {
  testutil::SplitMix64 rng(90);
  const auto tiles = synthetic_tiles(130, rng);

  sgm::ExperimentSpec base;
  base.n_matched = 10;
  base.n_knn_train = 80;
  base.n_knn_test = 40;
  base.neighbors = 5;

  const auto sweep = sgm::run_sweep(tiles, {Method::mca01, Method::sgm}, {2, 4}, base);
  REQUIRE(sweep.size() == 4);
  CHECK(sweep[0].method == Method::mca01);
  CHECK(sweep[0].k == 2);
  CHECK(sweep[3].method == Method::sgm);
  CHECK(sweep[3].k == 4);

  // A singleton sweep equals the direct call.
  sgm::ExperimentSpec single = base;
  single.method = Method::sgm;
  single.k = 4;
  const auto direct = sgm::run_experiment(tiles, single);
  CHECK(sweep[3].accuracy == direct.accuracy);
  CHECK(sweep[3].trace_ratio == direct.trace_ratio);
}

TEST_CASE("experiment validation rejects impossible splits") {
  testutil::SplitMix64 rng(91);
  const auto tiles = synthetic_tiles(50, rng);

  sgm::ExperimentSpec spec;
  spec.n_matched = 10;
  spec.n_knn_train = 30;
  spec.n_knn_test = 10;

  auto bad = spec;
  bad.n_knn_test = 0;
  CHECK_THROWS_AS(sgm::run_experiment(tiles, bad), std::invalid_argument);

  bad = spec;
  bad.n_matched = 1;
  CHECK_THROWS_AS(sgm::run_experiment(tiles, bad), std::invalid_argument);

  bad = spec;
  bad.n_matched = 31;
  CHECK_THROWS_AS(sgm::run_experiment(tiles, bad), std::invalid_argument);

  bad = spec;
  bad.n_knn_train = 45;
  CHECK_THROWS_AS(sgm::run_experiment(tiles, bad), std::invalid_argument);

  bad = spec;
  bad.k = 0;
  CHECK_THROWS_AS(sgm::run_experiment(tiles, bad), std::invalid_argument);
}

TEST_CASE("csv output follows the fixed schema") {
  std::vector<sgm::ExperimentResult> results(2);
  results[0].method = Method::alone01;
  results[0].k = 5;
  results[0].n = 20;
  results[0].accuracy = 0.5;
  results[1].method = Method::sgm;
  results[1].k = 5;
  results[1].n = 20;
  results[1].accuracy = 0.75;
  results[1].has_trace_ratio = true;
  results[1].trace_ratio = 0.84375;

  CHECK(sgm::results_to_csv(results) ==
        "method,k,n,accuracy,trace_ratio\n"
        "alone01,5,20,0.5,\n"
        "sgm,5,20,0.75,0.84375\n");
}

TEST_CASE("json output mirrors the csv rows with typed fields") {
  std::vector<sgm::ExperimentResult> results(2);
  results[0].method = Method::stacked;
  results[0].k = 3;
  results[0].n = 10;
  results[0].accuracy = 0.25;
  results[1].method = Method::sgm;
  results[1].k = 3;
  results[1].n = 10;
  results[1].accuracy = 1.0;
  results[1].has_trace_ratio = true;
  results[1].trace_ratio = 0.5;

  const auto parsed = nlohmann::json::parse(sgm::results_to_json(results));
  REQUIRE(parsed.is_array());
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[0]["method"] == "stacked");
  CHECK(parsed[0]["trace_ratio"].is_null());
  CHECK(parsed[1]["method"] == "sgm");
  CHECK(parsed[1]["trace_ratio"] == 0.5);
  CHECK(parsed[1]["accuracy"] == 1.0);
}
