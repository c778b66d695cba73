#pragma once

// Shared test utilities: a deterministic generator independent of <random>
// (so oracle values can never drift with a standard-library change) and
// random matrix factories built on it.

#include "sgm/linalg.hpp"

#include <Eigen/QR>

#include <cstdint>
#include <vector>

namespace testutil {

struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1)
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in [-1, 1)
  double uniform() { return 2.0 * unit() - 1.0; }

  // Integer in [0, bound)
  std::uint64_t below(std::uint64_t bound) { return next() % bound; }
};

inline sgm::MatrixX<double> random_matrix(sgm::Index rows, sgm::Index cols,
                                          SplitMix64& rng) {
  sgm::MatrixX<double> m(rows, cols);
  for (sgm::Index i = 0; i < rows; ++i) {
    for (sgm::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform();
  }
  return m;
}

// Exact-rank matrix: product of two generic factors. With probability one the
// factors have full column rank, so the product's rank is exactly `rank`.
inline sgm::MatrixX<double> random_rank_matrix(sgm::Index rows, sgm::Index cols,
                                               sgm::Index rank, SplitMix64& rng) {
  return random_matrix(rows, rank, rng) * random_matrix(rank, cols, rng);
}

// n x r with orthonormal columns, via Householder QR (independent of the
// SVD code under test).
inline sgm::MatrixX<double> random_orthonormal_cols(sgm::Index n, sgm::Index r,
                                                    SplitMix64& rng) {
  const sgm::MatrixX<double> m = random_matrix(n, r, rng);
  Eigen::HouseholderQR<sgm::MatrixX<double>> qr(m);
  sgm::MatrixX<double> q = qr.householderQ() * sgm::MatrixX<double>::Identity(n, r);
  return q;
}

// rows x cols (rows <= cols) with orthonormal rows.
inline sgm::MatrixX<double> random_row_orthonormal(sgm::Index rows, sgm::Index cols,
                                                   SplitMix64& rng) {
  return random_orthonormal_cols(cols, rows, rng).transpose();
}

// Positive weights summing to one exactly (last entry takes the remainder).
inline std::vector<double> random_weights(std::size_t m, SplitMix64& rng) {
  std::vector<double> w(m);
  double sum = 0.0;
  for (double& v : w) {
    v = 0.1 + rng.unit();
    sum += v;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < m; ++i) {
    w[i] /= sum;
    acc += w[i];
  }
  w[m - 1] = 1.0 - acc;
  return w;
}

// Symmetric PSD k x k matrix of exact rank r.
inline sgm::MatrixX<double> random_psd(sgm::Index k, sgm::Index r, SplitMix64& rng) {
  const sgm::MatrixX<double> f = random_matrix(k, r, rng);
  return f * f.transpose();
}

}  // namespace testutil
