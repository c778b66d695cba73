#pragma once

#include "sgm/linalg.hpp"
#include "sgm/procrustes.hpp"
#include "sgm/stats.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgm {

// Target second-moment structure for one mapped modality, held in factored
// form: the prescribed covariance is u * diag(sigma_c^2) * u^T. Only the
// column basis and the singular values of a factor C (covariance = C C^T)
// are kept; the full matrix is never needed by the solver.
template <typename FloatType = double>
struct PrescribedCovariance {
  MatrixX<FloatType> u;         // k x rank, orthonormal columns
  VectorX<FloatType> sigma_c;   // rank positive values, non-increasing
  Index k = 0;
  Index rank = 0;

  static PrescribedCovariance identity(Index k) {
    detail::require(k >= 1, "PrescribedCovariance: k must be positive");
    PrescribedCovariance out;
    out.k = k;
    out.rank = k;
    out.u = MatrixX<FloatType>::Identity(k, k);
    out.sigma_c = VectorX<FloatType>::Ones(k);
    return out;
  }

  // From a factor c (k x r_c) with covariance c * c^T.
  static PrescribedCovariance from_factor(const MatrixX<FloatType>& c,
                                          FloatType rel_tol = FloatType(1e-12)) {
    const ThinSvd<FloatType> svd = thin_svd<FloatType>(c, rel_tol);
    detail::require(svd.rank >= 1,
                    "PrescribedCovariance: factor must have rank >= 1");
    PrescribedCovariance out;
    out.k = c.rows();
    out.rank = svd.rank;
    out.u = svd.u;
    out.sigma_c = svd.sigma;
    return out;
  }

  // From a full k x k symmetric positive semidefinite matrix.
  static PrescribedCovariance from_matrix(const MatrixX<FloatType>& m,
                                          FloatType rel_tol = FloatType(1e-12)) {
    detail::require_finite(m, "PrescribedCovariance");
    detail::require(m.rows() == m.cols(),
                    "PrescribedCovariance: matrix must be square");
    const FloatType asym = (m - m.transpose()).norm();
    detail::require(asym <= FloatType(1e-10) * std::max(FloatType(1), m.norm()),
                    "PrescribedCovariance: matrix must be symmetric");

    Eigen::SelfAdjointEigenSolver<MatrixX<FloatType>> eig(m);
    detail::require(eig.info() == Eigen::Success,
                    "PrescribedCovariance: eigendecomposition failed");
    const Index k = m.rows();
    // Eigenvalues arrive in increasing order; flip to match the
    // non-increasing singular-value convention used everywhere else.
    VectorX<FloatType> vals = eig.eigenvalues().reverse();
    MatrixX<FloatType> vecs = eig.eigenvectors().rowwise().reverse();

    const FloatType top = std::max(vals[0], FloatType(0));
    detail::require(vals[k - 1] >= -FloatType(1e-10) * std::max(FloatType(1), top),
                    "PrescribedCovariance: matrix is not positive semidefinite");

    // Rank cutoff on the eigenvalue scale: symmetric-solver noise sits near
    // machine epsilon times the top eigenvalue, far below this threshold.
    const FloatType cutoff = rel_tol * top * static_cast<FloatType>(k);
    Index rank = 0;
    while (rank < k && vals[rank] > cutoff) ++rank;
    detail::require(rank >= 1, "PrescribedCovariance: matrix must have rank >= 1");

    PrescribedCovariance out;
    out.k = k;
    out.rank = rank;
    out.u = vecs.leftCols(rank);
    out.sigma_c = vals.head(rank).cwiseMax(FloatType(0)).cwiseSqrt();
    // Pin eigenvector signs the same way thin_svd pins left singular vectors.
    MatrixX<FloatType> dummy = out.u;
    detail::apply_sign_convention(out.u, dummy);
    return out;
  }

  // Best rank-r approximation of the prescribed covariance (r <= rank).
  MatrixX<FloatType> gram_best_rank(Index r) const {
    detail::require(r >= 1 && r <= rank,
                    "PrescribedCovariance: r must lie in [1, rank]");
    return u.leftCols(r) *
           sigma_c.head(r).cwiseAbs2().asDiagonal() *
           u.leftCols(r).transpose();
  }

  // Trace of the best rank-r approximation: sum of the r largest eigenvalues.
  FloatType gram_trace(Index r) const {
    detail::require(r >= 1 && r <= rank,
                    "PrescribedCovariance: r must lie in [1, rank]");
    return sigma_c.head(r).cwiseAbs2().sum();
  }
};

template <typename FloatType = double>
struct SgmConfig {
  Index k = 2;
  std::vector<FloatType> weights;  // one per non-central modality; sum to 1
  FloatType rel_tol = FloatType(1e-12);
  int max_outer_iters = 100;
  FloatType flip_tol = FloatType(1e-12);
};

template <typename FloatType = double>
struct LinearMap {
  MatrixX<FloatType> a;  // k x d_i
  VectorX<FloatType> b;  // k

  MatrixX<FloatType> apply(const MatrixX<FloatType>& x) const {
    detail::require(x.rows() == a.cols(), "LinearMap: dimension mismatch");
    return (a * x).colwise() + b;
  }
};

// Trained model: one affine map per modality (index 0 is the central
// modality), all mapping into the shared k-dimensional domain.
template <typename FloatType = double>
struct SgmModel {
  Index k = 0;
  std::vector<LinearMap<FloatType>> maps;   // m + 1
  std::vector<FloatType> weights;           // m
  std::vector<Index> ranks;                 // m + 1 matched ranks
  FloatType trace_ratio = FloatType(0);
  int refine_iterations = 0;

  Index modalities() const { return static_cast<Index>(maps.size()); }

  VectorX<FloatType> apply(Index modality, const VectorX<FloatType>& x) const {
    detail::require(modality >= 0 && modality < modalities(),
                    "SgmModel: modality index out of range");
    detail::require(x.size() == maps[modality].a.cols(),
                    "SgmModel: sample dimension mismatch");
    return maps[modality].a * x + maps[modality].b;
  }

  MatrixX<FloatType> apply(Index modality, const MatrixX<FloatType>& x) const {
    detail::require(modality >= 0 && modality < modalities(),
                    "SgmModel: modality index out of range");
    return maps[modality].apply(x);
  }
};

// Everything train computes along the way, kept for diagnostics and for
// verifying the algebraic identities the solver relies on.
template <typename FloatType = double>
struct TrainInternals {
  std::vector<CenteredStats<FloatType>> stats;        // m + 1
  std::vector<PrescribedCovariance<FloatType>> covs;  // m + 1
  ProcrustesInstance<FloatType> instance;             // branches 1..m
  FeasibleTuple<FloatType> tuple;                     // q0 = central rotation
  int flips = 0;
  std::vector<FloatType> trajectory;
};

template <typename FloatType = double>
struct TrainResult {
  SgmModel<FloatType> model;
  TrainInternals<FloatType> internals;
};

// Matched rank for one modality: the prescribed covariance cannot be
// reproduced beyond its own rank, nor beyond the rank of the data factor.
template <typename FloatType = double>
Index matched_rank(const PrescribedCovariance<FloatType>& cov,
                   const ThinSvd<FloatType>& s_svd) {
  return std::min(cov.rank, s_svd.rank);
}

// Alignment operands for one non-central modality against the central one.
// l couples the prescribed-covariance bases (weighted by their singular
// values); r couples the data right singular bases.
template <typename FloatType = double>
std::pair<MatrixX<FloatType>, MatrixX<FloatType>> coupling_pair(
    const PrescribedCovariance<FloatType>& cov_0,
    const PrescribedCovariance<FloatType>& cov_i,
    const CenteredStats<FloatType>& stats_0,
    const CenteredStats<FloatType>& stats_i,
    Index r_0, Index r_i) {
  MatrixX<FloatType> l = cov_0.sigma_c.head(r_0).asDiagonal() *
                         (cov_0.u.leftCols(r_0).transpose() * cov_i.u.leftCols(r_i)) *
                         cov_i.sigma_c.head(r_i).asDiagonal();
  MatrixX<FloatType> r = stats_0.svd.v.transpose() * stats_i.svd.v;
  return {std::move(l), std::move(r)};
}

// Affine map for one modality given its alignment factor d (r_i x rank(S_i)
// with orthonormal rows): whiten the data directions, rotate them onto the
// matched prescribed directions, and rescale to the prescribed spectrum.
template <typename FloatType = double>
LinearMap<FloatType> assemble_map(const PrescribedCovariance<FloatType>& cov,
                                  const CenteredStats<FloatType>& stats,
                                  const MatrixX<FloatType>& d,
                                  Index r) {
  detail::require(stats.svd.rank >= 1,
                  "assemble_map: data factor has rank zero (constant samples)");
  detail::require(d.rows() == r && d.cols() == stats.svd.rank,
                  "assemble_map: alignment factor has wrong shape");
  LinearMap<FloatType> out;
  out.a = cov.u.leftCols(r) * cov.sigma_c.head(r).asDiagonal() * d *
          stats.svd.sigma.cwiseInverse().asDiagonal() * stats.svd.u.transpose();
  out.b = -out.a * stats.mean;
  return out;
}

namespace detail {

template <typename FloatType>
void validate_weights(const std::vector<FloatType>& weights, std::size_t m) {
  require(weights.size() == m,
          "train: need exactly one weight per non-central modality");
  FloatType sum = FloatType(0);
  for (const FloatType w : weights) {
    require(w >= FloatType(0), "train: weights must be non-negative");
    sum += w;
  }
  require(std::abs(sum - FloatType(1)) <= FloatType(1e-12),
          "train: weights must sum to 1");
}

}  // namespace detail

// Full training pipeline. datasets[i] holds one sample per column; all
// modalities must present the same matched samples in the same column order.
// covariances may be empty (identity prescribed covariance for every
// modality) or hold one entry per modality.
template <typename FloatType = double>
TrainResult<FloatType> train_full(
    const std::vector<MatrixX<FloatType>>& datasets,
    const std::vector<PrescribedCovariance<FloatType>>& covariances,
    const SgmConfig<FloatType>& config) {
  detail::require(datasets.size() >= 2,
                  "train: need a central modality plus at least one other");
  const std::size_t m = datasets.size() - 1;
  detail::require(config.k >= 1, "train: k must be positive");
  detail::validate_weights(config.weights, m);
  detail::require(covariances.empty() || covariances.size() == datasets.size(),
                  "train: need either no covariances or one per modality");

  const Index n = datasets[0].cols();
  TrainResult<FloatType> result;
  auto& internals = result.internals;
  internals.stats.reserve(datasets.size());
  internals.covs.reserve(datasets.size());

  std::vector<Index> ranks(datasets.size());
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    detail::require(datasets[i].cols() == n,
                    "train: modality " + std::to_string(i) +
                        " has a different sample count");
    internals.stats.push_back(center_scale<FloatType>(datasets[i], config.rel_tol));
    detail::require(internals.stats[i].svd.rank >= 1,
                    "train: modality " + std::to_string(i) +
                        " has constant samples (data factor rank zero)");
    if (covariances.empty()) {
      internals.covs.push_back(PrescribedCovariance<FloatType>::identity(config.k));
    } else {
      detail::require(covariances[i].k == config.k,
                      "train: covariance " + std::to_string(i) +
                          " does not match k");
      internals.covs.push_back(covariances[i]);
    }
    ranks[i] = matched_rank(internals.covs[i], internals.stats[i].svd);
  }

  auto& instance = internals.instance;
  instance.weights = config.weights;
  for (std::size_t i = 1; i < datasets.size(); ++i) {
    auto [l, r] = coupling_pair(internals.covs[0], internals.covs[i],
                                internals.stats[0], internals.stats[i],
                                ranks[0], ranks[i]);
    instance.l.push_back(std::move(l));
    instance.r.push_back(std::move(r));
  }
  instance.validate();

  const FeasibleTuple<FloatType> start = solve_related(instance, config.rel_tol);
  RefineOptions<FloatType> ropts;
  ropts.max_outer_iters = config.max_outer_iters;
  ropts.flip_tol = config.flip_tol;
  ropts.rel_tol = config.rel_tol;
  RefineResult<FloatType> refined = refine(instance, start, ropts);
  internals.tuple = std::move(refined.tuple);
  internals.flips = refined.flips;
  internals.trajectory = std::move(refined.trajectory);

  auto& model = result.model;
  model.k = config.k;
  model.weights = config.weights;
  model.ranks = ranks;
  model.refine_iterations = refined.iterations;
  model.maps.reserve(datasets.size());
  model.maps.push_back(assemble_map(internals.covs[0], internals.stats[0],
                                    internals.tuple.q0, ranks[0]));
  for (std::size_t i = 1; i < datasets.size(); ++i) {
    model.maps.push_back(assemble_map(internals.covs[i], internals.stats[i],
                                      internals.tuple.qi[i - 1], ranks[i]));
  }

  // Matching quality in [0, 1] (1 = exact match): twice the attained
  // alignment over the sum of the trace budgets of both sides of each pair.
  FloatType denom = FloatType(0);
  for (std::size_t i = 1; i < datasets.size(); ++i) {
    denom += config.weights[i - 1] * (internals.covs[0].gram_trace(ranks[0]) +
                                      internals.covs[i].gram_trace(ranks[i]));
  }
  detail::require(denom > FloatType(0), "train: degenerate trace budget");
  model.trace_ratio =
      FloatType(2) * objective(instance, internals.tuple) / denom;
  return result;
}

template <typename FloatType = double>
SgmModel<FloatType> train(const std::vector<MatrixX<FloatType>>& datasets,
                          const std::vector<PrescribedCovariance<FloatType>>& covariances,
                          const SgmConfig<FloatType>& config) {
  return train_full(datasets, covariances, config).model;
}

// Weighted matching discrepancy evaluated directly on the mapped data
// factors: sum_i w_i || A_0 S_0 - A_i S_i ||_F^2, scaled by (n-1)/n.
template <typename FloatType = double>
FloatType matching_discrepancy_direct(const TrainResult<FloatType>& result) {
  const auto& stats = result.internals.stats;
  const MatrixX<FloatType> central =
      result.model.maps[0].a * stats[0].s;
  FloatType total = FloatType(0);
  for (std::size_t i = 1; i < stats.size(); ++i) {
    total += result.model.weights[i - 1] *
             (central - result.model.maps[i].a * stats[i].s).squaredNorm();
  }
  const FloatType n = static_cast<FloatType>(stats[0].s.cols());
  return (n - FloatType(1)) / n * total;
}

// Same quantity through the trace expansion the solver optimizes:
// sum_i w_i [tr B_0 + tr B_i - 2 tr(D_i^T L_i^T D_0 R_i)], scaled by (n-1)/n.
template <typename FloatType = double>
FloatType matching_discrepancy_expansion(const TrainResult<FloatType>& result) {
  const auto& internals = result.internals;
  const auto& ranks = result.model.ranks;
  FloatType total = FloatType(0);
  for (std::size_t i = 1; i < internals.stats.size(); ++i) {
    const FloatType w = result.model.weights[i - 1];
    const MatrixX<FloatType> cross = internals.instance.l[i - 1].transpose() *
                                     internals.tuple.q0 *
                                     internals.instance.r[i - 1];
    const FloatType align = cross.cwiseProduct(internals.tuple.qi[i - 1]).sum();
    total += w * (internals.covs[0].gram_trace(ranks[0]) +
                  internals.covs[i].gram_trace(ranks[i]) - FloatType(2) * align);
  }
  const FloatType n = static_cast<FloatType>(internals.stats[0].s.cols());
  return (n - FloatType(1)) / n * total;
}

}  // namespace sgm
