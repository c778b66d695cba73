#pragma once

#include "sgm/linalg.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgm {

// Weighted star-graph orthogonal alignment problem:
//
//   maximize  sum_i  w_i * tr(Qi^T L_i^T Q0 R_i)
//
// over Q0 and Q1..Qm with orthonormal rows. All L_i share their row count
// (the central side), all R_i share theirs, and each branch must satisfy
// cols(L_i) <= cols(R_i) so a row-orthonormal Qi of shape
// cols(L_i) x cols(R_i) exists.
template <typename FloatType = double>
struct ProcrustesInstance {
  std::vector<MatrixX<FloatType>> l;
  std::vector<MatrixX<FloatType>> r;
  std::vector<FloatType> weights;

  Index branches() const { return static_cast<Index>(l.size()); }
  Index central_rows() const { return l.front().rows(); }
  Index right_rows() const { return r.front().rows(); }

  void validate() const {
    detail::require(!l.empty(), "ProcrustesInstance: need at least one branch");
    detail::require(l.size() == r.size() && l.size() == weights.size(),
                    "ProcrustesInstance: l, r, weights must have equal length");
    const Index rows_l = l.front().rows();
    const Index rows_r = r.front().rows();
    detail::require(rows_l <= rows_r,
                    "ProcrustesInstance: central row count exceeds right row count");
    FloatType weight_sum = FloatType(0);
    for (std::size_t i = 0; i < l.size(); ++i) {
      detail::require_finite(l[i], "ProcrustesInstance.l");
      detail::require_finite(r[i], "ProcrustesInstance.r");
      detail::require(l[i].rows() == rows_l,
                      "ProcrustesInstance: branch " + std::to_string(i) +
                          " has mismatched l row count");
      detail::require(r[i].rows() == rows_r,
                      "ProcrustesInstance: branch " + std::to_string(i) +
                          " has mismatched r row count");
      detail::require(l[i].cols() <= r[i].cols(),
                      "ProcrustesInstance: branch " + std::to_string(i) +
                          " has cols(l) > cols(r)");
      detail::require(weights[i] >= FloatType(0),
                      "ProcrustesInstance: weights must be non-negative");
      weight_sum += weights[i];
    }
    detail::require(std::abs(weight_sum - FloatType(1)) <= FloatType(1e-12),
                    "ProcrustesInstance: weights must sum to 1");
  }
};

// A candidate solution: q0 is central_rows x right_rows, qi[i] is
// cols(l[i]) x cols(r[i]); every factor has orthonormal rows.
template <typename FloatType = double>
struct FeasibleTuple {
  MatrixX<FloatType> q0;
  std::vector<MatrixX<FloatType>> qi;
};

// Largest deviation of any factor from row-orthonormality, measured as
// max over factors of ||Q Q^T - I||_F.
template <typename FloatType = double>
FloatType feasibility_residual(const FeasibleTuple<FloatType>& tuple) {
  auto residual = [](const MatrixX<FloatType>& q) {
    const MatrixX<FloatType> gram = q * q.transpose();
    return (gram - MatrixX<FloatType>::Identity(q.rows(), q.rows())).norm();
  };
  FloatType worst = residual(tuple.q0);
  for (const auto& q : tuple.qi) worst = std::max(worst, residual(q));
  return worst;
}

template <typename FloatType = double>
void validate_tuple(const ProcrustesInstance<FloatType>& instance,
                    const FeasibleTuple<FloatType>& tuple,
                    FloatType feas_tol = FloatType(1e-10)) {
  detail::require(static_cast<Index>(tuple.qi.size()) == instance.branches(),
                  "FeasibleTuple: branch count mismatch");
  detail::require(tuple.q0.rows() == instance.central_rows() &&
                      tuple.q0.cols() == instance.right_rows(),
                  "FeasibleTuple: q0 has wrong shape");
  for (Index i = 0; i < instance.branches(); ++i) {
    detail::require(tuple.qi[i].rows() == instance.l[i].cols() &&
                        tuple.qi[i].cols() == instance.r[i].cols(),
                    "FeasibleTuple: qi[" + std::to_string(i) + "] has wrong shape");
  }
  detail::require(feasibility_residual(tuple) <= feas_tol,
                  "FeasibleTuple: factors are not row-orthonormal");
}

// sum_i w_i tr(Qi^T L_i^T Q0 R_i), evaluated without forming any trace
// argument larger than cols(l[i]) x cols(r[i]).
template <typename FloatType = double>
FloatType objective(const ProcrustesInstance<FloatType>& instance,
                    const FeasibleTuple<FloatType>& tuple) {
  FloatType total = FloatType(0);
  for (Index i = 0; i < instance.branches(); ++i) {
    const MatrixX<FloatType> m =
        instance.l[i].transpose() * tuple.q0 * instance.r[i];
    total += instance.weights[i] * m.cwiseProduct(tuple.qi[i]).sum();
  }
  return total;
}

// Weighted cross term sum_i w_i R_i Qi^T L_i^T whose SVD yields the optimal
// central factor for fixed branch factors.
template <typename FloatType = double>
MatrixX<FloatType> central_cross_term(const ProcrustesInstance<FloatType>& instance,
                                      const std::vector<MatrixX<FloatType>>& qi) {
  MatrixX<FloatType> h = MatrixX<FloatType>::Zero(instance.right_rows(),
                                                  instance.central_rows());
  for (Index i = 0; i < instance.branches(); ++i) {
    h += instance.weights[i] * instance.r[i] * qi[i].transpose() *
         instance.l[i].transpose();
  }
  return h;
}

// Maximizer of tr(Q0 H) over row-orthonormal Q0 of shape rows_l x rows(H).
template <typename FloatType = double>
MatrixX<FloatType> central_from_cross_term(const MatrixX<FloatType>& h,
                                           Index rows_l,
                                           FloatType rel_tol = FloatType(1e-12)) {
  const FullSvd<FloatType> svd = full_svd<FloatType>(h, rel_tol);
  return svd.v_bar * svd.u_bar.leftCols(rows_l).transpose();
}

// Closed-form solution built from one SVD pair per branch: each branch
// factor pairs the right singular bases of l[i] and r[i], and the central
// factor is the polar-type maximizer for those branch factors.
template <typename FloatType = double>
FeasibleTuple<FloatType> solve_related(const ProcrustesInstance<FloatType>& instance,
                                       FloatType rel_tol = FloatType(1e-12)) {
  instance.validate();
  FeasibleTuple<FloatType> tuple;
  tuple.qi.reserve(instance.branches());
  for (Index i = 0; i < instance.branches(); ++i) {
    const FullSvd<FloatType> svd_l = full_svd<FloatType>(instance.l[i], rel_tol);
    const FullSvd<FloatType> svd_r = full_svd<FloatType>(instance.r[i], rel_tol);
    tuple.qi.push_back(svd_l.v_bar *
                       svd_r.v_bar.leftCols(instance.l[i].cols()).transpose());
  }
  const MatrixX<FloatType> h = central_cross_term(instance, tuple.qi);
  tuple.q0 = central_from_cross_term(h, instance.central_rows(), rel_tol);
  return tuple;
}

template <typename FloatType = double>
struct RefineResult {
  FeasibleTuple<FloatType> tuple;
  int iterations = 0;  // outer passes executed
  int flips = 0;       // total branch rows negated
  bool converged = false;
  std::vector<FloatType> trajectory;  // objective before and after each pass
};

template <typename FloatType = double>
struct RefineOptions {
  int max_outer_iters = 100;
  FloatType flip_tol = FloatType(1e-12);
  FloatType rel_tol = FloatType(1e-12);
};

// Coordinate refinement: negate any branch-factor row whose alignment with
// the corresponding row of L_i^T Q0 R_i is negative, then recompute the
// optimal central factor; repeat until a full pass makes no flips. Each
// flip strictly increases the branch term it touches and the central update
// never decreases the objective, so the trajectory is non-decreasing.
template <typename FloatType = double>
RefineResult<FloatType> refine(const ProcrustesInstance<FloatType>& instance,
                               const FeasibleTuple<FloatType>& start,
                               const RefineOptions<FloatType>& options = {}) {
  instance.validate();
  validate_tuple(instance, start);
  detail::require(options.max_outer_iters >= 1,
                  "refine: max_outer_iters must be at least 1");
  detail::require(options.flip_tol >= FloatType(0),
                  "refine: flip_tol must be non-negative");

  RefineResult<FloatType> result;
  result.tuple = start;
  result.trajectory.push_back(objective(instance, result.tuple));

  for (int outer = 0; outer < options.max_outer_iters; ++outer) {
    int count = 0;
    for (Index i = 0; i < instance.branches(); ++i) {
      const MatrixX<FloatType> m =
          instance.l[i].transpose() * result.tuple.q0 * instance.r[i];
      for (Index j = 0; j < result.tuple.qi[i].rows(); ++j) {
        if (m.row(j).dot(result.tuple.qi[i].row(j)) < -options.flip_tol) {
          result.tuple.qi[i].row(j) = -result.tuple.qi[i].row(j);
          ++count;
        }
      }
    }
    if (count == 0) {
      result.converged = true;
      break;
    }
    result.flips += count;
    ++result.iterations;
    const MatrixX<FloatType> h = central_cross_term(instance, result.tuple.qi);
    result.tuple.q0 = central_from_cross_term(h, instance.central_rows(),
                                              options.rel_tol);
    result.trajectory.push_back(objective(instance, result.tuple));
  }
  return result;
}

}  // namespace sgm
