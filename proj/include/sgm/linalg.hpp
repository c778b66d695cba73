#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <stdexcept>
#include <string>

namespace sgm {

template <typename FloatType = double>
using MatrixX = Eigen::Matrix<FloatType, Eigen::Dynamic, Eigen::Dynamic>;

template <typename FloatType = double>
using VectorX = Eigen::Matrix<FloatType, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& z, const char* what) {
  if (!z.allFinite()) {
    throw std::invalid_argument(std::string(what) + ": input contains NaN or Inf");
  }
}

inline void require(bool cond, const std::string& message) {
  if (!cond) throw std::invalid_argument(message);
}

}  // namespace detail

// Embeds v on the leading diagonal of an otherwise-zero a-by-b matrix.
template <typename FloatType = double>
MatrixX<FloatType> diag_embed(const VectorX<FloatType>& v, Index a, Index b) {
  detail::require(a >= 1 && b >= 1, "diag_embed: target dimensions must be positive");
  detail::require(v.size() <= std::min(a, b),
                  "diag_embed: vector length exceeds min(rows, cols)");
  MatrixX<FloatType> out = MatrixX<FloatType>::Zero(a, b);
  for (Index j = 0; j < v.size(); ++j) out(j, j) = v[j];
  return out;
}

// First c diagonal elements of a (not necessarily square) matrix.
template <typename FloatType = double>
VectorX<FloatType> diag_extract(const MatrixX<FloatType>& a, Index c) {
  detail::require(c <= std::min(a.rows(), a.cols()),
                  "diag_extract: c exceeds min(rows, cols)");
  VectorX<FloatType> out(c);
  for (Index j = 0; j < c; ++j) out[j] = a(j, j);
  return out;
}

// c-by-c diagonal matrix carrying the first c diagonal elements of a.
template <typename FloatType = double>
MatrixX<FloatType> dg(const MatrixX<FloatType>& a, Index c) {
  return diag_embed<FloatType>(diag_extract<FloatType>(a, c), c, c);
}

// Thin SVD truncated at the numerical rank. Factors carry exactly `rank`
// columns; a zero matrix yields rank 0 with zero-column factors.
template <typename FloatType = double>
struct ThinSvd {
  MatrixX<FloatType> u;      // rows(Z) x rank, orthonormal columns
  VectorX<FloatType> sigma;  // rank positive values, non-increasing
  MatrixX<FloatType> v;      // cols(Z) x rank, orthonormal columns
  Index rank = 0;

  MatrixX<FloatType> reconstruct() const {
    return u * sigma.asDiagonal() * v.transpose();
  }
};

// Full SVD: square orthogonal factors and min(rows, cols) singular values
// (zero-padded past the numerical rank).
template <typename FloatType = double>
struct FullSvd {
  MatrixX<FloatType> u_bar;      // rows x rows, orthogonal
  VectorX<FloatType> sigma_bar;  // min(rows, cols), non-negative non-increasing
  MatrixX<FloatType> v_bar;      // cols x cols, orthogonal
  Index rank = 0;
};

namespace detail {

// Fix the sign of each singular pair so the largest-magnitude entry of the
// left singular vector is positive (first such entry on ties). SVDs are only
// determined up to per-pair sign; pinning one makes results reproducible.
template <typename FloatType>
void apply_sign_convention(MatrixX<FloatType>& u, MatrixX<FloatType>& v) {
  for (Index j = 0; j < u.cols(); ++j) {
    Index arg = 0;
    FloatType best = FloatType(-1);
    for (Index i = 0; i < u.rows(); ++i) {
      const FloatType mag = std::abs(u(i, j));
      if (mag > best) {
        best = mag;
        arg = i;
      }
    }
    if (u(arg, j) < FloatType(0)) {
      u.col(j) = -u.col(j);
      v.col(j) = -v.col(j);
    }
  }
}

}  // namespace detail

// rel_tol scales the rank cutoff: sigma_j counts toward the rank only when
// sigma_j > rel_tol * sigma_1 * max(rows, cols).
template <typename FloatType = double>
ThinSvd<FloatType> thin_svd(const MatrixX<FloatType>& z,
                            FloatType rel_tol = FloatType(1e-12)) {
  detail::require_finite(z, "thin_svd");
  detail::require(z.rows() >= 1 && z.cols() >= 1, "thin_svd: empty matrix");
  detail::require(rel_tol > FloatType(0), "thin_svd: rel_tol must be positive");

  MatrixX<FloatType> u_full, v_full;
  VectorX<FloatType> sv;
  // Jacobi is the more accurate choice for small problems; divide-and-conquer
  // takes over once the matrix is large enough for the difference to matter.
  if (std::max(z.rows(), z.cols()) <= 32) {
    Eigen::JacobiSVD<MatrixX<FloatType>> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
    u_full = svd.matrixU();
    v_full = svd.matrixV();
    sv = svd.singularValues();
  } else {
    Eigen::BDCSVD<MatrixX<FloatType>> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
    u_full = svd.matrixU();
    v_full = svd.matrixV();
    sv = svd.singularValues();
  }

  const FloatType sigma_1 = sv.size() > 0 ? sv[0] : FloatType(0);
  const FloatType cutoff =
      rel_tol * sigma_1 * static_cast<FloatType>(std::max(z.rows(), z.cols()));
  Index rank = 0;
  while (rank < sv.size() && sv[rank] > cutoff) ++rank;

  ThinSvd<FloatType> out;
  out.rank = rank;
  out.u = u_full.leftCols(rank);
  out.sigma = sv.head(rank);
  out.v = v_full.leftCols(rank);
  detail::apply_sign_convention(out.u, out.v);
  return out;
}

namespace detail {

// Completes n x r orthonormal columns to an n x n orthogonal matrix by
// Gram-Schmidt over identity columns in index order (re-orthogonalized twice
// for stability). Deterministic: the completion depends only on q.
template <typename FloatType>
MatrixX<FloatType> complete_orthonormal(const MatrixX<FloatType>& q) {
  const Index n = q.rows();
  const Index r = q.cols();
  MatrixX<FloatType> out(n, n);
  if (r > 0) out.leftCols(r) = q;
  Index have = r;
  for (Index j = 0; j < n && have < n; ++j) {
    VectorX<FloatType> cand = VectorX<FloatType>::Zero(n);
    cand[j] = FloatType(1);
    for (int pass = 0; pass < 2; ++pass) {
      cand -= out.leftCols(have) * (out.leftCols(have).transpose() * cand);
    }
    const FloatType norm = cand.norm();
    if (norm > FloatType(1e-6)) {
      out.col(have++) = cand / norm;
    }
  }
  // With r < n, some identity column always keeps a residual of at least
  // 1/sqrt(n), so the loop fills every column.
  detail::require(have == n, "complete_orthonormal: completion failed");
  return out;
}

}  // namespace detail

template <typename FloatType = double>
FullSvd<FloatType> full_svd(const MatrixX<FloatType>& z,
                            FloatType rel_tol = FloatType(1e-12)) {
  const ThinSvd<FloatType> thin = thin_svd<FloatType>(z, rel_tol);
  FullSvd<FloatType> out;
  out.rank = thin.rank;
  out.u_bar = detail::complete_orthonormal<FloatType>(thin.u);
  out.v_bar = detail::complete_orthonormal<FloatType>(thin.v);
  out.sigma_bar = VectorX<FloatType>::Zero(std::min(z.rows(), z.cols()));
  out.sigma_bar.head(thin.rank) = thin.sigma;
  return out;
}

// Best rank-ell approximation (Frobenius), returned with its factored form.
template <typename FloatType = double>
std::pair<MatrixX<FloatType>, ThinSvd<FloatType>> best_rank(
    const ThinSvd<FloatType>& svd, Index ell) {
  detail::require(ell >= 1 && ell <= svd.rank,
                  "best_rank: ell must lie in [1, rank]");
  ThinSvd<FloatType> trunc;
  trunc.rank = ell;
  trunc.u = svd.u.leftCols(ell);
  trunc.sigma = svd.sigma.head(ell);
  trunc.v = svd.v.leftCols(ell);
  return {trunc.reconstruct(), trunc};
}

}  // namespace sgm
