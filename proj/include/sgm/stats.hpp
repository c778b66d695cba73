#pragma once

#include "sgm/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace sgm {

// Sample mean over columns: each column of x is one observation.
template <typename FloatType = double>
VectorX<FloatType> sample_mean(const MatrixX<FloatType>& x) {
  detail::require_finite(x, "sample_mean");
  detail::require(x.cols() >= 1, "sample_mean: need at least one sample");
  return x.rowwise().mean();
}

// Centered, 1/sqrt(n-1)-scaled data factor together with its thin SVD.
// s * s.transpose() is exactly the unbiased sample covariance, so the SVD of
// s exposes the covariance eigenstructure without forming the d x d product.
template <typename FloatType = double>
struct CenteredStats {
  VectorX<FloatType> mean;  // d
  MatrixX<FloatType> s;     // d x n, centered and scaled
  ThinSvd<FloatType> svd;   // thin SVD of s; svd.rank <= min(d, n-1)
};

template <typename FloatType = double>
CenteredStats<FloatType> center_scale(const MatrixX<FloatType>& x,
                                      FloatType rel_tol = FloatType(1e-12)) {
  detail::require_finite(x, "center_scale");
  detail::require(x.rows() >= 2, "center_scale: need dimension >= 2");
  detail::require(x.cols() >= 2, "center_scale: need at least two samples");

  CenteredStats<FloatType> out;
  out.mean = x.rowwise().mean();
  const FloatType scale =
      FloatType(1) / std::sqrt(static_cast<FloatType>(x.cols() - 1));
  out.s = scale * (x.colwise() - out.mean);
  out.svd = thin_svd<FloatType>(out.s, rel_tol);
  return out;
}

// Unbiased sample covariance, for callers that want the d x d matrix itself.
template <typename FloatType = double>
MatrixX<FloatType> sample_covariance(const MatrixX<FloatType>& x) {
  const CenteredStats<FloatType> cs = center_scale<FloatType>(x);
  return cs.s * cs.s.transpose();
}

}  // namespace sgm
