#pragma once

#include <vector>

#include "morcgp/types.hpp"

namespace morcgp {

/// Squared-exponential base kernel exp(-||x - x2||^2 / l^2).
/// Note the denominator is l^2 without a factor of 2.
double sq_exp(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& x2,
              double lengthscale);

/// B = L L^T from its lower-triangular factor.
Matrix coreg_matrix(const Matrix& chol_coreg);

/// N x N base-kernel Gram matrix kappa(X, X).
Matrix base_gram(const Matrix& x, double lengthscale);

/// NT x NT block Gram matrix with blocks [K]_{t,t'} = B_{t,t'} kappa(X, X),
/// laid out channel-major (flat index t*N + i).
Matrix block_gram(const Matrix& x, const IcmParams& params);

/// Cross-covariance between training latents and q query points: NT x qT,
/// column (t'*q + j) and row (t*N + i) holding B_{t,t'} kappa(x_i, x*_j).
Matrix cross_gram(const Matrix& x, const Matrix& x_star, const IcmParams& params);

/// qT x qT prior covariance among the query latents (k**).
Matrix star_gram(const Matrix& x_star, const IcmParams& params);

/// Sorted flat indices of the observed entries of an N x T mask.
/// Throws on an all-false mask.
std::vector<Index> restrict_observed(const MaskArray& mask);

// Row/column selection helpers for the restriction step.
Matrix select_rows(const Matrix& a, const std::vector<Index>& rows);
Matrix select_square(const Matrix& a, const std::vector<Index>& idx);
Vector select_entries(const Vector& v, const std::vector<Index>& idx);

}  // namespace morcgp
