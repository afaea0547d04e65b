#pragma once

#include <string>
#include <vector>

#include "morcgp/rng.hpp"
#include "morcgp/types.hpp"

namespace morcgp {

/// Robust location/scatter from FastMCD. `determinant` is the raw (pre
/// consistency rescaling) determinant of the support-subset ML covariance.
struct RobustEstimate {
  Vector location;
  Matrix scatter;               // consistency-rescaled, symmetric PD
  std::vector<Index> support;   // sorted row indices, size h
  double determinant = 0.0;
};

/// One concentration step: fit mean/ML-covariance on `subset`, rank all rows
/// of `y` by Mahalanobis distance under that fit (ties broken by lowest row
/// index) and return the h closest rows as the next subset. The returned
/// location/scatter/determinant describe the *input* subset, so iterating
/// yields the classic non-increasing determinant sequence.
struct CStepResult {
  std::vector<Index> next_subset;
  Vector location;
  Matrix scatter;
  double determinant = 0.0;
};
CStepResult c_step(const Matrix& y, const std::vector<Index>& subset);

/// FastMCD on complete data: `n_starts` random (T+1)-point initializations,
/// two C-steps each, the best 10 refined to convergence; the minimum
/// determinant solution wins (lowest start index on ties). The scatter is
/// rescaled by the chi-square consistency factor for the h/N quantile.
/// Deterministic given the generator seed.
RobustEstimate fast_mcd(const Matrix& y, Index h, int n_starts, const Rng& rng);

/// Default subset size ceil(0.75 N), clamped to the admissible range.
Index default_mcd_h(Index n_rows, Index t);

struct CenterCovEstimate {
  Matrix cov;
  bool used_fallback = false;  // true -> per-channel MAD diagonal
  std::string note;
};

/// Robust T x T covariance for the conditional weights: FastMCD over the
/// complete rows, or a diagonal MAD fallback (with a note) when fewer than
/// h = ceil(h_frac * N) complete rows exist.
CenterCovEstimate robust_center_cov(const Dataset& data, double h_frac, int n_starts,
                                    const Rng& rng);

// Chi-square helpers used by the consistency factor.
double chi_sq_cdf(double x, double dof);
double chi_sq_quantile(double p, double dof);
double mcd_consistency_factor(Index h, Index n_rows, Index t);

}  // namespace morcgp
