#pragma once

#include <Eigen/Cholesky>
#include <cmath>
#include <string>

#include "morcgp/errors.hpp"
#include "morcgp/types.hpp"

namespace morcgp {

/// Symmetric positive-definite solver with escalating jitter.
///
/// A jitter of 1e-8 * mean(diag) is always added before factorizing; on
/// failure the level escalates to 1e-6 and 1e-4 of the mean diagonal before
/// giving up with a NumericError that names the last jitter tried.
class PsdSolver {
 public:
  PsdSolver() = default;

  explicit PsdSolver(const Matrix& a, const std::string& context = "matrix") {
    factorize(a, context);
  }

  void factorize(const Matrix& a, const std::string& context = "matrix") {
    if (!a.allFinite())
      throw NumericError(context + ": non-finite entries before factorization");
    double scale = a.diagonal().mean();
    if (!(scale > 0.0)) scale = 1.0;
    static constexpr double kLevels[] = {1e-8, 1e-6, 1e-4};
    for (double level : kLevels) {
      jitter_ = level * scale;
      Matrix aj = a;
      aj.diagonal().array() += jitter_;
      llt_.compute(aj);
      if (llt_.info() == Eigen::Success) return;
    }
    throw NumericError(context + ": Cholesky failed even with jitter " +
                       std::to_string(jitter_));
  }

  double jitter() const { return jitter_; }

  Vector solve(const Vector& b) const { return llt_.solve(b); }
  Matrix solve(const Matrix& b) const { return llt_.solve(b); }

  Matrix inverse() const {
    const Index n = llt_.matrixL().rows();
    return llt_.solve(Matrix::Identity(n, n));
  }

  double log_det() const {
    return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
  }

  const Eigen::LLT<Matrix>& llt() const { return llt_; }

 private:
  Eigen::LLT<Matrix> llt_;
  double jitter_ = 0.0;
};

}  // namespace morcgp
