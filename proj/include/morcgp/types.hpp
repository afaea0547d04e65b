#pragma once

#include <Eigen/Dense>
#include <utility>

namespace morcgp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using MaskArray = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Vectorisation convention used everywhere: vec(Y) stacks columns, so the
// observation (i, t) lives at flat position t*N + i (channel-major,
// 0-based; the 1-based equivalent is (t-1)*N + i).
inline Index flat_index(Index i, Index t, Index n) { return t * n + i; }
inline std::pair<Index, Index> unflat_index(Index k, Index n) {
  return {k % n, k / n};
}

struct Dataset;

/// Per-channel prior mean: a fixed constant, or the empirical mean of the
/// observed entries in that channel.
struct PriorMean {
  enum class Kind { Constant, Empirical };
  Kind kind = Kind::Constant;
  double value = 0.0;  // broadcast constant when `values` is empty
  Vector values;       // optional per-channel constants

  static PriorMean zero() { return PriorMean{}; }
  static PriorMean constant(double v) { return PriorMean{Kind::Constant, v, {}}; }
  static PriorMean constant(Vector per_channel) {
    return PriorMean{Kind::Constant, 0.0, std::move(per_channel)};
  }
  static PriorMean empirical() { return PriorMean{Kind::Empirical, 0.0, {}}; }

  /// Resolve to a length-T vector of per-channel constants m_t.
  Vector resolve(const Dataset& data) const;
};

/// Inputs, outputs and the per-entry observation mask (heterotopic support).
struct Dataset {
  Matrix inputs;    // N x d
  Matrix outputs;   // N x T
  MaskArray mask;   // N x T, true = observed

  Index n() const { return inputs.rows(); }
  Index d() const { return inputs.cols(); }
  Index t() const { return outputs.cols(); }

  static Dataset fully_observed(Matrix x, Matrix y) {
    Dataset ds;
    ds.mask = MaskArray::Constant(y.rows(), y.cols(), true);
    ds.inputs = std::move(x);
    ds.outputs = std::move(y);
    return ds;
  }

  Index observed_count() const {
    return static_cast<Index>(mask.cast<int>().sum());
  }

  /// Throws std::invalid_argument on shape mismatch, empty data, non-finite
  /// inputs or a row with no observed output.
  void validate() const;
};

/// ICM hyperparameters: shared lengthscale, Cholesky factor of the
/// coregionalisation matrix B, per-channel noise standard deviations, and
/// the prior mean specification.
struct IcmParams {
  double lengthscale = 1.0;
  Matrix chol_coreg;   // T x T lower triangular, B = L L^T
  Vector noise_std;    // length T, all > 0
  PriorMean prior_mean;

  Index channels() const { return noise_std.size(); }

  Matrix coreg() const { return chol_coreg * chol_coreg.transpose(); }

  Vector noise_var() const { return noise_std.array().square().matrix(); }

  void validate() const;
};

}  // namespace morcgp
