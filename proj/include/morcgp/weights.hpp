#pragma once

#include <vector>

#include "morcgp/types.hpp"

namespace morcgp {

enum class WeightKind {
  Conditional,      // center = Gaussian conditional mean given other channels
  PriorMeanCenter,  // center = prior mean (the naive scalar-RCGP choice)
  Constant,         // w = sigma_t / sqrt(2), recovers the plain MOGP
};

/// Configuration of the inverse-multiquadric weight function.
struct WeightSpec {
  WeightKind kind = WeightKind::Conditional;
  Vector epsilon;     // expected outlier fraction per channel, in (0, 1)
  Vector beta;        // weight maximum per channel; empty -> sigma_t / sqrt(2)
  Matrix center_cov;  // T x T covariance used for conditioning (e.g. B + Sigma
                      // or a robust estimate); required for kind Conditional

  static WeightSpec constant() { return WeightSpec{WeightKind::Constant, {}, {}, {}}; }
};

/// Per-observation weights w_{i,t}, centers gamma_{i,t}, decay scales c_t and
/// the entries of grad_y log(W^2). Masked positions hold NaN and are never
/// consumed downstream.
struct WeightState {
  WeightKind kind = WeightKind::Constant;
  Matrix weights;    // N x T
  Matrix centers;    // N x T
  Matrix shrinkage;  // N x T, d log w_t^2 / d y_{i,t}
  Vector scales;     // length T, c_t
  Vector beta;       // length T, resolved maxima
};

/// Conditional mean of channel t given the observed other channels of one row:
/// m_t + C_{-t,t}^T C_{-t,-t}^{-1} (y_{-t} - m_{-t}). Falls back to m_t when
/// no other channel is observed.
double conditional_center(const Eigen::Ref<const Vector>& y_row,
                          const Eigen::Ref<const Eigen::Array<bool, Eigen::Dynamic, 1>>& mask_row,
                          Index t, const Vector& means, const Matrix& c);

/// Empirical (1 - epsilon)-quantile of absolute residuals, linear
/// interpolation between order statistics, floored at 1e-12.
double decay_scale(std::vector<double> abs_residuals, double epsilon);

/// beta * (1 + ((y - gamma)/c)^2)^(-1/2)
double imq_weight(double y, double gamma, double c, double beta);

/// d log w^2 / d y = -2 (y - gamma) / (c^2 + (y - gamma)^2), with gamma and c
/// held fixed (gamma depends only on the other channels, c is a dataset-level
/// plug-in).
double shrinkage_entry(double y, double gamma, double c);

WeightState build_weight_state(const Dataset& data, const IcmParams& params,
                               const WeightSpec& spec);

}  // namespace morcgp
