#pragma once

#include <vector>

#include "morcgp/linalg.hpp"
#include "morcgp/types.hpp"
#include "morcgp/weights.hpp"

namespace morcgp {

/// Gaussian predictive over q query points: mean is a qT vector and cov a
/// qT x qT matrix, both channel-major (entry t*q + j for query j, channel t).
struct Predictive {
  Vector mean;
  Matrix cov;
  bool includes_noise = false;
};

/// Diagonal of J_W = (1/2) Sigma W^{-2} as a full NT vector
/// (entries sigma_t^2 w_{i,t}^{-2} / 2; NaN at masked positions).
Vector assemble_jw(const WeightState& ws, const IcmParams& params);

/// Pseudo prior mean m_{W,vec} = m_vec + Sigma grad_y log(W^2) as an NT
/// vector (NaN at masked positions).
Vector assemble_mw(const WeightState& ws, const IcmParams& params, const Dataset& data);

/// Factorized MO-RCGP training state: (K + Sigma J_W) restricted to the
/// observed entries, with the pseudo-residual z = y_vec - m_{W,vec}.
/// Immutable after construction; predictions may run concurrently.
class FittedState {
 public:
  FittedState(const Dataset& data, const IcmParams& params, const WeightState& ws);

  /// Prop.-1 predictive at the given query points. When `include_noise` is
  /// set, Sigma is added to the covariance diagonal (per-channel sigma_t^2).
  Predictive predict(const Matrix& x_star, bool include_noise = false) const;

  const Dataset& data() const { return data_; }
  const IcmParams& params() const { return params_; }
  const WeightState& weights() const { return ws_; }
  const std::vector<Index>& observed() const { return obs_; }
  const PsdSolver& solver() const { return solver_; }
  const Vector& pseudo_residual() const { return z_; }
  const Vector& prior_mean_restricted() const { return m_obs_; }

 private:
  Dataset data_;
  IcmParams params_;
  WeightState ws_;
  std::vector<Index> obs_;
  PsdSolver solver_;
  Vector z_;      // restricted
  Vector m_obs_;  // restricted prior mean
};

Predictive morcgp_predict(const FittedState& state, const Matrix& x_star,
                          bool include_noise = false);

/// Standard MOGP predictive (independent code path; never touches the
/// weight machinery).
Predictive mogp_predict(const Dataset& data, const IcmParams& params,
                        const Matrix& x_star, bool include_noise = false);

/// KL(p || q) between Gaussians. Bitwise-equal covariances take the exact
/// mean-shift form 0.5 d^T Sigma^{-1} d, which is what the equal-covariance
/// simplification calls for and avoids amplifying rounding through
/// ill-conditioned trace/log-det terms.
double kl_gaussian(const Predictive& p, const Predictive& q);

}  // namespace morcgp
