#pragma once

#include <string>
#include <vector>

#include "morcgp/inference.hpp"
#include "morcgp/rng.hpp"
#include "morcgp/types.hpp"
#include "morcgp/weights.hpp"

namespace morcgp {

/// Unconstrained encoding of the optimizable ICM hyperparameters:
/// [log lengthscale, log sigma_1..log sigma_T, chol(B) column-major lower
/// triangle with softplus-mapped diagonal]. encode(decode(.)) is the
/// identity to full precision on valid parameters.
struct ParamVector {
  static Index size(Index t) { return 1 + t + t * (t + 1) / 2; }
  static Vector encode(const IcmParams& params);
  static IcmParams decode(const Vector& theta, Index t, const PriorMean& prior_mean);
};

/// One closed-form LOO predictive entry for observation (i, t): mean,
/// variance (latent LOO variance plus sigma_t^2) and the log density of the
/// held-out value. `excluded` marks entries whose variance came out
/// nonpositive and which the objective must skip.
struct LooEntry {
  Index i = 0;
  Index t = 0;
  double mean = 0.0;
  double var = 0.0;
  double log_density = 0.0;
  bool excluded = false;
};

struct LooResult {
  std::vector<LooEntry> entries;
  int n_excluded = 0;
};

/// All NT LOO predictives from a single factorization (Lemma-B.3 identity):
///   mean_k = z_k + m_k - [A^{-1} z]_k / [A^{-1}]_kk
///   var_k  = 1 / [A^{-1}]_kk - sigma_t^4 w_{i,t}^{-2} / 2 + sigma_t^2
/// with A = K + Sigma J_W restricted to the observed entries.
LooResult loo_closed_form(const FittedState& state);

/// Weighted LOO-CV objective sum (w_{i,t}/beta_t)^2 log p(y_{i,t} | rest).
double wloo_objective(const LooResult& loo, const WeightState& ws, const Vector& beta);

/// Negative log marginal likelihood of the MOGP on the observed entries.
double marginal_nll(const Dataset& data, const IcmParams& params);

enum class FitMethod { MogpMl, MorcgpWloo };

struct OptimizerConfig {
  int max_iters = 500;
  double tol_obj = 1e-8;    // absolute objective change
  double tol_grad = 1e-6;   // gradient infinity norm
  double fd_step = 1e-5;    // central-difference step on the unconstrained vector
  int max_restarts = 3;
  double noise_var_cap = 0.0;  // > 0 -> upper bound on every sigma_t^2
  // Recompute the objective's normalizer beta_t = sigma_t/sqrt(2) from the
  // current iterate instead of freezing it with the weights. Off by default:
  // with every LOO log-density negative, a tracking beta lets the optimizer
  // push sigma (and with it beta) to infinity, deflating (w/beta)^2 towards
  // zero and the objective towards 0 from below, so the "optimum" is a
  // degenerate noise blow-up. The frozen ratio (w/beta)^2 is exactly the
  // unit-interval normalized weight.
  bool beta_tracks_sigma = false;
  int mcd_starts = 50;
  double mcd_h_frac = 0.75;
};

struct FitDiagnostics {
  double objective = 0.0;
  int iterations = 0;
  int restarts = 0;
  int objective_evals = 0;
  int loo_excluded = 0;
  bool converged = false;
  bool mcd_fallback = false;
  double seconds = 0.0;
  std::string note;
};

struct FitResult {
  IcmParams params;
  WeightState weights;    // re-estimated with the optimized parameters
  WeightSpec spec_used;   // includes the center_cov actually used at the end
  FitDiagnostics diagnostics;
};

/// Two-step procedure: estimate weights robustly (FastMCD center covariance
/// for conditional weights), freeze them, run quasi-Newton ascent with
/// central finite-difference gradients, then re-estimate the weights with
/// the optimized parameters. Deterministic given seed and init.
FitResult fit(const Dataset& data, const IcmParams& init, const WeightSpec& spec,
              FitMethod method, const OptimizerConfig& config, const Rng& rng);

/// Data-driven starting point: median-distance lengthscale, half the channel
/// standard deviation as noise, and robust scatter minus the noise variances
/// (PSD-projected) as the coregionalisation matrix.
IcmParams default_init(const Dataset& data, const PriorMean& prior_mean,
                       const OptimizerConfig& config, const Rng& rng);

}  // namespace morcgp
