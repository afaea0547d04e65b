#pragma once

#include <string>
#include <utility>
#include <vector>

#include "morcgp/hyperopt.hpp"
#include "morcgp/rng.hpp"
#include "morcgp/types.hpp"
#include "morcgp/weights.hpp"

namespace morcgp {

/// Outlier-injection scheme. Fields beyond `scheme`, `fraction` and
/// `channels` only matter for the scheme that reads them.
struct ContaminationConfig {
  enum class Scheme { None, Uniform, Asymmetric, Focused, IntervalShift, Mahalanobis };

  Scheme scheme = Scheme::None;
  double fraction = 0.0;
  std::vector<Index> channels = {0};  // target channels (uniform/asymmetric/
                                      // interval-shift/focused)

  double mag_low = 6.0, mag_high = 9.0;      // uniform / asymmetric draw U(lo, hi)
  double shift_low = 2.0, shift_high = 3.0;  // interval-shift draw U[lo, hi]
  Vector ref_means;  // per-channel means deciding the interval-shift side

  // Focused: with an input interval set, selected rows get inputs resampled
  // uniformly inside it and target outputs redrawn N(focus_value,
  // focus_out_sd^2); otherwise inputs collapse onto the covariate medians
  // (plus U(0, 0.1 MAD) perturbations) and the target output becomes
  // focus_value + U(0, 0.1 MAD_y).
  bool focus_has_interval = false;
  double focus_low = 0.0, focus_high = 0.0;
  double focus_value = 6.0;
  double focus_out_sd = 0.0;

  // Mahalanobis: perturbation v scaled so v^T B^{-1} v = MD^2 (B restricted
  // to the first md_channels channels), sign flipped with probability 1/2,
  // added to the first md_channels entries of each selected row.
  Index md_channels = 0;
  double md_low = 10.0, md_high = 15.0;
  double base_low = 0.5, base_high = 1.5;
  Matrix coreg_for_md;
};

struct ScenarioConfig {
  std::string name;
  Index n = 100;
  Index d = 1;
  double input_low = -5.0, input_high = 5.0;
  IcmParams gen_params;  // channels come from here
  ContaminationConfig contamination;

  // optional heterotopic rule: hide one channel where the first input
  // coordinate falls inside (hide_low, hide_high)
  Index hide_channel = -1;
  double hide_low = 0.0, hide_high = 0.0;
};

struct SimulatedData {
  Dataset data;
  Matrix latent;  // N x T latent truth
};

struct ContaminatedData {
  Dataset data;
  std::vector<std::pair<Index, Index>> outliers;  // (row, channel)
};

/// Inputs uniform on the configured box, latent F ~ N(m_vec, K), additive
/// per-channel Gaussian noise. Returns the noisy data with a full mask plus
/// the latent truth.
SimulatedData sample_icm(const ScenarioConfig& config, Rng& rng);

ContaminatedData contaminate(const Dataset& data, const ContaminationConfig& config,
                             Rng& rng);

/// Root of the nested mean (over rows, then observed channels) of squared
/// errors. `paper_literal` skips the final square root, reproducing the
/// displayed formula verbatim.
double rmse(const Matrix& pred, const Matrix& truth, const MaskArray& mask,
            bool paper_literal = false);

/// Mean over observed entries of -log N(truth; pred_mean, pred_var).
double nlpd(const Matrix& pred_mean, const Matrix& pred_var, const Matrix& truth,
            const MaskArray& mask);

struct PifCurve {
  Index m = 0, s = 0;  // contaminated (row, channel)
  Vector magnitudes;
  Matrix kl;  // n_magnitudes x T
};

/// Posterior influence curve: for each magnitude delta, replace y_{m,s} by
/// y_{m,s} + delta, rebuild the weights on the contaminated data (they are
/// constant for spec.kind == Constant, i.e. the MOGP case), and record the
/// per-channel KL between the clean and contaminated marginal posteriors of
/// f_t at the training inputs.
PifCurve pif_curve(const Dataset& data, const IcmParams& params, const WeightSpec& spec,
                   Index m, Index s, const Vector& magnitudes);

enum class Method { Mogp, Morcgp, MorcgpNaive };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct BenchmarkConfig {
  std::vector<ScenarioConfig> scenarios;
  std::vector<Method> methods = {Method::Mogp, Method::Morcgp, Method::MorcgpNaive};
  int n_seeds = 20;
  std::uint64_t base_seed = 0;
  double epsilon = 0.1;          // expected outlier fraction fed to the weights
  OptimizerConfig optimizer;
  bool paper_literal_rmse = false;
  bool eval_against_latent = true;  // false -> clean pre-contamination observations
  int threads = 0;                  // 0 -> MORCGP_THREADS env or hardware count
};

struct BenchmarkRow {
  std::string scenario;
  std::string method;
  std::uint64_t seed = 0;
  double rmse = 0.0;
  double nlpd = 0.0;
  double fit_seconds = 0.0;
  int n_failures = 0;
  std::string error;
};

/// Seeded sweep over scenarios x methods x seeds. Every method sees the same
/// contaminated dataset for a given (scenario, seed); rows come back sorted
/// by (scenario, method, seed) regardless of thread interleaving. Individual
/// fit failures are recorded in the row, not fatal.
std::vector<BenchmarkRow> run_benchmark(const BenchmarkConfig& config);

/// Built-in scenario presets: table1, table1-clean, fig2, focused-c4,
/// mahalanobis-s<k> (k = 1..10).
ScenarioConfig builtin_scenario(const std::string& name);
std::vector<std::string> builtin_scenario_names();

}  // namespace morcgp
