#include "morcgp/hyperopt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "morcgp/errors.hpp"
#include "morcgp/kernel.hpp"
#include "morcgp/robust_cov.hpp"

namespace morcgp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kVarFloor = 1e-12;

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double inv_softplus(double y) {
  if (y > 30.0) return y;
  return std::log(std::expm1(std::max(y, 1e-300)));
}

}  // namespace

Vector ParamVector::encode(const IcmParams& params) {
  params.validate();
  const Index t = params.channels();
  Vector theta(size(t));
  theta[0] = std::log(params.lengthscale);
  for (Index c = 0; c < t; ++c) theta[1 + c] = std::log(params.noise_std[c]);
  Index k = 1 + t;
  for (Index c = 0; c < t; ++c)
    for (Index r = c; r < t; ++r)
      theta[k++] = r == c ? inv_softplus(params.chol_coreg(r, c)) : params.chol_coreg(r, c);
  return theta;
}

IcmParams ParamVector::decode(const Vector& theta, Index t, const PriorMean& prior_mean) {
  if (theta.size() != size(t))
    throw std::invalid_argument("ParamVector: expected " + std::to_string(size(t)) +
                                " entries, got " + std::to_string(theta.size()));
  IcmParams params;
  params.lengthscale = std::exp(theta[0]);
  params.noise_std = theta.segment(1, t).array().exp().matrix();
  params.chol_coreg = Matrix::Zero(t, t);
  Index k = 1 + t;
  for (Index c = 0; c < t; ++c)
    for (Index r = c; r < t; ++r)
      params.chol_coreg(r, c) = r == c ? softplus(theta[k++]) : theta[k++];
  params.prior_mean = prior_mean;
  return params;
}

LooResult loo_closed_form(const FittedState& state) {
  const auto& obs = state.observed();
  const Index m = static_cast<Index>(obs.size());
  const Index n = state.data().n();
  const Vector var = state.params().noise_var();

  const Matrix ainv = state.solver().inverse();
  const Vector az = state.solver().solve(state.pseudo_residual());
  const Vector& z = state.pseudo_residual();
  const Vector& m_obs = state.prior_mean_restricted();

  LooResult out;
  out.entries.resize(static_cast<std::size_t>(m));
  for (Index k = 0; k < m; ++k) {
    const auto [i, c] = unflat_index(obs[static_cast<std::size_t>(k)], n);
    LooEntry& e = out.entries[static_cast<std::size_t>(k)];
    e.i = i;
    e.t = c;
    const double aii = ainv(k, k);
    if (!(aii > 0.0)) {
      e.excluded = true;
      ++out.n_excluded;
      continue;
    }
    e.mean = z[k] + m_obs[k] - az[k] / aii;
    const double w = state.weights().weights(i, c);
    const double raw_var = 1.0 / aii - 0.5 * var[c] * var[c] / (w * w) + var[c];
    if (!(raw_var > 0.0)) {
      e.excluded = true;
      ++out.n_excluded;
      continue;
    }
    e.var = std::max(raw_var, kVarFloor);
    const double r = state.data().outputs(i, c) - e.mean;
    e.log_density = -0.5 * std::log(2.0 * std::numbers::pi * e.var) - 0.5 * r * r / e.var;
  }
  return out;
}

double wloo_objective(const LooResult& loo, const WeightState& ws, const Vector& beta) {
  double sum = 0.0;
  for (const LooEntry& e : loo.entries) {
    if (e.excluded) continue;
    const double ratio = ws.weights(e.i, e.t) / beta[e.t];
    sum += ratio * ratio * e.log_density;
  }
  return sum;
}

double marginal_nll(const Dataset& data, const IcmParams& params) {
  data.validate();
  params.validate();
  const Index n = data.n();
  const auto obs = restrict_observed(data.mask);
  const Vector means = params.prior_mean.resolve(data);
  const Vector var = params.noise_var();

  Matrix a = select_square(block_gram(data.inputs, params), obs);
  const Index m = static_cast<Index>(obs.size());
  Vector z(m);
  for (Index k = 0; k < m; ++k) {
    const auto [i, c] = unflat_index(obs[static_cast<std::size_t>(k)], n);
    a(k, k) += var[c];
    z[k] = data.outputs(i, c) - means[c];
  }
  PsdSolver solver(a, "marginal likelihood");
  return 0.5 * (z.dot(solver.solve(z)) + solver.log_det() +
                static_cast<double>(m) * std::log(2.0 * std::numbers::pi));
}

namespace {

struct BoxBounds {
  Vector lower, upper;  // empty = unbounded side

  Vector project(Vector x) const {
    if (lower.size() > 0) x = x.cwiseMax(lower);
    if (upper.size() > 0) x = x.cwiseMin(upper);
    return x;
  }
};

struct AscentResult {
  Vector x;
  double f = -kInf;
  int iterations = 0;
  int evals = 0;
  bool converged = false;
  double grad_norm = kInf;
};

// L-BFGS ascent with backtracking line search and box projection.
// Gradients are central finite differences with the configured step.
class LbfgsAscent {
 public:
  LbfgsAscent(std::function<double(const Vector&)> objective, const OptimizerConfig& cfg,
              BoxBounds bounds)
      : objective_(std::move(objective)), cfg_(cfg), bounds_(std::move(bounds)) {}

  AscentResult run(const Vector& x0) {
    AscentResult res;
    Vector x = bounds_.project(x0);
    double f = eval(x, res.evals);
    if (!std::isfinite(f)) {
      res.x = x;
      res.f = f;
      return res;
    }
    Vector g = gradient(x, res.evals);
    if (!g.allFinite()) {
      res.x = x;
      res.f = -kInf;
      return res;
    }

    std::deque<std::pair<Vector, Vector>> history;  // (s, y) pairs, minimization frame
    const Index dim = x.size();

    for (int iter = 0; iter < cfg_.max_iters; ++iter) {
      res.iterations = iter + 1;
      // two-loop recursion on the negative gradient (minimizing -f)
      Vector q = -g;
      std::vector<double> alpha(history.size());
      for (std::size_t j = history.size(); j-- > 0;) {
        const auto& [s, yv] = history[j];
        const double rho = 1.0 / yv.dot(s);
        alpha[j] = rho * s.dot(q);
        q -= alpha[j] * yv;
      }
      if (!history.empty()) {
        const auto& [s, yv] = history.back();
        q *= s.dot(yv) / yv.dot(yv);
      }
      for (std::size_t j = 0; j < history.size(); ++j) {
        const auto& [s, yv] = history[j];
        const double rho = 1.0 / yv.dot(s);
        q += (alpha[j] - rho * yv.dot(q)) * s;
      }
      Vector direction = -q;  // ascent direction in the maximization frame
      if (direction.dot(g) <= 0.0) direction = g;

      // backtracking Armijo on the projected step; without curvature
      // information the raw gradient can be huge, so cap the first move
      double step = 1.0;
      if (history.empty()) {
        const double norm = direction.norm();
        if (norm > 1.0) step = 1.0 / norm;
      }
      double f_new = -kInf;
      Vector x_new(dim);
      bool accepted = false;
      for (int ls = 0; ls < 50; ++ls) {
        x_new = bounds_.project(x + step * direction);
        const double predicted = g.dot(x_new - x);
        if (predicted <= 0.0) break;  // pinned at the bounds
        f_new = eval(x_new, res.evals);
        if (std::isfinite(f_new) && f_new >= f + 1e-4 * predicted) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) {
        res.converged = true;  // no admissible improvement left
        break;
      }

      Vector g_new = gradient(x_new, res.evals);
      if (!g_new.allFinite()) {
        x = x_new;
        f = f_new;
        break;
      }
      const Vector s = x_new - x;
      const Vector yv = g - g_new;  // minimization-frame gradient difference
      if (s.dot(yv) > 1e-10 * s.norm() * yv.norm()) {
        history.emplace_back(s, yv);
        if (history.size() > 8) history.pop_front();
      }

      const double delta = f_new - f;
      x = x_new;
      f = f_new;
      g = g_new;
      res.grad_norm = g.lpNorm<Eigen::Infinity>();
      if (res.grad_norm < cfg_.tol_grad || delta < cfg_.tol_obj) {
        res.converged = true;
        break;
      }
    }
    res.x = x;
    res.f = f;
    if (res.grad_norm == kInf) res.grad_norm = g.lpNorm<Eigen::Infinity>();
    return res;
  }

 private:
  double eval(const Vector& x, int& evals) {
    ++evals;
    try {
      return objective_(x);
    } catch (const NumericError&) {
      return -kInf;
    }
  }

  Vector gradient(const Vector& x, int& evals) {
    const Index dim = x.size();
    Vector g(dim);
    Vector xp = x;
    for (Index j = 0; j < dim; ++j) {
      const double h = cfg_.fd_step;
      xp[j] = x[j] + h;
      const double fp = eval(xp, evals);
      xp[j] = x[j] - h;
      const double fm = eval(xp, evals);
      xp[j] = x[j];
      g[j] = (fp - fm) / (2.0 * h);
    }
    return g;
  }

  std::function<double(const Vector&)> objective_;
  OptimizerConfig cfg_;
  BoxBounds bounds_;
};

}  // namespace

IcmParams default_init(const Dataset& data, const PriorMean& prior_mean,
                       const OptimizerConfig& config, const Rng& rng) {
  data.validate();
  const Index n = data.n(), t = data.t();

  // median pairwise input distance
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      dists.push_back((data.inputs.row(i) - data.inputs.row(j)).norm());
  double lengthscale = 1.0;
  if (!dists.empty()) {
    std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
    lengthscale = std::max(dists[dists.size() / 2], 1e-6);
  }

  Vector sigma(t);
  for (Index c = 0; c < t; ++c) {
    double sum = 0.0, sum2 = 0.0;
    Index count = 0;
    for (Index i = 0; i < n; ++i) {
      if (!data.mask(i, c)) continue;
      sum += data.outputs(i, c);
      sum2 += data.outputs(i, c) * data.outputs(i, c);
      ++count;
    }
    const double mean = sum / static_cast<double>(count);
    const double var = std::max(sum2 / static_cast<double>(count) - mean * mean, 0.0);
    sigma[c] = std::max(0.5 * std::sqrt(var), 1e-6);
    if (config.noise_var_cap > 0.0)
      sigma[c] = std::min(sigma[c], std::sqrt(config.noise_var_cap));
  }

  const Matrix scatter = robust_center_cov(data, config.mcd_h_frac, config.mcd_starts, rng).cov;
  Matrix b0 = scatter;
  b0.diagonal() -= sigma.array().square().matrix();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (b0 + b0.transpose()));
  const Vector evals = eig.eigenvalues().cwiseMax(1e-6);
  b0 = eig.eigenvectors() * evals.asDiagonal() * eig.eigenvectors().transpose();

  IcmParams init;
  init.lengthscale = lengthscale;
  init.noise_std = sigma;
  init.chol_coreg = Eigen::LLT<Matrix>(b0).matrixL();
  init.prior_mean = prior_mean;
  init.validate();
  return init;
}

FitResult fit(const Dataset& data, const IcmParams& init, const WeightSpec& spec,
              FitMethod method, const OptimizerConfig& config, const Rng& rng) {
  const auto t_start = std::chrono::steady_clock::now();
  data.validate();
  init.validate();
  const Index t = data.t();

  FitResult result;
  FitDiagnostics& diag = result.diagnostics;

  WeightSpec spec_used = method == FitMethod::MogpMl ? WeightSpec::constant() : spec;
  if (method == FitMethod::MorcgpWloo && spec.kind == WeightKind::Conditional &&
      spec_used.center_cov.size() == 0) {
    const CenterCovEstimate est =
        robust_center_cov(data, config.mcd_h_frac, config.mcd_starts, rng.split(17));
    spec_used.center_cov = est.cov;
    diag.mcd_fallback = est.used_fallback;
    if (est.used_fallback) diag.note = est.note;
  }
  const WeightState ws_frozen = build_weight_state(data, init, spec_used);
  const bool beta_tracks_sigma = spec_used.beta.size() == 0 && config.beta_tracks_sigma;

  int last_excluded = 0;
  auto objective = [&](const Vector& theta) -> double {
    const IcmParams params = ParamVector::decode(theta, t, init.prior_mean);
    if (method == FitMethod::MogpMl) return -marginal_nll(data, params);
    const FittedState state(data, params, ws_frozen);
    const LooResult loo = loo_closed_form(state);
    last_excluded = loo.n_excluded;
    const Vector beta = beta_tracks_sigma
                            ? Vector(params.noise_std / std::sqrt(2.0))
                            : ws_frozen.beta;
    return wloo_objective(loo, ws_frozen, beta);
  };

  BoxBounds bounds;
  if (config.noise_var_cap > 0.0) {
    bounds.upper = Vector::Constant(ParamVector::size(t), kInf);
    bounds.upper.segment(1, t).setConstant(0.5 * std::log(config.noise_var_cap));
  }

  const Vector theta0 = ParamVector::encode(init);
  LbfgsAscent optimizer(objective, config, bounds);

  AscentResult best;
  for (int attempt = 0; attempt <= config.max_restarts; ++attempt) {
    Vector start = theta0;
    if (attempt > 0) {
      Rng perturb = rng.split(1000 + static_cast<std::uint64_t>(attempt));
      for (Index j = 0; j < start.size(); ++j) start[j] += 0.1 * perturb.normal();
      diag.restarts = attempt;
    }
    const AscentResult res = optimizer.run(start);
    diag.objective_evals += res.evals;
    diag.iterations += res.iterations;
    if (std::isfinite(res.f)) {
      best = res;
      break;
    }
    if (attempt == config.max_restarts)
      throw NumericError("fit: objective stayed non-finite after " +
                         std::to_string(config.max_restarts) + " restarts");
  }

  result.params = ParamVector::decode(best.x, t, init.prior_mean);
  diag.objective = best.f;
  diag.converged = best.converged;
  diag.loo_excluded = last_excluded;

  // Re-estimate weights with the optimized parameters; conditional centers
  // now condition on the fitted covariance B + Sigma.
  WeightSpec final_spec = spec_used;
  if (method != FitMethod::MogpMl && spec_used.kind == WeightKind::Conditional) {
    final_spec.center_cov = result.params.coreg();
    final_spec.center_cov.diagonal() += result.params.noise_var();
  }
  result.weights = build_weight_state(data, result.params, final_spec);
  result.spec_used = final_spec;

  diag.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

}  // namespace morcgp
