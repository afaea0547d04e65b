#include "morcgp/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "morcgp/errors.hpp"
#include "morcgp/linalg.hpp"

namespace morcgp {

namespace {
constexpr double kScaleFloor = 1e-12;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}  // namespace

double conditional_center(const Eigen::Ref<const Vector>& y_row,
                          const Eigen::Ref<const Eigen::Array<bool, Eigen::Dynamic, 1>>& mask_row,
                          Index t, const Vector& means, const Matrix& c) {
  const Index dim = y_row.size();
  if (means.size() != dim || c.rows() != dim || c.cols() != dim)
    throw std::invalid_argument("conditional_center: dimension mismatch");

  std::vector<Index> others;
  for (Index j = 0; j < dim; ++j)
    if (j != t && mask_row[j]) others.push_back(j);
  if (others.empty()) return means[t];

  const Index m = static_cast<Index>(others.size());
  Matrix c_oo(m, m);
  Vector c_ot(m), r(m);
  for (Index a = 0; a < m; ++a) {
    for (Index b = 0; b < m; ++b) c_oo(a, b) = c(others[a], others[b]);
    c_ot[a] = c(others[a], t);
    r[a] = y_row[others[a]] - means[others[a]];
  }
  PsdSolver solver(c_oo, "conditional_center block");
  return means[t] + c_ot.dot(solver.solve(r));
}

double decay_scale(std::vector<double> abs_residuals, double epsilon) {
  if (abs_residuals.empty())
    throw std::invalid_argument("decay_scale: empty residual vector");
  if (!(epsilon > 0.0) || !(epsilon < 1.0))
    throw std::invalid_argument("decay_scale: epsilon must lie in (0, 1)");
  std::sort(abs_residuals.begin(), abs_residuals.end());
  const std::size_t n = abs_residuals.size();
  const double pos = (1.0 - epsilon) * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  double q = abs_residuals[lo];
  if (lo + 1 < n) q += frac * (abs_residuals[lo + 1] - abs_residuals[lo]);
  return std::max(q, kScaleFloor);
}

double imq_weight(double y, double gamma, double c, double beta) {
  const double r = (y - gamma) / c;
  return beta / std::sqrt(1.0 + r * r);
}

double shrinkage_entry(double y, double gamma, double c) {
  const double r = y - gamma;
  return -2.0 * r / (c * c + r * r);
}

WeightState build_weight_state(const Dataset& data, const IcmParams& params,
                               const WeightSpec& spec) {
  data.validate();
  params.validate();
  const Index n = data.n(), t = data.t();
  if (params.channels() != t)
    throw std::invalid_argument("build_weight_state: params/data channel mismatch");

  WeightState ws;
  ws.kind = spec.kind;
  ws.beta = spec.beta.size() > 0 ? spec.beta
                                 : Vector(params.noise_std / std::sqrt(2.0));
  if (ws.beta.size() != t || (ws.beta.array() <= 0.0).any())
    throw std::invalid_argument("build_weight_state: beta must be T positive reals");

  ws.weights = Matrix::Constant(n, t, kNaN);
  ws.centers = Matrix::Constant(n, t, kNaN);
  ws.shrinkage = Matrix::Constant(n, t, kNaN);
  ws.scales = Vector::Ones(t);

  const Vector means = params.prior_mean.resolve(data);

  if (spec.kind == WeightKind::Constant) {
    for (Index c = 0; c < t; ++c) {
      const double w = params.noise_std[c] / std::sqrt(2.0);
      for (Index i = 0; i < n; ++i) {
        if (!data.mask(i, c)) continue;
        ws.weights(i, c) = w;
        ws.centers(i, c) = means[c];
        ws.shrinkage(i, c) = 0.0;
      }
    }
    return ws;
  }

  Vector eps = spec.epsilon;
  if (eps.size() == 1) eps = Vector::Constant(t, eps[0]);
  if (eps.size() != t)
    throw std::invalid_argument("build_weight_state: epsilon must have T entries");
  if ((eps.array() <= 0.0).any() || (eps.array() >= 1.0).any())
    throw std::invalid_argument("build_weight_state: epsilon must lie in (0, 1)");

  if (spec.kind == WeightKind::Conditional) {
    if (spec.center_cov.rows() != t || spec.center_cov.cols() != t)
      throw std::invalid_argument("build_weight_state: center_cov must be T x T for conditional weights");
    if ((spec.center_cov.diagonal().array() <= 0.0).any())
      throw std::invalid_argument("build_weight_state: center_cov needs a positive diagonal");
  }

  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < t; ++c) {
      if (!data.mask(i, c)) continue;
      ws.centers(i, c) =
          spec.kind == WeightKind::Conditional
              ? conditional_center(data.outputs.row(i), data.mask.row(i).transpose(), c,
                                   means, spec.center_cov)
              : means[c];
    }
  }

  for (Index c = 0; c < t; ++c) {
    std::vector<double> residuals;
    residuals.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
      if (data.mask(i, c)) residuals.push_back(std::abs(data.outputs(i, c) - ws.centers(i, c)));
    if (residuals.empty()) continue;  // channel entirely unobserved
    ws.scales[c] = decay_scale(std::move(residuals), eps[c]);
  }

  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < t; ++c) {
      if (!data.mask(i, c)) continue;
      const double y = data.outputs(i, c);
      ws.weights(i, c) = imq_weight(y, ws.centers(i, c), ws.scales[c], ws.beta[c]);
      ws.shrinkage(i, c) = shrinkage_entry(y, ws.centers(i, c), ws.scales[c]);
    }
  }
  return ws;
}

}  // namespace morcgp
