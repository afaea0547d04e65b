#include "morcgp/inference.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "morcgp/errors.hpp"
#include "morcgp/kernel.hpp"

namespace morcgp {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Vector prior_mean_vec(const Vector& means, Index n) {
  const Index t = means.size();
  Vector m(n * t);
  for (Index c = 0; c < t; ++c) m.segment(c * n, n).setConstant(means[c]);
  return m;
}

void add_noise_diag(Predictive& pred, const IcmParams& params, Index q) {
  const Vector var = params.noise_var();
  for (Index c = 0; c < params.channels(); ++c)
    pred.cov.diagonal().segment(c * q, q).array() += var[c];
  pred.includes_noise = true;
}

}  // namespace

Vector assemble_jw(const WeightState& ws, const IcmParams& params) {
  const Index n = ws.weights.rows(), t = ws.weights.cols();
  const Vector var = params.noise_var();
  Vector jw = Vector::Constant(n * t, kNaN);
  for (Index c = 0; c < t; ++c) {
    for (Index i = 0; i < n; ++i) {
      const double w = ws.weights(i, c);
      if (std::isnan(w)) continue;
      if (!(w > 0.0))
        throw std::invalid_argument("assemble_jw: nonpositive weight at (" +
                                    std::to_string(i + 1) + ", " + std::to_string(c + 1) + ")");
      jw[flat_index(i, c, n)] = 0.5 * var[c] / (w * w);
    }
  }
  return jw;
}

Vector assemble_mw(const WeightState& ws, const IcmParams& params, const Dataset& data) {
  const Index n = data.n(), t = data.t();
  const Vector means = params.prior_mean.resolve(data);
  const Vector var = params.noise_var();
  Vector mw = Vector::Constant(n * t, kNaN);
  for (Index c = 0; c < t; ++c)
    for (Index i = 0; i < n; ++i)
      if (data.mask(i, c))
        mw[flat_index(i, c, n)] = means[c] + var[c] * ws.shrinkage(i, c);
  return mw;
}

FittedState::FittedState(const Dataset& data, const IcmParams& params,
                         const WeightState& ws)
    : data_(data), params_(params), ws_(ws) {
  data_.validate();
  params_.validate();
  obs_ = restrict_observed(data_.mask);

  const Index n = data_.n();
  const Vector jw = assemble_jw(ws_, params_);
  const Vector mw = assemble_mw(ws_, params_, data_);
  const Vector means = params_.prior_mean.resolve(data_);
  const Vector var = params_.noise_var();

  Matrix a = select_square(block_gram(data_.inputs, params_), obs_);
  const Index m = static_cast<Index>(obs_.size());
  z_.resize(m);
  m_obs_.resize(m);
  for (Index k = 0; k < m; ++k) {
    const auto [i, c] = unflat_index(obs_[static_cast<std::size_t>(k)], n);
    a(k, k) += var[c] * jw[obs_[static_cast<std::size_t>(k)]];  // Sigma J_W diagonal
    z_[k] = data_.outputs(i, c) - mw[obs_[static_cast<std::size_t>(k)]];
    m_obs_[k] = means[c];
  }
  solver_.factorize(a, "K + Sigma J_W");
}

Predictive FittedState::predict(const Matrix& x_star, bool include_noise) const {
  const Index q = x_star.rows(), t = params_.channels();
  const Matrix ks = select_rows(cross_gram(data_.inputs, x_star, params_), obs_);
  const Vector means = params_.prior_mean.resolve(data_);

  Predictive pred;
  pred.mean = prior_mean_vec(means, q) + ks.transpose() * solver_.solve(z_);
  Matrix cov = star_gram(x_star, params_) - ks.transpose() * solver_.solve(ks);
  pred.cov = 0.5 * (cov + cov.transpose());
  if (include_noise) add_noise_diag(pred, params_, q);
  return pred;
}

Predictive morcgp_predict(const FittedState& state, const Matrix& x_star,
                          bool include_noise) {
  return state.predict(x_star, include_noise);
}

Predictive mogp_predict(const Dataset& data, const IcmParams& params,
                        const Matrix& x_star, bool include_noise) {
  data.validate();
  params.validate();
  const Index n = data.n(), q = x_star.rows();
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
  PsdSolver solver(a, "K + Sigma");

  const Matrix ks = select_rows(cross_gram(data.inputs, x_star, params), obs);
  Predictive pred;
  pred.mean = prior_mean_vec(means, q) + ks.transpose() * solver.solve(z);
  Matrix cov = star_gram(x_star, params) - ks.transpose() * solver.solve(ks);
  pred.cov = 0.5 * (cov + cov.transpose());
  if (include_noise) add_noise_diag(pred, params, q);
  return pred;
}

double kl_gaussian(const Predictive& p, const Predictive& q) {
  const Index n = p.mean.size();
  if (q.mean.size() != n || p.cov.rows() != n || q.cov.rows() != n)
    throw std::invalid_argument("kl_gaussian: dimension mismatch");

  Eigen::LLT<Matrix> llt_q(q.cov);
  if (llt_q.info() != Eigen::Success)
    throw NumericError("kl_gaussian: covariance of q is not positive definite");
  const Vector delta = q.mean - p.mean;
  const double mean_term = delta.dot(llt_q.solve(delta));

  if ((p.cov.array() == q.cov.array()).all())  // trace and log-det terms vanish exactly
    return 0.5 * mean_term;

  Eigen::LLT<Matrix> llt_p(p.cov);
  if (llt_p.info() != Eigen::Success)
    throw NumericError("kl_gaussian: covariance of p is not positive definite");
  const double trace_term = llt_q.solve(p.cov).trace();
  const double logdet_q = 2.0 * llt_q.matrixLLT().diagonal().array().log().sum();
  const double logdet_p = 2.0 * llt_p.matrixLLT().diagonal().array().log().sum();
  return 0.5 * (trace_term - static_cast<double>(n) + mean_term + logdet_q - logdet_p);
}

}  // namespace morcgp
