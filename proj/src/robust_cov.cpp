#include "morcgp/robust_cov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "morcgp/errors.hpp"
#include "morcgp/linalg.hpp"

namespace morcgp {

namespace {

// Regularized lower incomplete gamma P(a, x), series + continued fraction.
double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_p: bad arguments");
  if (x == 0.0) return 0.0;
  const double gln = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - gln);
  }
  // Lentz continued fraction for Q(a, x)
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, f = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  const double q = std::exp(-x + a * std::log(x) - gln) * f;
  return 1.0 - q;
}

struct SubsetFit {
  Vector mean;
  Matrix cov;      // ML (1/h) covariance
  double det = 0.0;
};

SubsetFit fit_subset(const Matrix& y, const std::vector<Index>& subset) {
  const Index t = y.cols();
  const double m = static_cast<double>(subset.size());
  SubsetFit f;
  f.mean = Vector::Zero(t);
  for (Index r : subset) f.mean += y.row(r).transpose();
  f.mean /= m;
  f.cov = Matrix::Zero(t, t);
  for (Index r : subset) {
    const Vector d = y.row(r).transpose() - f.mean;
    f.cov.noalias() += d * d.transpose();
  }
  f.cov /= m;
  Eigen::LLT<Matrix> llt(f.cov);
  if (llt.info() == Eigen::Success) {
    f.det = std::exp(2.0 * llt.matrixLLT().diagonal().array().log().sum());
    if (f.det > 0.0 && std::isfinite(f.det)) return f;
  }
  f.det = 0.0;  // singular marker
  return f;
}

std::vector<Index> h_closest(const Matrix& y, const SubsetFit& fit, Index h,
                             const std::string& context) {
  Matrix cov = fit.cov;
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success || fit.det <= 0.0) {
    // singular scatter: jitter once, then give up
    double scale = cov.diagonal().mean();
    if (!(scale > 0.0)) scale = 1.0;
    cov.diagonal().array() += 1e-8 * scale;
    llt.compute(cov);
    if (llt.info() != Eigen::Success)
      throw NumericError(context + ": singular scatter after jitter");
  }
  const Index n = y.rows();
  std::vector<std::pair<double, Index>> dist(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const Vector d = y.row(i).transpose() - fit.mean;
    dist[static_cast<std::size_t>(i)] = {d.dot(llt.solve(d)), i};
  }
  // lowest index wins ties
  std::sort(dist.begin(), dist.end());
  std::vector<Index> out(static_cast<std::size_t>(h));
  for (Index k = 0; k < h; ++k) out[static_cast<std::size_t>(k)] = dist[static_cast<std::size_t>(k)].second;
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

double chi_sq_cdf(double x, double dof) {
  if (x <= 0.0) return 0.0;
  return gamma_p(dof / 2.0, x / 2.0);
}

double chi_sq_quantile(double p, double dof) {
  if (!(p > 0.0) || !(p < 1.0))
    throw std::invalid_argument("chi_sq_quantile: p must lie in (0, 1)");
  double lo = 0.0, hi = dof;
  while (chi_sq_cdf(hi, dof) < p) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (chi_sq_cdf(mid, dof) < p)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-13 * (1.0 + hi)) break;
  }
  return 0.5 * (lo + hi);
}

double mcd_consistency_factor(Index h, Index n_rows, Index t) {
  const double alpha = static_cast<double>(h) / static_cast<double>(n_rows);
  if (alpha >= 1.0) return 1.0;
  const double q = chi_sq_quantile(alpha, static_cast<double>(t));
  return alpha / chi_sq_cdf(q, static_cast<double>(t) + 2.0);
}

Index default_mcd_h(Index n_rows, Index t) {
  const Index lo = (n_rows + t + 1 + 1) / 2;  // ceil((N + T + 1) / 2)
  const Index h = static_cast<Index>(std::ceil(0.75 * static_cast<double>(n_rows)));
  return std::clamp(h, lo, n_rows);
}

CStepResult c_step(const Matrix& y, const std::vector<Index>& subset) {
  const Index n = y.rows(), t = y.cols();
  const Index h = static_cast<Index>(subset.size());
  if (h > n) throw std::invalid_argument("c_step: subset larger than data");
  if (t >= h) throw std::invalid_argument("c_step: need T < h");
  for (Index r : subset)
    if (r < 0 || r >= n) throw std::invalid_argument("c_step: subset index out of range");

  const SubsetFit fit = fit_subset(y, subset);
  CStepResult res;
  res.location = fit.mean;
  res.scatter = fit.cov;
  res.determinant = fit.det;
  res.next_subset = h_closest(y, fit, h, "c_step");
  return res;
}

RobustEstimate fast_mcd(const Matrix& y, Index h, int n_starts, const Rng& rng) {
  const Index n = y.rows(), t = y.cols();
  if (n < h)
    throw InsufficientDataError("fast_mcd: need at least h = " + std::to_string(h) +
                                " complete rows, have " + std::to_string(n) +
                                "; fall back to a per-channel robust scale");
  const Index h_min = (n + t + 1 + 1) / 2;
  if (h < h_min || h <= t)
    throw std::invalid_argument("fast_mcd: h outside [ceil((N+T+1)/2), N]");
  if (n_starts < 1) throw std::invalid_argument("fast_mcd: n_starts must be >= 1");

  const double consistency = mcd_consistency_factor(h, n, t);

  auto finish = [&](const SubsetFit& fit, std::vector<Index> subset) {
    RobustEstimate est;
    est.location = fit.mean;
    est.scatter = consistency * fit.cov;
    est.scatter = 0.5 * (est.scatter + est.scatter.transpose()).eval();
    est.determinant = fit.det;
    std::sort(subset.begin(), subset.end());
    est.support = std::move(subset);
    return est;
  };

  if (h == n) {
    std::vector<Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Index{0});
    return finish(fit_subset(y, all), all);
  }

  struct Candidate {
    std::vector<Index> subset;
    double det;
    int start;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(static_cast<std::size_t>(n_starts));

  for (int s = 0; s < n_starts; ++s) {
    Rng local = rng.split(static_cast<std::uint64_t>(s));
    auto pick = local.sample_without_replacement(static_cast<std::size_t>(n),
                                                 static_cast<std::size_t>(t + 1));
    std::vector<Index> subset(pick.begin(), pick.end());
    // grow a singular seed subset until its covariance is invertible
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    for (Index r : subset) used[static_cast<std::size_t>(r)] = true;
    SubsetFit seed = fit_subset(y, subset);
    while (seed.det <= 0.0 && static_cast<Index>(subset.size()) < h) {
      Index extra;
      do {
        extra = static_cast<Index>(local.below(static_cast<std::uint64_t>(n)));
      } while (used[static_cast<std::size_t>(extra)]);
      used[static_cast<std::size_t>(extra)] = true;
      subset.push_back(extra);
      seed = fit_subset(y, subset);
    }
    std::vector<Index> current = h_closest(y, seed, h, "fast_mcd start");
    current = c_step(y, current).next_subset;  // second concentration step
    const double det2 = fit_subset(y, current).det;
    candidates.push_back({std::move(current), det2, s});
  }

  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return a.det != b.det ? a.det < b.det : a.start < b.start;
  });
  const std::size_t n_refine = std::min<std::size_t>(10, candidates.size());

  SubsetFit best_fit;
  std::vector<Index> best_subset;
  double best_det = std::numeric_limits<double>::infinity();
  int best_start = -1;
  for (std::size_t c = 0; c < n_refine; ++c) {
    std::vector<Index> subset = candidates[c].subset;
    SubsetFit fit = fit_subset(y, subset);
    for (int it = 0; it < 100; ++it) {
      std::vector<Index> next = h_closest(y, fit, h, "fast_mcd refine");
      if (next == subset) break;
      const SubsetFit next_fit = fit_subset(y, next);
      const bool converged =
          fit.det - next_fit.det < 1e-9 * std::max(fit.det, 1e-300);
      subset = std::move(next);
      fit = next_fit;
      if (converged) break;
    }
    if (fit.det < best_det ||
        (fit.det == best_det && candidates[c].start < best_start)) {
      best_det = fit.det;
      best_fit = fit;
      best_subset = subset;
      best_start = candidates[c].start;
    }
  }
  if (best_det <= 0.0 || !std::isfinite(best_det))
    throw NumericError("fast_mcd: all starts produced a singular scatter");
  return finish(best_fit, best_subset);
}

CenterCovEstimate robust_center_cov(const Dataset& data, double h_frac, int n_starts,
                                    const Rng& rng) {
  data.validate();
  const Index n = data.n(), t = data.t();

  std::vector<Index> complete;
  for (Index i = 0; i < n; ++i)
    if (data.mask.row(i).all()) complete.push_back(i);
  const Index m = static_cast<Index>(complete.size());

  const Index h_target =
      static_cast<Index>(std::ceil(h_frac * static_cast<double>(n)));
  const Index h_min = (m + t + 1 + 1) / 2;
  CenterCovEstimate out;

  if (m >= h_target && h_target > t && std::max(h_target, h_min) <= m) {
    Matrix yc(m, t);
    for (Index r = 0; r < m; ++r) yc.row(r) = data.outputs.row(complete[r]);
    const Index h = std::clamp(h_target, h_min, m);
    out.cov = fast_mcd(yc, h, n_starts, rng).scatter;
    return out;
  }

  // MAD fallback: diagonal robust scale per channel, zero cross-correlation.
  out.used_fallback = true;
  out.note = "fewer than h = " + std::to_string(h_target) +
             " complete rows (" + std::to_string(m) +
             "); using per-channel MAD with zero cross-correlation";
  out.cov = Matrix::Zero(t, t);
  for (Index c = 0; c < t; ++c) {
    std::vector<double> vals;
    for (Index i = 0; i < n; ++i)
      if (data.mask(i, c)) vals.push_back(data.outputs(i, c));
    std::sort(vals.begin(), vals.end());
    const auto median = [](const std::vector<double>& v) {
      const std::size_t k = v.size();
      return k % 2 == 1 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
    };
    const double med = median(vals);
    for (double& v : vals) v = std::abs(v - med);
    std::sort(vals.begin(), vals.end());
    const double sigma = std::max(1.4826 * median(vals), 1e-12);
    out.cov(c, c) = sigma * sigma;
  }
  return out;
}

}  // namespace morcgp
