#include "morcgp/kernel.hpp"

#include <cmath>
#include <stdexcept>

#include "morcgp/errors.hpp"

namespace morcgp {

Vector PriorMean::resolve(const Dataset& data) const {
  const Index t = data.t();
  Vector out(t);
  switch (kind) {
    case Kind::Constant:
      if (values.size() > 0) {
        if (values.size() != t)
          throw std::invalid_argument("prior mean: expected " + std::to_string(t) +
                                      " per-channel values, got " +
                                      std::to_string(values.size()));
        out = values;
      } else {
        out.setConstant(value);
      }
      break;
    case Kind::Empirical:
      for (Index c = 0; c < t; ++c) {
        double sum = 0.0;
        Index count = 0;
        for (Index i = 0; i < data.n(); ++i) {
          if (data.mask(i, c)) {
            sum += data.outputs(i, c);
            ++count;
          }
        }
        if (count == 0)
          throw std::invalid_argument("prior mean: channel " + std::to_string(c + 1) +
                                      " has no observed entries");
        out[c] = sum / static_cast<double>(count);
      }
      break;
  }
  return out;
}

void Dataset::validate() const {
  if (n() < 1 || t() < 1 || d() < 1)
    throw std::invalid_argument("dataset: need N >= 1, T >= 1, d >= 1");
  if (outputs.rows() != n() || mask.rows() != n() || mask.cols() != t())
    throw std::invalid_argument("dataset: inputs/outputs/mask shape mismatch");
  if (!inputs.allFinite())
    throw std::invalid_argument("dataset: non-finite input");
  for (Index i = 0; i < n(); ++i) {
    bool any = false;
    for (Index c = 0; c < t(); ++c) {
      if (mask(i, c)) {
        any = true;
        if (!std::isfinite(outputs(i, c)))
          throw std::invalid_argument("dataset: non-finite observed output at row " +
                                      std::to_string(i + 1));
      }
    }
    if (!any)
      throw std::invalid_argument("dataset: row " + std::to_string(i + 1) +
                                  " has no observed output");
  }
}

void IcmParams::validate() const {
  const Index t = channels();
  if (t < 1) throw std::invalid_argument("params: need at least one channel");
  if (!(lengthscale > 0.0) || !std::isfinite(lengthscale))
    throw std::invalid_argument("params: lengthscale must be positive");
  if (chol_coreg.rows() != t || chol_coreg.cols() != t)
    throw std::invalid_argument("params: chol_coreg must be T x T");
  for (Index r = 0; r < t; ++r) {
    for (Index c = r + 1; c < t; ++c) {
      if (chol_coreg(r, c) != 0.0)
        throw std::invalid_argument("params: chol_coreg must be lower triangular");
    }
    if (chol_coreg(r, r) < 0.0)
      throw std::invalid_argument("params: chol_coreg diagonal must be nonnegative");
  }
  for (Index c = 0; c < t; ++c) {
    if (!(noise_std[c] > 0.0) || !std::isfinite(noise_std[c]))
      throw std::invalid_argument("params: noise_std must be positive");
  }
}

double sq_exp(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& x2,
              double lengthscale) {
  if (!(lengthscale > 0.0))
    throw std::invalid_argument("sq_exp: lengthscale must be positive");
  if (!x.allFinite() || !x2.allFinite() || !std::isfinite(lengthscale))
    throw std::invalid_argument("sq_exp: non-finite input");
  if (x.size() != x2.size())
    throw std::invalid_argument("sq_exp: dimension mismatch");
  const double d2 = (x - x2).squaredNorm();
  return std::exp(-d2 / (lengthscale * lengthscale));
}

Matrix coreg_matrix(const Matrix& chol_coreg) {
  if (chol_coreg.rows() != chol_coreg.cols())
    throw std::invalid_argument("coreg_matrix: factor must be square");
  return chol_coreg * chol_coreg.transpose();
}

Matrix base_gram(const Matrix& x, double lengthscale) {
  const Index n = x.rows();
  const double inv_l2 = 1.0 / (lengthscale * lengthscale);
  Matrix g(n, n);
  for (Index i = 0; i < n; ++i) {
    g(i, i) = 1.0;
    for (Index j = i + 1; j < n; ++j) {
      const double v = std::exp(-(x.row(i) - x.row(j)).squaredNorm() * inv_l2);
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

namespace {

// Kronecker expansion B (T x T) with G (n x m) -> (Tn x Tm), channel-major.
Matrix kron_coreg(const Matrix& b, const Matrix& g) {
  const Index t = b.rows();
  Matrix out(t * g.rows(), b.cols() * g.cols());
  for (Index r = 0; r < t; ++r)
    for (Index c = 0; c < b.cols(); ++c)
      out.block(r * g.rows(), c * g.cols(), g.rows(), g.cols()) = b(r, c) * g;
  return out;
}

}  // namespace

Matrix block_gram(const Matrix& x, const IcmParams& params) {
  params.validate();
  return kron_coreg(params.coreg(), base_gram(x, params.lengthscale));
}

Matrix cross_gram(const Matrix& x, const Matrix& x_star, const IcmParams& params) {
  params.validate();
  const Index n = x.rows(), q = x_star.rows();
  const double inv_l2 = 1.0 / (params.lengthscale * params.lengthscale);
  Matrix g(n, q);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < q; ++j)
      g(i, j) = std::exp(-(x.row(i) - x_star.row(j)).squaredNorm() * inv_l2);
  return kron_coreg(params.coreg(), g);
}

Matrix star_gram(const Matrix& x_star, const IcmParams& params) {
  params.validate();
  return kron_coreg(params.coreg(), base_gram(x_star, params.lengthscale));
}

std::vector<Index> restrict_observed(const MaskArray& mask) {
  const Index n = mask.rows(), t = mask.cols();
  std::vector<Index> idx;
  idx.reserve(static_cast<std::size_t>(n * t));
  for (Index c = 0; c < t; ++c)
    for (Index i = 0; i < n; ++i)
      if (mask(i, c)) idx.push_back(flat_index(i, c, n));
  if (idx.empty()) throw std::invalid_argument("restrict_observed: empty mask");
  return idx;  // channel-major scan already yields ascending flat indices
}

Matrix select_rows(const Matrix& a, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), a.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = a.row(rows[r]);
  return out;
}

Matrix select_square(const Matrix& a, const std::vector<Index>& idx) {
  const Index m = static_cast<Index>(idx.size());
  Matrix out(m, m);
  for (Index r = 0; r < m; ++r)
    for (Index c = 0; c < m; ++c) out(r, c) = a(idx[r], idx[c]);
  return out;
}

Vector select_entries(const Vector& v, const std::vector<Index>& idx) {
  Vector out(static_cast<Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) out[static_cast<Index>(r)] = v[idx[r]];
  return out;
}

}  // namespace morcgp
