#include "morcgp/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "morcgp/errors.hpp"
#include "morcgp/kernel.hpp"
#include "morcgp/linalg.hpp"

namespace morcgp {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size();
  return k % 2 == 1 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

double mad_of(const std::vector<double>& v) {
  const double med = median_of(v);
  std::vector<double> dev(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) dev[i] = std::abs(v[i] - med);
  return median_of(std::move(dev));
}
}  // namespace

SimulatedData sample_icm(const ScenarioConfig& config, Rng& rng) {
  config.gen_params.validate();
  const Index n = config.n, d = config.d, t = config.gen_params.channels();
  if (n < 1 || d < 1) throw std::invalid_argument("sample_icm: need N >= 1, d >= 1");

  Matrix x(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) x(i, j) = rng.uniform(config.input_low, config.input_high);

  const Matrix k = block_gram(x, config.gen_params);
  PsdSolver chol(k, "sample_icm prior covariance");
  Vector xi(n * t);
  for (Index j = 0; j < n * t; ++j) xi[j] = rng.normal();
  Vector f_vec = chol.llt().matrixL() * xi;

  SimulatedData sim;
  sim.latent.resize(n, t);
  Dataset& ds = sim.data;
  ds.inputs = x;
  ds.outputs.resize(n, t);
  ds.mask = MaskArray::Constant(n, t, true);

  // channel-major unpack, then prior mean and per-channel noise; empirical
  // prior means are a fitting device, generation centers on zero for them
  Vector means = Vector::Zero(t);
  if (config.gen_params.prior_mean.kind == PriorMean::Kind::Constant) {
    const PriorMean& pm = config.gen_params.prior_mean;
    means = pm.values.size() > 0 ? pm.values : Vector::Constant(t, pm.value);
  }
  for (Index c = 0; c < t; ++c)
    for (Index i = 0; i < n; ++i) sim.latent(i, c) = means[c] + f_vec[flat_index(i, c, n)];
  for (Index c = 0; c < t; ++c) {
    const double sigma = config.gen_params.noise_std[c];
    for (Index i = 0; i < n; ++i) ds.outputs(i, c) = sim.latent(i, c) + sigma * rng.normal();
  }
  if (config.hide_channel >= 0 && config.hide_channel < t) {
    for (Index i = 0; i < n; ++i)
      if (x(i, 0) > config.hide_low && x(i, 0) < config.hide_high)
        ds.mask(i, config.hide_channel) = false;
    ds.validate();  // every row must keep at least one observed channel
  }
  return sim;
}

ContaminatedData contaminate(const Dataset& data, const ContaminationConfig& config,
                             Rng& rng) {
  data.validate();
  using Scheme = ContaminationConfig::Scheme;
  ContaminatedData out;
  out.data = data;
  if (config.scheme == Scheme::None || config.fraction <= 0.0) return out;
  if (config.fraction >= 1.0)
    throw std::invalid_argument("contaminate: fraction must lie in [0, 1)");

  const Index n = data.n(), t = data.t();
  std::vector<Index> targets = config.channels;
  if (config.scheme == Scheme::Mahalanobis) {
    if (config.md_channels < 1 || config.md_channels > t)
      throw std::invalid_argument("contaminate: md_channels must lie in [1, T]");
    targets.clear();
    for (Index c = 0; c < config.md_channels; ++c) targets.push_back(c);
  }
  for (Index c : targets)
    if (c < 0 || c >= t) throw std::invalid_argument("contaminate: channel out of range");

  const Index count = static_cast<Index>(std::llround(config.fraction * static_cast<double>(n)));
  if (count < 1) return out;  // fraction too small for a single outlier

  std::vector<Index> eligible;
  for (Index i = 0; i < n; ++i) {
    bool ok = true;
    for (Index c : targets) ok = ok && data.mask(i, c);
    if (ok) eligible.push_back(i);
  }
  if (static_cast<Index>(eligible.size()) < count)
    throw std::invalid_argument("contaminate: not enough rows observed in the target channels");

  const auto picks = rng.sample_without_replacement(eligible.size(),
                                                    static_cast<std::size_t>(count));
  std::vector<Index> rows(picks.size());
  for (std::size_t j = 0; j < picks.size(); ++j) rows[j] = eligible[picks[j]];

  Matrix& y = out.data.outputs;
  switch (config.scheme) {
    case Scheme::Uniform: {
      // first half of the selection adds, second half subtracts
      const std::size_t half = (rows.size() + 1) / 2;
      for (std::size_t j = 0; j < rows.size(); ++j) {
        const double sign = j < half ? 1.0 : -1.0;
        for (Index c : targets) {
          y(rows[j], c) += sign * rng.uniform(config.mag_low, config.mag_high);
          out.outliers.emplace_back(rows[j], c);
        }
      }
      break;
    }
    case Scheme::Asymmetric: {
      for (Index r : rows) {
        for (Index c : targets) {
          y(r, c) += rng.uniform(config.mag_low, config.mag_high);
          out.outliers.emplace_back(r, c);
        }
      }
      break;
    }
    case Scheme::IntervalShift: {
      Vector means = config.ref_means;
      if (means.size() == 0) means = Vector::Zero(t);
      if (means.size() != t)
        throw std::invalid_argument("contaminate: ref_means must have T entries");
      for (Index r : rows) {
        for (Index c : targets) {
          const double z = rng.uniform(config.shift_low, config.shift_high);
          y(r, c) += y(r, c) < means[c] ? z : -z;
          out.outliers.emplace_back(r, c);
        }
      }
      break;
    }
    case Scheme::Focused: {
      if (config.focus_has_interval) {
        for (Index r : rows) {
          for (Index j = 0; j < data.d(); ++j)
            out.data.inputs(r, j) = rng.uniform(config.focus_low, config.focus_high);
          for (Index c : targets) {
            y(r, c) = config.focus_value + config.focus_out_sd * rng.normal();
            out.outliers.emplace_back(r, c);
          }
        }
      } else {
        Vector med(data.d()), mad(data.d());
        for (Index j = 0; j < data.d(); ++j) {
          std::vector<double> col(data.inputs.col(j).data(),
                                  data.inputs.col(j).data() + n);
          med[j] = median_of(col);
          mad[j] = mad_of(col);
        }
        Vector mad_y(t);
        for (Index c = 0; c < t; ++c) {
          std::vector<double> vals;
          for (Index i = 0; i < n; ++i)
            if (data.mask(i, c)) vals.push_back(data.outputs(i, c));
          mad_y[c] = mad_of(vals);
        }
        for (Index r : rows) {
          for (Index j = 0; j < data.d(); ++j)
            out.data.inputs(r, j) = med[j] + rng.uniform(0.0, 0.1 * mad[j]);
          for (Index c : targets) {
            y(r, c) = config.focus_value + rng.uniform(0.0, 0.1 * mad_y[c]);
            out.outliers.emplace_back(r, c);
          }
        }
      }
      break;
    }
    case Scheme::Mahalanobis: {
      const Index s = config.md_channels;
      if (config.coreg_for_md.rows() < s || config.coreg_for_md.cols() < s)
        throw std::invalid_argument("contaminate: coreg_for_md smaller than md_channels");
      const Matrix b = config.coreg_for_md.topLeftCorner(s, s);
      PsdSolver solver(b, "mahalanobis coregionalisation block");
      for (Index r : rows) {
        const double md = rng.uniform(config.md_low, config.md_high);
        Vector v(s);
        for (Index c = 0; c < s; ++c) v[c] = rng.uniform(config.base_low, config.base_high);
        const double q = v.dot(solver.solve(v));
        const double sign = rng.below(2) == 0 ? 1.0 : -1.0;
        v *= sign * md / std::sqrt(q);
        for (Index c = 0; c < s; ++c) {
          y(r, c) += v[c];
          out.outliers.emplace_back(r, c);
        }
      }
      break;
    }
    case Scheme::None:
      break;
  }
  std::sort(out.outliers.begin(), out.outliers.end());
  return out;
}

double rmse(const Matrix& pred, const Matrix& truth, const MaskArray& mask,
            bool paper_literal) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols() ||
      mask.rows() != pred.rows() || mask.cols() != pred.cols())
    throw std::invalid_argument("rmse: shape mismatch");
  double outer = 0.0;
  Index n_rows = 0;
  for (Index i = 0; i < pred.rows(); ++i) {
    double inner = 0.0;
    Index t_i = 0;
    for (Index c = 0; c < pred.cols(); ++c) {
      if (!mask(i, c)) continue;
      const double e = pred(i, c) - truth(i, c);
      inner += e * e;
      ++t_i;
    }
    if (t_i == 0) continue;
    outer += inner / static_cast<double>(t_i);
    ++n_rows;
  }
  if (n_rows == 0) throw std::invalid_argument("rmse: empty mask");
  const double grand = outer / static_cast<double>(n_rows);
  return paper_literal ? grand : std::sqrt(grand);
}

double nlpd(const Matrix& pred_mean, const Matrix& pred_var, const Matrix& truth,
            const MaskArray& mask) {
  if (pred_mean.rows() != truth.rows() || pred_var.rows() != truth.rows())
    throw std::invalid_argument("nlpd: shape mismatch");
  double sum = 0.0;
  Index count = 0;
  for (Index i = 0; i < truth.rows(); ++i) {
    for (Index c = 0; c < truth.cols(); ++c) {
      if (!mask(i, c)) continue;
      const double v = pred_var(i, c);
      if (!(v > 0.0)) throw std::invalid_argument("nlpd: nonpositive predictive variance");
      const double r = truth(i, c) - pred_mean(i, c);
      sum += 0.5 * std::log(2.0 * std::numbers::pi * v) + 0.5 * r * r / v;
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("nlpd: empty mask");
  return sum / static_cast<double>(count);
}

PifCurve pif_curve(const Dataset& data, const IcmParams& params, const WeightSpec& spec,
                   Index m, Index s, const Vector& magnitudes) {
  data.validate();
  if (m < 0 || m >= data.n() || s < 0 || s >= data.t() || !data.mask(m, s))
    throw std::invalid_argument("pif_curve: (m, s) must be an observed entry");
  for (Index j = 0; j < magnitudes.size(); ++j) {
    if (!(magnitudes[j] > 0.0) || (j > 0 && magnitudes[j] <= magnitudes[j - 1]))
      throw std::invalid_argument("pif_curve: magnitudes must be positive ascending");
  }
  const Index n = data.n(), t = data.t();

  const auto marginals = [&](const Dataset& d) {
    const WeightState ws = build_weight_state(d, params, spec);
    const FittedState state(d, params, ws);
    return state.predict(d.inputs, false);
  };

  const Predictive clean = marginals(data);
  // shared diagonal nugget: the f_t(X) marginals inherit the base kernel's
  // numerically defective spectrum, and the KL needs both sides floored alike
  const double nugget = 1e-10 * clean.cov.diagonal().mean();

  const auto channel_slice = [&](const Predictive& p, Index c) {
    Predictive out;
    out.mean = p.mean.segment(c * n, n);
    out.cov = p.cov.block(c * n, c * n, n, n);
    out.cov.diagonal().array() += nugget;
    return out;
  };

  PifCurve curve;
  curve.m = m;
  curve.s = s;
  curve.magnitudes = magnitudes;
  curve.kl.resize(magnitudes.size(), t);
  for (Index j = 0; j < magnitudes.size(); ++j) {
    Dataset contaminated = data;
    contaminated.outputs(m, s) += magnitudes[j];
    const Predictive dirty = marginals(contaminated);
    for (Index c = 0; c < t; ++c)
      curve.kl(j, c) = kl_gaussian(channel_slice(clean, c), channel_slice(dirty, c));
  }
  return curve;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::Mogp: return "mogp";
    case Method::Morcgp: return "morcgp";
    case Method::MorcgpNaive: return "morcgp-naive";
  }
  return "?";
}

Method method_from_name(const std::string& name) {
  if (name == "mogp") return Method::Mogp;
  if (name == "morcgp") return Method::Morcgp;
  if (name == "morcgp-naive") return Method::MorcgpNaive;
  throw ConfigError("unknown method '" + name + "' (expected mogp, morcgp or morcgp-naive)");
}

namespace {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("MORCGP_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

struct BenchTask {
  std::size_t scenario_idx;
  std::size_t method_idx;
  int seed_idx;
};

}  // namespace

std::vector<BenchmarkRow> run_benchmark(const BenchmarkConfig& config) {
  std::vector<BenchTask> tasks;
  for (std::size_t si = 0; si < config.scenarios.size(); ++si)
    for (std::size_t mi = 0; mi < config.methods.size(); ++mi)
      for (int k = 0; k < config.n_seeds; ++k) tasks.push_back({si, mi, k});

  std::vector<BenchmarkRow> rows(tasks.size());
  const Rng root(config.base_seed);
  std::atomic<std::size_t> next{0};

  const auto worker = [&]() {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= tasks.size()) return;
      const BenchTask& task = tasks[idx];
      const ScenarioConfig& sc = config.scenarios[task.scenario_idx];
      const Method method = config.methods[task.method_idx];

      BenchmarkRow& row = rows[idx];
      row.scenario = sc.name;
      row.method = method_name(method);
      row.seed = config.base_seed + static_cast<std::uint64_t>(task.seed_idx);

      // the data stream depends only on (scenario, seed): every method sees
      // the same contaminated dataset
      const Rng data_rng = root.split(task.scenario_idx * 1000003ULL +
                                      static_cast<std::uint64_t>(task.seed_idx));
      try {
        Rng gen_rng = data_rng.split(0);
        const SimulatedData sim = sample_icm(sc, gen_rng);
        Rng cont_rng = data_rng.split(1);
        const ContaminatedData cont = contaminate(sim.data, sc.contamination, cont_rng);

        WeightSpec spec;
        spec.epsilon = Vector::Constant(sim.data.t(), config.epsilon);
        switch (method) {
          case Method::Mogp: spec = WeightSpec::constant(); break;
          case Method::Morcgp: spec.kind = WeightKind::Conditional; break;
          case Method::MorcgpNaive: spec.kind = WeightKind::PriorMeanCenter; break;
        }
        const FitMethod fit_method =
            method == Method::Mogp ? FitMethod::MogpMl : FitMethod::MorcgpWloo;

        const Rng fit_rng = data_rng.split(100 + task.method_idx);
        const IcmParams init = default_init(cont.data, sc.gen_params.prior_mean,
                                            config.optimizer, fit_rng.split(0));
        const auto t0 = std::chrono::steady_clock::now();
        const FitResult fitted = fit(cont.data, init, spec, fit_method, config.optimizer,
                                     fit_rng.split(1));
        row.fit_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        const FittedState state(cont.data, fitted.params, fitted.weights);
        const Predictive pred = state.predict(cont.data.inputs, false);

        const Index n = cont.data.n(), t = cont.data.t();
        Matrix mean(n, t), var(n, t);
        for (Index c = 0; c < t; ++c) {
          mean.col(c) = pred.mean.segment(c * n, n);
          var.col(c) = pred.cov.diagonal().segment(c * n, n);
        }
        var = var.cwiseMax(1e-12);

        if (config.eval_against_latent) {
          const MaskArray full = MaskArray::Constant(n, t, true);
          row.rmse = rmse(mean, sim.latent, full, config.paper_literal_rmse);
          row.nlpd = nlpd(mean, var, sim.latent, full);
        } else {
          const Vector nv = fitted.params.noise_var();
          Matrix var_y = var;
          for (Index c = 0; c < t; ++c) var_y.col(c).array() += nv[c];
          row.rmse = rmse(mean, sim.data.outputs, sim.data.mask, config.paper_literal_rmse);
          row.nlpd = nlpd(mean, var_y, sim.data.outputs, sim.data.mask);
        }
      } catch (const std::exception& err) {
        row.n_failures = 1;
        row.error = err.what();
        row.rmse = kNaN;
        row.nlpd = kNaN;
      }
    }
  };

  const int n_threads = std::min<int>(resolve_threads(config.threads),
                                      static_cast<int>(tasks.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return rows;
}

ScenarioConfig builtin_scenario(const std::string& name) {
  const auto make_params = [](double ell, const Matrix& b, double noise_var,
                              PriorMean prior) {
    IcmParams p;
    p.lengthscale = ell;
    p.chol_coreg = Eigen::LLT<Matrix>(b).matrixL();
    p.noise_std = Vector::Constant(b.rows(), std::sqrt(noise_var));
    p.prior_mean = std::move(prior);
    return p;
  };

  if (name == "table1" || name == "table1-clean") {
    Matrix b(3, 3);
    b << 1.0, 0.9, 0.7, 0.9, 1.0, 0.8, 0.7, 0.8, 1.0;
    ScenarioConfig sc;
    sc.name = name;
    sc.n = 100;
    sc.d = 1;
    sc.input_low = -5.0;
    sc.input_high = 5.0;
    sc.gen_params = make_params(1.0, b, 0.1, PriorMean::zero());
    if (name == "table1") {
      sc.contamination.scheme = ContaminationConfig::Scheme::IntervalShift;
      sc.contamination.fraction = 0.1;
      sc.contamination.channels = {0};
      sc.contamination.shift_low = 2.0;
      sc.contamination.shift_high = 3.0;
      sc.contamination.ref_means = Vector::Zero(3);
    }
    return sc;
  }
  if (name == "fig2" || name == "focused-c4") {
    Matrix b(2, 2);
    b << 2.0, 1.25, 1.25, 1.0;
    ScenarioConfig sc;
    sc.name = name;
    sc.n = 120;
    sc.d = 1;
    sc.input_low = 0.0;
    sc.input_high = 1.0;
    sc.gen_params = make_params(0.1, b, 0.05, PriorMean::empirical());
    if (name == "fig2") {
      sc.contamination.scheme = ContaminationConfig::Scheme::Asymmetric;
      sc.contamination.fraction = 0.025;
      sc.contamination.channels = {1};
      sc.hide_channel = 0;
      sc.hide_low = 0.3;
      sc.hide_high = 0.7;
    } else {
      sc.contamination.scheme = ContaminationConfig::Scheme::Focused;
      sc.contamination.fraction = 0.1;
      sc.contamination.channels = {0};
      sc.contamination.focus_has_interval = true;
      sc.contamination.focus_low = 0.42;
      sc.contamination.focus_high = 0.58;
      sc.contamination.focus_value = 2.5;
      sc.contamination.focus_out_sd = std::sqrt(0.5);
    }
    return sc;
  }
  if (name.rfind("mahalanobis-s", 0) == 0) {
    const int s = std::atoi(name.c_str() + std::string("mahalanobis-s").size());
    if (s < 1 || s > 10)
      throw ConfigError("mahalanobis preset wants s in 1..10, got '" + name + "'");
    const Index t = 10;
    Matrix b(t, t);
    for (Index r = 0; r < t; ++r)
      for (Index c = 0; c < t; ++c) b(r, c) = 1.0 - 0.1 * std::abs(static_cast<double>(r - c));
    ScenarioConfig sc;
    sc.name = name;
    sc.n = 80;
    sc.d = 1;
    sc.input_low = 0.0;
    sc.input_high = 1.0;
    sc.gen_params = make_params(0.1, b, 0.05, PriorMean::empirical());
    sc.contamination.scheme = ContaminationConfig::Scheme::Mahalanobis;
    sc.contamination.fraction = 0.1;
    sc.contamination.md_channels = s;
    sc.contamination.coreg_for_md = b;
    return sc;
  }
  throw ConfigError("unknown scenario preset '" + name + "'");
}

std::vector<std::string> builtin_scenario_names() {
  std::vector<std::string> names = {"table1", "table1-clean", "fig2", "focused-c4"};
  for (int s = 1; s <= 10; ++s) names.push_back("mahalanobis-s" + std::to_string(s));
  return names;
}

}  // namespace morcgp
