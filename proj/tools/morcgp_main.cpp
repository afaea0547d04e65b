// Command-line interface: fit / predict / benchmark / pif / simulate.
// Exit codes: 0 success, 1 usage or input error, 2 numeric failure.

#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "morcgp/csv_io.hpp"
#include "morcgp/errors.hpp"
#include "morcgp/experiments.hpp"
#include "morcgp/hyperopt.hpp"
#include "morcgp/inference.hpp"
#include "morcgp/kernel.hpp"
#include "morcgp/rng.hpp"
#include "morcgp/run_config.hpp"

namespace {

using namespace morcgp;

const std::set<std::string> kOptimizerKeys = {
    "max_iters", "tol_obj", "tol_grad", "fd_step", "max_restarts",
    "noise_var_cap", "beta_tracks_sigma", "mcd_starts", "mcd_h_frac"};

OptimizerConfig optimizer_from_config(const KeyValueConfig& cfg) {
  OptimizerConfig opt;
  opt.max_iters = cfg.get_int("max_iters", opt.max_iters);
  opt.tol_obj = cfg.get_double("tol_obj", opt.tol_obj);
  opt.tol_grad = cfg.get_double("tol_grad", opt.tol_grad);
  opt.fd_step = cfg.get_double("fd_step", opt.fd_step);
  opt.max_restarts = cfg.get_int("max_restarts", opt.max_restarts);
  opt.noise_var_cap = cfg.get_double("noise_var_cap", opt.noise_var_cap);
  opt.beta_tracks_sigma = cfg.get_bool("beta_tracks_sigma", opt.beta_tracks_sigma);
  opt.mcd_starts = cfg.get_int("mcd_starts", opt.mcd_starts);
  opt.mcd_h_frac = cfg.get_double("mcd_h_frac", opt.mcd_h_frac);
  return opt;
}

PriorMean prior_mean_from_string(const std::string& s) {
  if (s == "empirical") return PriorMean::empirical();
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("");
    return PriorMean::constant(v);
  } catch (const std::exception&) {
    throw ConfigError("prior mean must be 'empirical' or a number, got '" + s + "'");
  }
}

WeightSpec weight_spec_for(const std::string& method, double epsilon, Index t) {
  WeightSpec spec;
  if (method == "mogp") return WeightSpec::constant();
  if (method == "morcgp")
    spec.kind = WeightKind::Conditional;
  else if (method == "morcgp-naive")
    spec.kind = WeightKind::PriorMeanCenter;
  else
    throw ConfigError("unknown method '" + method + "'");
  spec.epsilon = Vector::Constant(t, epsilon);
  return spec;
}

Matrix load_query_inputs(const std::string& path, Index d_expected) {
  // query files may carry y columns (ignored) or inputs only
  std::ifstream probe(path);
  if (!probe) throw ParseError("cannot open '" + path + "'");
  std::string header;
  std::getline(probe, header);
  const bool has_y = header.find("y_1") != std::string::npos;
  probe.close();
  if (has_y) return load_csv(path).inputs;

  // inputs-only CSV: x_1..x_d
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::vector<Vector> rows;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParseError("non-numeric cell '" + cell + "'", line_no);
      }
    }
    if (d_expected > 0 && static_cast<Index>(vals.size()) != d_expected)
      throw ParseError("expected " + std::to_string(d_expected) + " input columns", line_no);
    Vector v(static_cast<Index>(vals.size()));
    for (std::size_t j = 0; j < vals.size(); ++j) v[static_cast<Index>(j)] = vals[j];
    rows.push_back(std::move(v));
  }
  if (rows.empty()) throw ParseError("no query rows in '" + path + "'");
  Matrix x(static_cast<Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) x.row(static_cast<Index>(i)) = rows[i];
  return x;
}

int run_fit(const std::string& data_path, const std::string& out_path,
            const std::string& method, double epsilon, const std::string& prior_mean,
            std::uint64_t seed, const KeyValueConfig& cfg) {
  const Dataset data = load_csv(data_path);
  OptimizerConfig opt = optimizer_from_config(cfg);
  const PriorMean pm = prior_mean_from_string(cfg.get_string("prior_mean", prior_mean));
  const double eps = cfg.get_double("epsilon", epsilon);
  const std::string meth = cfg.get_string("method", method);

  const WeightSpec spec = weight_spec_for(meth, eps, data.t());
  const FitMethod fm = meth == "mogp" ? FitMethod::MogpMl : FitMethod::MorcgpWloo;

  const Rng rng(seed);
  IcmParams init = default_init(data, pm, opt, rng.split(0));
  const FitResult result = fit(data, init, spec, fm, opt, rng.split(1));
  save_params_json(out_path, result);

  std::cout << "fit: method=" << meth << " objective=" << format_double(result.diagnostics.objective)
            << " iterations=" << result.diagnostics.iterations
            << " lengthscale=" << format_double(result.params.lengthscale) << "\n";
  if (result.diagnostics.mcd_fallback)
    std::cerr << "warning: " << result.diagnostics.note << "\n";
  return 0;
}

int run_predict(const std::string& data_path, const std::string& params_path,
                const std::string& query_path, const std::string& out_path,
                bool with_noise) {
  const Dataset data = load_csv(data_path);
  auto [params, spec] = load_params_json(params_path);
  if (params.channels() != data.t())
    throw ConfigError("params were fitted for T=" + std::to_string(params.channels()) +
                      " channels but the data has T=" + std::to_string(data.t()));
  const Matrix query = load_query_inputs(query_path, data.d());

  const WeightState ws = build_weight_state(data, params, spec);
  const FittedState state(data, params, ws);
  const Predictive pred = state.predict(query, with_noise);

  const Index q = query.rows(), t = data.t();
  Matrix mean(q, t), var(q, t);
  for (Index c = 0; c < t; ++c) {
    mean.col(c) = pred.mean.segment(c * q, q);
    var.col(c) = pred.cov.diagonal().segment(c * q, q);
  }
  save_predictions_csv(out_path, query, mean, var);
  std::cout << "predict: wrote " << q << " rows to " << out_path
            << (with_noise ? " (noise included)" : "") << "\n";
  return 0;
}

int run_simulate(const std::string& preset, std::uint64_t seed, Index n_override,
                 const std::string& out_path, const std::string& truth_path,
                 const std::string& outliers_path, const KeyValueConfig& cfg) {
  ScenarioConfig sc;
  if (!preset.empty())
    sc = builtin_scenario(preset);
  else if (cfg.has("scenario_name") || cfg.has("scenario_coreg"))
    sc = scenario_from_config(cfg);
  else
    throw ConfigError("simulate needs --preset or a scenario config");
  if (n_override > 0) sc.n = n_override;

  Rng rng(seed);
  Rng gen_rng = rng.split(0);
  const SimulatedData sim = sample_icm(sc, gen_rng);
  Rng cont_rng = rng.split(1);
  const ContaminatedData cont = contaminate(sim.data, sc.contamination, cont_rng);
  if (sc.contamination.fraction > 0.0 && cont.outliers.empty())
    std::cerr << "warning: contamination fraction too small to inject a single outlier\n";

  save_csv(out_path, cont.data);
  if (!truth_path.empty()) save_table_csv(truth_path, sim.data.inputs, sim.latent, "f");
  if (!outliers_path.empty()) save_outliers_csv(outliers_path, cont.outliers);
  std::cout << "simulate: scenario=" << sc.name << " n=" << sc.n
            << " outliers=" << cont.outliers.size() << "\n";
  return 0;
}

int run_pif(const std::string& preset, const std::string& data_path,
            const std::string& params_path, Index obs_1based, Index channel_1based,
            const std::string& magnitudes_str, const std::string& weights_kind,
            double epsilon, std::uint64_t seed, const std::string& out_path) {
  Dataset data;
  IcmParams params;
  WeightSpec spec;

  if (!preset.empty()) {
    const ScenarioConfig sc = builtin_scenario(preset);
    Rng rng(seed);
    Rng gen_rng = rng.split(0);
    data = sample_icm(sc, gen_rng).data;
    params = sc.gen_params;
    spec.center_cov = params.coreg();
    spec.center_cov.diagonal() += params.noise_var();
  } else if (!data_path.empty() && !params_path.empty()) {
    data = load_csv(data_path);
    std::tie(params, spec) = load_params_json(params_path);
  } else {
    throw ConfigError("pif needs --preset or both --data and --params");
  }

  if (weights_kind == "constant") {
    spec = WeightSpec::constant();
  } else {
    spec.kind = weights_kind == "prior-mean" ? WeightKind::PriorMeanCenter
                                             : WeightKind::Conditional;
    if (spec.epsilon.size() == 0) spec.epsilon = Vector::Constant(data.t(), epsilon);
    if (spec.kind == WeightKind::Conditional && spec.center_cov.size() == 0) {
      spec.center_cov = params.coreg();
      spec.center_cov.diagonal() += params.noise_var();
    }
  }

  std::vector<double> mags;
  std::stringstream ss(magnitudes_str);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    mags.push_back(std::stod(item));
  }
  if (mags.empty()) throw ConfigError("pif: --magnitudes must list at least one value");
  Vector magnitudes(static_cast<Index>(mags.size()));
  for (std::size_t j = 0; j < mags.size(); ++j) magnitudes[static_cast<Index>(j)] = mags[j];

  const PifCurve curve = pif_curve(data, params, spec, obs_1based - 1, channel_1based - 1,
                                   magnitudes);
  save_pif_csv(out_path, curve);
  std::cout << "pif: wrote " << curve.magnitudes.size() << " magnitudes x "
            << curve.kl.cols() << " channels to " << out_path << "\n";
  return 0;
}

int run_benchmark_cmd(const std::string& config_path, const std::string& presets,
                      const std::string& methods_str, int seeds, std::uint64_t seed,
                      const std::string& out_csv, const std::string& out_json,
                      bool timings, int threads, const std::string& eval_mode,
                      bool paper_literal) {
  KeyValueConfig cfg;
  if (!config_path.empty()) {
    cfg = KeyValueConfig::from_file(config_path);
    std::set<std::string> allowed = {"scenarios", "methods", "seeds", "base_seed",
                                     "epsilon", "threads", "eval", "paper_literal_rmse",
                                     "out_csv", "out_json", "timings"};
    for (const auto& k : kOptimizerKeys) allowed.insert(k);
    for (const auto& k : scenario_config_keys()) allowed.insert(k);
    cfg.require_known(allowed);
  }

  BenchmarkConfig bench;
  bench.optimizer = optimizer_from_config(cfg);
  bench.n_seeds = cfg.get_int("seeds", seeds);
  bench.base_seed = static_cast<std::uint64_t>(cfg.get_int("base_seed", static_cast<int>(seed)));
  bench.epsilon = cfg.get_double("epsilon", 0.1);
  bench.threads = cfg.get_int("threads", threads);
  bench.paper_literal_rmse = cfg.get_bool("paper_literal_rmse", paper_literal);
  const std::string eval = cfg.get_string("eval", eval_mode);
  if (eval == "latent")
    bench.eval_against_latent = true;
  else if (eval == "observed")
    bench.eval_against_latent = false;
  else
    throw ConfigError("eval must be 'latent' or 'observed', got '" + eval + "'");

  std::vector<std::string> scenario_names;
  {
    std::stringstream ss(presets);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) scenario_names.push_back(item);
  }
  for (const auto& s : cfg.get_list("scenarios")) scenario_names.push_back(s);
  for (const auto& name : scenario_names) {
    if (name == "custom")
      bench.scenarios.push_back(scenario_from_config(cfg));
    else
      bench.scenarios.push_back(builtin_scenario(name));
  }
  if (bench.scenarios.empty()) throw ConfigError("benchmark needs at least one scenario");

  bench.methods.clear();
  std::vector<std::string> method_names = cfg.get_list("methods");
  if (method_names.empty()) {
    std::stringstream ss(methods_str);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) method_names.push_back(item);
  }
  for (const auto& m : method_names) bench.methods.push_back(method_from_name(m));
  if (bench.methods.empty()) throw ConfigError("benchmark needs at least one method");

  const auto rows = run_benchmark(bench);

  const std::string csv_path = cfg.get_string("out_csv", out_csv);
  const std::string json_path = cfg.get_string("out_json", out_json);
  const bool with_timings = cfg.get_bool("timings", timings);
  if (!csv_path.empty()) save_benchmark_csv(csv_path, rows, with_timings);
  if (!json_path.empty()) save_benchmark_json(json_path, rows, bench, with_timings);

  int failures = 0;
  for (const auto& r : rows) failures += r.n_failures;
  std::cout << "benchmark: " << rows.size() << " runs, " << failures << " failures\n";
  for (const auto& sc : bench.scenarios) {
    for (const auto m : bench.methods) {
      double sum = 0.0, sum_n = 0.0;
      int count = 0;
      for (const auto& r : rows) {
        if (r.scenario != sc.name || r.method != method_name(m) || r.n_failures) continue;
        sum += r.rmse;
        sum_n += r.nlpd;
        ++count;
      }
      if (count > 0)
        std::cout << "  " << sc.name << " / " << method_name(m)
                  << ": rmse=" << format_double(sum / count)
                  << " nlpd=" << format_double(sum_n / count) << " (" << count << " seeds)\n";
    }
  }
  return failures == 0 ? 0 : 0;  // individual failures are reported, not fatal
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Outlier-robust multi-output Gaussian process regression (MO-RCGP)"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Fit hyperparameters and persist them as JSON");
  std::string fit_data, fit_out = "params.json", fit_method = "morcgp", fit_prior = "empirical";
  double fit_epsilon = 0.1;
  fit_cmd->add_option("--data", fit_data, "training CSV (x_1..x_d, y_1..y_T)")->required();
  fit_cmd->add_option("--out", fit_out, "output params JSON [params.json]");
  fit_cmd->add_option("--method", fit_method,
                      "mogp | morcgp | morcgp-naive [morcgp]");
  fit_cmd->add_option("--epsilon", fit_epsilon, "expected outlier fraction [0.1]");
  fit_cmd->add_option("--prior-mean", fit_prior, "'empirical' or a constant [empirical]");
  fit_cmd->add_option("--config", config_path, "key=value config file");
  fit_cmd->add_option("--seed", seed, "random seed [0]");

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Predict at query points from fitted params");
  std::string pr_data, pr_params, pr_query, pr_out = "predictions.csv";
  bool pr_noise = false;
  predict_cmd->add_option("--data", pr_data, "training CSV")->required();
  predict_cmd->add_option("--params", pr_params, "fitted params JSON")->required();
  predict_cmd->add_option("--query", pr_query, "query CSV (x columns)")->required();
  predict_cmd->add_option("--out", pr_out, "output predictions CSV [predictions.csv]");
  predict_cmd->add_flag("--with-noise", pr_noise, "add noise variance to the predictive");
  predict_cmd->add_option("--seed", seed, "accepted for interface symmetry");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Emit a synthetic (contaminated) dataset");
  std::string sim_preset, sim_out = "data.csv", sim_truth, sim_outliers;
  Index sim_n = 0;
  sim_cmd->add_option("--preset", sim_preset,
                      "table1 | table1-clean | fig2 | focused-c4 | mahalanobis-s<k>");
  sim_cmd->add_option("--out", sim_out, "dataset CSV [data.csv]");
  sim_cmd->add_option("--truth-out", sim_truth, "latent truth CSV");
  sim_cmd->add_option("--outliers-out", sim_outliers, "outlier index CSV");
  sim_cmd->add_option("--n", sim_n, "override the number of rows");
  sim_cmd->add_option("--config", config_path, "config file with scenario_* keys");
  sim_cmd->add_option("--seed", seed, "random seed [0]");

  // pif
  auto* pif_cmd = app.add_subcommand("pif", "Posterior influence curve per channel");
  std::string pif_preset, pif_data, pif_params, pif_out = "pif.csv";
  std::string pif_mags = "10,100,1000", pif_weights = "conditional";
  Index pif_obs = 1, pif_channel = 1;
  double pif_epsilon = 0.1;
  pif_cmd->add_option("--preset", pif_preset, "simulate this preset with its true params");
  pif_cmd->add_option("--data", pif_data, "training CSV");
  pif_cmd->add_option("--params", pif_params, "fitted params JSON");
  pif_cmd->add_option("--obs", pif_obs, "1-based contaminated row [1]");
  pif_cmd->add_option("--channel-contaminate", pif_channel, "1-based contaminated channel [1]");
  pif_cmd->add_option("--magnitudes", pif_mags, "comma list of contamination sizes");
  pif_cmd->add_option("--weights", pif_weights,
                      "conditional | prior-mean | constant (constant = MOGP) [conditional]");
  pif_cmd->add_option("--epsilon", pif_epsilon, "expected outlier fraction [0.1]");
  pif_cmd->add_option("--out", pif_out, "output CSV [pif.csv]");
  pif_cmd->add_option("--seed", seed, "random seed for --preset [0]");

  // benchmark
  auto* bench_cmd = app.add_subcommand("benchmark", "Seeded sweep over scenarios and methods");
  std::string b_presets, b_methods = "mogp,morcgp,morcgp-naive";
  std::string b_csv = "benchmark.csv", b_json, b_eval = "latent";
  int b_seeds = 20, b_threads = 0;
  bool b_timings = false, b_literal = false;
  bench_cmd->add_option("--config", config_path, "key=value config file");
  bench_cmd->add_option("--preset", b_presets, "comma list of scenario presets");
  bench_cmd->add_option("--methods", b_methods, "comma list [mogp,morcgp,morcgp-naive]");
  bench_cmd->add_option("--seeds", b_seeds, "seeds per scenario x method [20]");
  bench_cmd->add_option("--seed", seed, "base seed [0]");
  bench_cmd->add_option("--out-csv", b_csv, "results CSV [benchmark.csv]");
  bench_cmd->add_option("--out-json", b_json, "results JSON");
  bench_cmd->add_flag("--timings", b_timings,
                      "emit wall-clock fit times (breaks byte reproducibility)");
  bench_cmd->add_option("--threads", b_threads, "worker threads (0 = MORCGP_THREADS or cores)");
  bench_cmd->add_option("--eval", b_eval, "latent | observed [latent]");
  bench_cmd->add_flag("--paper-literal-rmse", b_literal,
                      "report the squared-error mean without the final square root");

  CLI11_PARSE(app, argc, argv);

  try {
    KeyValueConfig cfg;
    if (!config_path.empty() && (fit_cmd->parsed() || sim_cmd->parsed())) {
      cfg = KeyValueConfig::from_file(config_path);
      std::set<std::string> allowed = {"method", "epsilon", "prior_mean", "seed"};
      for (const auto& k : kOptimizerKeys) allowed.insert(k);
      for (const auto& k : scenario_config_keys()) allowed.insert(k);
      cfg.require_known(allowed);
    }
    if (fit_cmd->parsed())
      return run_fit(fit_data, fit_out, fit_method, fit_epsilon, fit_prior, seed, cfg);
    if (predict_cmd->parsed())
      return run_predict(pr_data, pr_params, pr_query, pr_out, pr_noise);
    if (sim_cmd->parsed())
      return run_simulate(sim_preset, seed, sim_n, sim_out, sim_truth, sim_outliers, cfg);
    if (pif_cmd->parsed())
      return run_pif(pif_preset, pif_data, pif_params, pif_obs, pif_channel, pif_mags,
                     pif_weights, pif_epsilon, seed, pif_out);
    if (bench_cmd->parsed())
      return run_benchmark_cmd(config_path, b_presets, b_methods, b_seeds, seed, b_csv,
                               b_json, b_timings, b_threads, b_eval, b_literal);
  } catch (const NumericError& err) {
    std::cerr << "numeric error: " << err.what() << "\n";
    return 2;
  } catch (const InsufficientDataError& err) {
    std::cerr << "numeric error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 1;
}
