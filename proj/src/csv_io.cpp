#include "morcgp/csv_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "morcgp/errors.hpp"

namespace morcgp {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_cell(const std::string& cell, long line_no) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &pos);
  } catch (const std::exception&) {
    throw ParseError("non-numeric cell '" + cell + "'", line_no);
  }
  if (pos != cell.size()) throw ParseError("non-numeric cell '" + cell + "'", line_no);
  return v;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file '" + path + "'", 1);

  const auto header = split_line(trim(line));
  Index d = 0, t = 0;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const std::string name = trim(header[j]);
    const std::string want_x = "x_" + std::to_string(d + 1);
    const std::string want_y = "y_" + std::to_string(t + 1);
    if (t == 0 && name == want_x) {
      ++d;
    } else if (name == want_y) {
      ++t;
    } else {
      throw ParseError("unexpected header column '" + name +
                       "' (expected x_1..x_d then y_1..y_T)", 1);
    }
  }
  if (d < 1 || t < 1) throw ParseError("header must list x_1..x_d and y_1..y_T", 1);

  std::vector<std::vector<std::string>> body;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    auto cells = split_line(stripped);
    if (static_cast<Index>(cells.size()) != d + t)
      throw ParseError("expected " + std::to_string(d + t) + " cells, found " +
                       std::to_string(cells.size()), line_no);
    body.push_back(std::move(cells));
    body.back().push_back(std::to_string(line_no));  // keep origin for errors
  }
  if (body.empty()) throw ParseError("no data rows in '" + path + "'");

  const Index n = static_cast<Index>(body.size());
  Dataset ds;
  ds.inputs.resize(n, d);
  ds.outputs = Matrix::Zero(n, t);
  ds.mask = MaskArray::Constant(n, t, false);
  for (Index i = 0; i < n; ++i) {
    const auto& cells = body[static_cast<std::size_t>(i)];
    const long origin = std::stol(cells.back());
    Index observed = 0;
    for (Index j = 0; j < d; ++j) {
      const std::string cell = trim(cells[static_cast<std::size_t>(j)]);
      if (cell.empty()) throw ParseError("empty input cell x_" + std::to_string(j + 1), origin);
      ds.inputs(i, j) = parse_cell(cell, origin);
    }
    for (Index c = 0; c < t; ++c) {
      const std::string cell = trim(cells[static_cast<std::size_t>(d + c)]);
      if (cell.empty()) continue;  // unobserved
      ds.outputs(i, c) = parse_cell(cell, origin);
      ds.mask(i, c) = true;
      ++observed;
    }
    if (observed == 0) throw ParseError("row has no observed output", origin);
  }
  ds.validate();
  return ds;
}

void save_csv(const std::string& path, const Dataset& data) {
  auto out = open_out(path);
  for (Index j = 0; j < data.d(); ++j) out << (j ? "," : "") << "x_" << j + 1;
  for (Index c = 0; c < data.t(); ++c) out << ",y_" << c + 1;
  out << "\n";
  for (Index i = 0; i < data.n(); ++i) {
    for (Index j = 0; j < data.d(); ++j)
      out << (j ? "," : "") << format_double(data.inputs(i, j));
    for (Index c = 0; c < data.t(); ++c) {
      out << ",";
      if (data.mask(i, c)) out << format_double(data.outputs(i, c));
    }
    out << "\n";
  }
}

void save_table_csv(const std::string& path, const Matrix& inputs, const Matrix& values,
                    const std::string& prefix) {
  auto out = open_out(path);
  for (Index j = 0; j < inputs.cols(); ++j) out << (j ? "," : "") << "x_" << j + 1;
  for (Index c = 0; c < values.cols(); ++c) out << "," << prefix << "_" << c + 1;
  out << "\n";
  for (Index i = 0; i < inputs.rows(); ++i) {
    for (Index j = 0; j < inputs.cols(); ++j)
      out << (j ? "," : "") << format_double(inputs(i, j));
    for (Index c = 0; c < values.cols(); ++c) out << "," << format_double(values(i, c));
    out << "\n";
  }
}

void save_predictions_csv(const std::string& path, const Matrix& inputs,
                          const Matrix& mean, const Matrix& var) {
  auto out = open_out(path);
  for (Index j = 0; j < inputs.cols(); ++j) out << (j ? "," : "") << "x_" << j + 1;
  for (Index c = 0; c < mean.cols(); ++c) out << ",mean_" << c + 1;
  for (Index c = 0; c < var.cols(); ++c) out << ",var_" << c + 1;
  out << "\n";
  for (Index i = 0; i < inputs.rows(); ++i) {
    for (Index j = 0; j < inputs.cols(); ++j)
      out << (j ? "," : "") << format_double(inputs(i, j));
    for (Index c = 0; c < mean.cols(); ++c) out << "," << format_double(mean(i, c));
    for (Index c = 0; c < var.cols(); ++c) out << "," << format_double(var(i, c));
    out << "\n";
  }
}

void save_outliers_csv(const std::string& path,
                       const std::vector<std::pair<Index, Index>>& outliers) {
  auto out = open_out(path);
  out << "row,channel\n";
  for (const auto& [i, c] : outliers) out << i + 1 << "," << c + 1 << "\n";
}

void save_pif_csv(const std::string& path, const PifCurve& curve) {
  auto out = open_out(path);
  out << "magnitude";
  for (Index c = 0; c < curve.kl.cols(); ++c) out << ",kl_" << c + 1;
  out << "\n";
  for (Index j = 0; j < curve.magnitudes.size(); ++j) {
    out << format_double(curve.magnitudes[j]);
    for (Index c = 0; c < curve.kl.cols(); ++c) out << "," << format_double(curve.kl(j, c));
    out << "\n";
  }
}

void save_benchmark_csv(const std::string& path, const std::vector<BenchmarkRow>& rows,
                        bool with_timings) {
  auto out = open_out(path);
  out << "scenario,method,seed,rmse,nlpd,fit_seconds,n_failures\n";
  for (const auto& r : rows) {
    out << r.scenario << "," << r.method << "," << r.seed << ","
        << format_double(r.rmse) << "," << format_double(r.nlpd) << ","
        << format_double(with_timings ? r.fit_seconds : 0.0) << "," << r.n_failures << "\n";
  }
}

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  const Index rows = static_cast<Index>(j.size());
  if (rows == 0) return Matrix();
  const Index cols = static_cast<Index>(j.at(0).size());
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  return m;
}

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vector vector_from_json(const json& j) {
  Vector v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
  return v;
}

std::string weight_kind_name(WeightKind k) {
  switch (k) {
    case WeightKind::Conditional: return "conditional";
    case WeightKind::PriorMeanCenter: return "prior-mean";
    case WeightKind::Constant: return "constant";
  }
  return "?";
}

WeightKind weight_kind_from_name(const std::string& s) {
  if (s == "conditional") return WeightKind::Conditional;
  if (s == "prior-mean") return WeightKind::PriorMeanCenter;
  if (s == "constant") return WeightKind::Constant;
  throw ConfigError("unknown weight kind '" + s + "'");
}

}  // namespace

void save_benchmark_json(const std::string& path, const std::vector<BenchmarkRow>& rows,
                         const BenchmarkConfig& config, bool with_timings) {
  json doc;
  json cfg;
  cfg["n_seeds"] = config.n_seeds;
  cfg["base_seed"] = config.base_seed;
  cfg["epsilon"] = config.epsilon;
  cfg["paper_literal_rmse"] = config.paper_literal_rmse;
  cfg["eval_against_latent"] = config.eval_against_latent;
  json scen = json::array();
  for (const auto& s : config.scenarios) scen.push_back(s.name);
  cfg["scenarios"] = std::move(scen);
  json methods = json::array();
  for (const auto m : config.methods) methods.push_back(method_name(m));
  cfg["methods"] = std::move(methods);
  doc["config"] = std::move(cfg);

  json out_rows = json::array();
  for (const auto& r : rows) {
    json row;
    row["scenario"] = r.scenario;
    row["method"] = r.method;
    row["seed"] = r.seed;
    row["rmse"] = r.rmse;
    row["nlpd"] = r.nlpd;
    row["fit_seconds"] = with_timings ? r.fit_seconds : 0.0;
    row["n_failures"] = r.n_failures;
    if (!r.error.empty()) row["error"] = r.error;
    out_rows.push_back(std::move(row));
  }
  doc["results"] = std::move(out_rows);
  auto out = open_out(path);
  out << doc.dump(2) << "\n";
}

void save_params_json(const std::string& path, const FitResult& result) {
  const IcmParams& p = result.params;
  json doc;
  doc["lengthscale"] = p.lengthscale;
  doc["noise_std"] = vector_to_json(p.noise_std);
  doc["coreg_chol"] = matrix_to_json(p.chol_coreg);
  doc["coreg"] = matrix_to_json(p.coreg());
  json pm;
  pm["kind"] = p.prior_mean.kind == PriorMean::Kind::Empirical ? "empirical" : "constant";
  if (p.prior_mean.kind == PriorMean::Kind::Constant) {
    if (p.prior_mean.values.size() > 0)
      pm["values"] = vector_to_json(p.prior_mean.values);
    else
      pm["value"] = p.prior_mean.value;
  }
  doc["prior_mean"] = std::move(pm);

  json ws;
  ws["kind"] = weight_kind_name(result.spec_used.kind);
  if (result.spec_used.epsilon.size() > 0) ws["epsilon"] = vector_to_json(result.spec_used.epsilon);
  if (result.spec_used.beta.size() > 0) ws["beta"] = vector_to_json(result.spec_used.beta);
  if (result.spec_used.center_cov.size() > 0)
    ws["center_cov"] = matrix_to_json(result.spec_used.center_cov);
  doc["weight_spec"] = std::move(ws);

  json diag;
  diag["objective"] = result.diagnostics.objective;
  diag["iterations"] = result.diagnostics.iterations;
  diag["objective_evals"] = result.diagnostics.objective_evals;
  diag["restarts"] = result.diagnostics.restarts;
  diag["converged"] = result.diagnostics.converged;
  diag["loo_entries_excluded"] = result.diagnostics.loo_excluded;
  diag["mcd_fallback"] = result.diagnostics.mcd_fallback;
  if (!result.diagnostics.note.empty()) diag["note"] = result.diagnostics.note;
  json wdiag;
  wdiag["scales"] = vector_to_json(result.weights.scales);
  wdiag["beta"] = vector_to_json(result.weights.beta);
  {
    // weight summary per channel over observed entries
    json mins = json::array(), maxs = json::array();
    const Matrix& w = result.weights.weights;
    for (Index c = 0; c < w.cols(); ++c) {
      double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
      for (Index i = 0; i < w.rows(); ++i) {
        if (std::isnan(w(i, c))) continue;
        lo = std::min(lo, w(i, c));
        hi = std::max(hi, w(i, c));
      }
      mins.push_back(lo);
      maxs.push_back(hi);
    }
    wdiag["weight_min"] = std::move(mins);
    wdiag["weight_max"] = std::move(maxs);
  }
  diag["weights"] = std::move(wdiag);
  doc["diagnostics"] = std::move(diag);

  auto out = open_out(path);
  out << doc.dump(2) << "\n";
}

std::pair<IcmParams, WeightSpec> load_params_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError("invalid params JSON: " + std::string(e.what()));
  }
  IcmParams p;
  try {
    p.lengthscale = doc.at("lengthscale").get<double>();
    p.noise_std = vector_from_json(doc.at("noise_std"));
    p.chol_coreg = matrix_from_json(doc.at("coreg_chol"));
    const json& pm = doc.at("prior_mean");
    if (pm.at("kind").get<std::string>() == "empirical") {
      p.prior_mean = PriorMean::empirical();
    } else if (pm.contains("values")) {
      p.prior_mean = PriorMean::constant(vector_from_json(pm.at("values")));
    } else {
      p.prior_mean = PriorMean::constant(pm.at("value").get<double>());
    }
    WeightSpec spec;
    const json& ws = doc.at("weight_spec");
    spec.kind = weight_kind_from_name(ws.at("kind").get<std::string>());
    if (ws.contains("epsilon")) spec.epsilon = vector_from_json(ws.at("epsilon"));
    if (ws.contains("beta")) spec.beta = vector_from_json(ws.at("beta"));
    if (ws.contains("center_cov")) spec.center_cov = matrix_from_json(ws.at("center_cov"));
    p.validate();
    return {std::move(p), std::move(spec)};
  } catch (const json::exception& e) {
    throw ParseError("params JSON missing field: " + std::string(e.what()));
  }
}

}  // namespace morcgp
