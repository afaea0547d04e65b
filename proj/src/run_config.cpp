#include "morcgp/run_config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Cholesky>

#include "morcgp/errors.hpp"

namespace morcgp {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(s);
  while (std::getline(ss, item, sep)) {
    const std::string v = trim(item);
    if (!v.empty()) out.push_back(v);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

}  // namespace

KeyValueConfig KeyValueConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  KeyValueConfig cfg;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    cfg.values_[key] = value;
  }
  return cfg;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : to_double(key, it->second);
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
  const double v = get_double(key, static_cast<double>(fallback));
  return static_cast<int>(v);
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

std::vector<std::string> KeyValueConfig::get_list(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return {};
  return split(it->second, ',');
}

Vector KeyValueConfig::get_vector(const std::string& key) const {
  const auto items = get_list(key);
  Vector v(static_cast<Index>(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i)
    v[static_cast<Index>(i)] = to_double(key, items[i]);
  return v;
}

Matrix KeyValueConfig::get_matrix(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return {};
  const auto row_strs = split(it->second, ';');
  if (row_strs.empty()) return {};
  std::vector<std::vector<double>> rows;
  for (const auto& rs : row_strs) {
    const auto cells = split(rs, ',');
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(to_double(key, c));
    rows.push_back(std::move(row));
  }
  const Index n = static_cast<Index>(rows.size());
  const Index m = static_cast<Index>(rows.front().size());
  Matrix out(n, m);
  for (Index i = 0; i < n; ++i) {
    if (static_cast<Index>(rows[static_cast<std::size_t>(i)].size()) != m)
      throw ConfigError("config key '" + key + "': ragged matrix rows");
    for (Index j = 0; j < m; ++j) out(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return out;
}

void KeyValueConfig::require_known(const std::set<std::string>& allowed) const {
  for (const auto& [key, value] : values_) {
    if (!allowed.count(key))
      throw ConfigError("unknown config key '" + key + "'");
  }
}

std::set<std::string> scenario_config_keys() {
  return {"scenario_name",      "scenario_n",          "scenario_d",
          "scenario_input_low", "scenario_input_high", "scenario_lengthscale",
          "scenario_noise_var", "scenario_coreg",      "scenario_prior_mean",
          "scenario_scheme",    "scenario_fraction",   "scenario_channels",
          "scenario_mag_low",   "scenario_mag_high",   "scenario_shift_low",
          "scenario_shift_high","scenario_focus_low",  "scenario_focus_high",
          "scenario_focus_value", "scenario_focus_out_sd", "scenario_md_channels",
          "scenario_md_low",    "scenario_md_high",    "scenario_base_low",
          "scenario_base_high", "scenario_hide_channel", "scenario_hide_low",
          "scenario_hide_high"};
}

ScenarioConfig scenario_from_config(const KeyValueConfig& cfg) {
  ScenarioConfig sc;
  sc.name = cfg.get_string("scenario_name", "custom");
  sc.n = cfg.get_int("scenario_n", 100);
  sc.d = cfg.get_int("scenario_d", 1);
  sc.input_low = cfg.get_double("scenario_input_low", -5.0);
  sc.input_high = cfg.get_double("scenario_input_high", 5.0);

  Matrix b = cfg.get_matrix("scenario_coreg");
  if (b.size() == 0) {
    b = Matrix::Identity(1, 1);
  }
  if (b.rows() != b.cols()) throw ConfigError("scenario_coreg must be square");
  Eigen::LLT<Matrix> llt(b);
  if (llt.info() != Eigen::Success)
    throw ConfigError("scenario_coreg must be positive definite");

  IcmParams p;
  p.lengthscale = cfg.get_double("scenario_lengthscale", 1.0);
  p.chol_coreg = llt.matrixL();
  p.noise_std = Vector::Constant(b.rows(),
                                 std::sqrt(cfg.get_double("scenario_noise_var", 0.1)));
  const std::string pm = cfg.get_string("scenario_prior_mean", "0");
  p.prior_mean = pm == "empirical" ? PriorMean::empirical()
                                   : PriorMean::constant(to_double("scenario_prior_mean", pm));
  sc.gen_params = p;

  const std::string scheme = cfg.get_string("scenario_scheme", "none");
  auto& c = sc.contamination;
  if (scheme == "none") c.scheme = ContaminationConfig::Scheme::None;
  else if (scheme == "uniform") c.scheme = ContaminationConfig::Scheme::Uniform;
  else if (scheme == "asymmetric") c.scheme = ContaminationConfig::Scheme::Asymmetric;
  else if (scheme == "focused") c.scheme = ContaminationConfig::Scheme::Focused;
  else if (scheme == "interval-shift") c.scheme = ContaminationConfig::Scheme::IntervalShift;
  else if (scheme == "mahalanobis") c.scheme = ContaminationConfig::Scheme::Mahalanobis;
  else throw ConfigError("unknown scenario_scheme '" + scheme + "'");

  c.fraction = cfg.get_double("scenario_fraction", 0.0);
  if (cfg.has("scenario_channels")) {
    c.channels.clear();
    for (double v_raw : cfg.get_vector("scenario_channels"))
      c.channels.push_back(static_cast<Index>(v_raw) - 1);  // 1-based in the file
  }
  c.mag_low = cfg.get_double("scenario_mag_low", 6.0);
  c.mag_high = cfg.get_double("scenario_mag_high", 9.0);
  c.shift_low = cfg.get_double("scenario_shift_low", 2.0);
  c.shift_high = cfg.get_double("scenario_shift_high", 3.0);
  if (c.scheme == ContaminationConfig::Scheme::IntervalShift &&
      p.prior_mean.kind == PriorMean::Kind::Constant)
    c.ref_means = Vector::Constant(b.rows(), p.prior_mean.values.size() > 0
                                                 ? p.prior_mean.values[0]
                                                 : p.prior_mean.value);
  if (cfg.has("scenario_focus_low") || cfg.has("scenario_focus_high")) {
    c.focus_has_interval = true;
    c.focus_low = cfg.get_double("scenario_focus_low", 0.0);
    c.focus_high = cfg.get_double("scenario_focus_high", 0.0);
  }
  c.focus_value = cfg.get_double("scenario_focus_value", 6.0);
  c.focus_out_sd = cfg.get_double("scenario_focus_out_sd", 0.0);
  c.md_channels = cfg.get_int("scenario_md_channels", 0);
  c.md_low = cfg.get_double("scenario_md_low", 10.0);
  c.md_high = cfg.get_double("scenario_md_high", 15.0);
  c.base_low = cfg.get_double("scenario_base_low", 0.5);
  c.base_high = cfg.get_double("scenario_base_high", 1.5);
  if (c.scheme == ContaminationConfig::Scheme::Mahalanobis) c.coreg_for_md = b;

  sc.hide_channel = cfg.get_int("scenario_hide_channel", 0) - 1;  // 1-based, 0 = none
  sc.hide_low = cfg.get_double("scenario_hide_low", 0.0);
  sc.hide_high = cfg.get_double("scenario_hide_high", 0.0);
  return sc;
}

}  // namespace morcgp
