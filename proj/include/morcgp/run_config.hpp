#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "morcgp/experiments.hpp"
#include "morcgp/types.hpp"

namespace morcgp {

/// Key-value run configuration: `key = value` lines, '#' comments, blank
/// lines ignored. Unknown keys are rejected by name once the consumer
/// declares its schema.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;
  static KeyValueConfig from_file(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key) const;  // comma-separated
  Vector get_vector(const std::string& key) const;
  Matrix get_matrix(const std::string& key) const;  // rows split by ';'

  /// Throws ConfigError naming the first key outside `allowed`.
  void require_known(const std::set<std::string>& allowed) const;

 private:
  std::map<std::string, std::string> values_;
};

/// Scenario description from config keys (prefix `scenario_`), e.g.
/// scenario_name, scenario_n, scenario_coreg = "1,.9;.9,1", scenario_scheme.
ScenarioConfig scenario_from_config(const KeyValueConfig& config);

/// Keys understood by scenario_from_config (already prefixed).
std::set<std::string> scenario_config_keys();

}  // namespace morcgp
