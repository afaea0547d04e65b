#pragma once

#include <string>
#include <utility>
#include <vector>

#include "morcgp/experiments.hpp"
#include "morcgp/hyperopt.hpp"
#include "morcgp/types.hpp"
#include "morcgp/weights.hpp"

namespace morcgp {

/// Full-precision decimal rendering that round-trips a double exactly.
std::string format_double(double v);

/// Reads a dataset CSV with header x_1..x_d, y_1..y_T. Empty y-cells mark
/// unobserved entries (heterotopic data). Throws ParseError with a 1-based
/// line number on ragged rows, non-numeric cells or a row with no observed
/// output.
Dataset load_csv(const std::string& path);

/// Inverse of load_csv: masked entries are written as empty cells.
void save_csv(const std::string& path, const Dataset& data);

/// N x T value table with header <prefix>_1..<prefix>_T next to the inputs
/// (used for latent-truth and prediction files).
void save_table_csv(const std::string& path, const Matrix& inputs, const Matrix& values,
                    const std::string& prefix);

/// Predictions CSV: x_1..x_d, mean_1..mean_T, var_1..var_T.
void save_predictions_csv(const std::string& path, const Matrix& inputs,
                          const Matrix& mean, const Matrix& var);

/// 1-based (row, channel) outlier index pairs.
void save_outliers_csv(const std::string& path,
                       const std::vector<std::pair<Index, Index>>& outliers);

void save_pif_csv(const std::string& path, const PifCurve& curve);

/// scenario, method, seed, rmse, nlpd, fit_seconds, n_failures. Wall-clock
/// is zeroed unless `with_timings` is set so that seeded runs stay
/// byte-reproducible.
void save_benchmark_csv(const std::string& path, const std::vector<BenchmarkRow>& rows,
                        bool with_timings);
void save_benchmark_json(const std::string& path, const std::vector<BenchmarkRow>& rows,
                         const BenchmarkConfig& config, bool with_timings);

/// Fitted-parameters JSON: lengthscale, noise, B (matrix and factor), prior
/// mean, the weight spec actually used and fit diagnostics. Round-trips into
/// predict with no re-fitting.
void save_params_json(const std::string& path, const FitResult& result);
std::pair<IcmParams, WeightSpec> load_params_json(const std::string& path);

}  // namespace morcgp
