#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "morcgp/csv_io.hpp"
#include "morcgp/experiments.hpp"
#include "morcgp/hyperopt.hpp"
#include "morcgp/inference.hpp"
#include "morcgp/kernel.hpp"
#include "morcgp/robust_cov.hpp"
#include "morcgp/rng.hpp"
#include "morcgp/weights.hpp"

namespace py = pybind11;
using namespace morcgp;

namespace {

MaskArray mask_from_py(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  return m.array() != 0.0;
}

Dataset make_dataset(const Matrix& inputs, const Matrix& outputs,
                     const py::object& mask) {
  Dataset ds;
  ds.inputs = inputs;
  ds.outputs = outputs;
  if (mask.is_none())
    ds.mask = MaskArray::Constant(outputs.rows(), outputs.cols(), true);
  else
    ds.mask = mask_from_py(mask.cast<Eigen::MatrixXd>());
  ds.validate();
  return ds;
}

PriorMean prior_mean_from_py(const py::object& spec) {
  if (spec.is_none()) return PriorMean::zero();
  if (py::isinstance<py::str>(spec)) {
    const auto s = spec.cast<std::string>();
    if (s == "empirical") return PriorMean::empirical();
    throw std::invalid_argument("prior_mean: expected 'empirical' or a number");
  }
  return PriorMean::constant(spec.cast<double>());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Exact outlier-robust multi-output Gaussian process regression";

  py::class_<Dataset>(m, "Dataset")
      .def(py::init(&make_dataset), py::arg("inputs"), py::arg("outputs"),
           py::arg("mask") = py::none())
      .def_readonly("inputs", &Dataset::inputs)
      .def_readonly("outputs", &Dataset::outputs)
      .def_property_readonly("mask",
                             [](const Dataset& d) { return Matrix(d.mask.cast<double>()); })
      .def_property_readonly("n", &Dataset::n)
      .def_property_readonly("t", &Dataset::t)
      .def_property_readonly("d", &Dataset::d);

  py::class_<IcmParams>(m, "IcmParams")
      .def(py::init([](double lengthscale, const Matrix& chol_coreg,
                       const Vector& noise_std, const py::object& prior_mean) {
             IcmParams p;
             p.lengthscale = lengthscale;
             p.chol_coreg = chol_coreg;
             p.noise_std = noise_std;
             p.prior_mean = prior_mean_from_py(prior_mean);
             p.validate();
             return p;
           }),
           py::arg("lengthscale"), py::arg("chol_coreg"), py::arg("noise_std"),
           py::arg("prior_mean") = py::none())
      .def_readonly("lengthscale", &IcmParams::lengthscale)
      .def_readonly("chol_coreg", &IcmParams::chol_coreg)
      .def_readonly("noise_std", &IcmParams::noise_std)
      .def("coreg", &IcmParams::coreg);

  py::enum_<WeightKind>(m, "WeightKind")
      .value("CONDITIONAL", WeightKind::Conditional)
      .value("PRIOR_MEAN", WeightKind::PriorMeanCenter)
      .value("CONSTANT", WeightKind::Constant);

  py::class_<WeightSpec>(m, "WeightSpec")
      .def(py::init([](WeightKind kind, const py::object& epsilon, const py::object& beta,
                       const py::object& center_cov) {
             WeightSpec spec;
             spec.kind = kind;
             if (!epsilon.is_none()) {
               if (py::isinstance<py::float_>(epsilon) || py::isinstance<py::int_>(epsilon))
                 spec.epsilon = Vector::Constant(1, epsilon.cast<double>());
               else
                 spec.epsilon = epsilon.cast<Vector>();
             }
             if (!beta.is_none()) spec.beta = beta.cast<Vector>();
             if (!center_cov.is_none()) spec.center_cov = center_cov.cast<Matrix>();
             return spec;
           }),
           py::arg("kind") = WeightKind::Conditional, py::arg("epsilon") = py::none(),
           py::arg("beta") = py::none(), py::arg("center_cov") = py::none())
      .def_readwrite("kind", &WeightSpec::kind)
      .def_readwrite("epsilon", &WeightSpec::epsilon)
      .def_readwrite("beta", &WeightSpec::beta)
      .def_readwrite("center_cov", &WeightSpec::center_cov)
      .def_static("constant", &WeightSpec::constant);

  py::class_<WeightState>(m, "WeightState")
      .def_readonly("weights", &WeightState::weights)
      .def_readonly("centers", &WeightState::centers)
      .def_readonly("shrinkage", &WeightState::shrinkage)
      .def_readonly("scales", &WeightState::scales)
      .def_readonly("beta", &WeightState::beta);

  py::class_<Predictive>(m, "Predictive")
      .def_readonly("mean", &Predictive::mean)
      .def_readonly("cov", &Predictive::cov)
      .def_readonly("includes_noise", &Predictive::includes_noise);

  py::class_<FittedState>(m, "FittedState")
      .def(py::init<const Dataset&, const IcmParams&, const WeightState&>())
      .def("predict", &FittedState::predict, py::arg("x_star"),
           py::arg("include_noise") = false);

  m.def("sq_exp", &sq_exp, py::arg("x"), py::arg("x2"), py::arg("lengthscale"));
  m.def("block_gram", &block_gram);
  m.def("build_weight_state", &build_weight_state, py::arg("data"), py::arg("params"),
        py::arg("spec"));
  m.def("mogp_predict", &mogp_predict, py::arg("data"), py::arg("params"),
        py::arg("x_star"), py::arg("include_noise") = false);
  m.def("morcgp_predict", &morcgp_predict, py::arg("state"), py::arg("x_star"),
        py::arg("include_noise") = false);
  m.def("kl_gaussian", &kl_gaussian);
  m.def("rmse", &rmse, py::arg("pred"), py::arg("truth"), py::arg("mask"),
        py::arg("paper_literal") = false);
  m.def(
      "fast_mcd",
      [](const Matrix& y, Index h, int n_starts, std::uint64_t seed) {
        const RobustEstimate est = fast_mcd(y, h, n_starts, Rng(seed));
        return py::make_tuple(est.location, est.scatter, est.support, est.determinant);
      },
      py::arg("y"), py::arg("h"), py::arg("n_starts") = 50, py::arg("seed") = 0,
      "Returns (location, scatter, support, raw_determinant)");

  py::enum_<FitMethod>(m, "FitMethod")
      .value("MOGP_ML", FitMethod::MogpMl)
      .value("MORCGP_WLOO", FitMethod::MorcgpWloo);

  py::class_<OptimizerConfig>(m, "OptimizerConfig")
      .def(py::init<>())
      .def_readwrite("max_iters", &OptimizerConfig::max_iters)
      .def_readwrite("tol_obj", &OptimizerConfig::tol_obj)
      .def_readwrite("tol_grad", &OptimizerConfig::tol_grad)
      .def_readwrite("fd_step", &OptimizerConfig::fd_step)
      .def_readwrite("max_restarts", &OptimizerConfig::max_restarts)
      .def_readwrite("noise_var_cap", &OptimizerConfig::noise_var_cap)
      .def_readwrite("beta_tracks_sigma", &OptimizerConfig::beta_tracks_sigma)
      .def_readwrite("mcd_starts", &OptimizerConfig::mcd_starts)
      .def_readwrite("mcd_h_frac", &OptimizerConfig::mcd_h_frac);

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("params", &FitResult::params)
      .def_readonly("weights", &FitResult::weights)
      .def_property_readonly("objective",
                             [](const FitResult& r) { return r.diagnostics.objective; })
      .def_property_readonly("iterations",
                             [](const FitResult& r) { return r.diagnostics.iterations; });

  m.def(
      "fit",
      [](const Dataset& data, const WeightSpec& spec, FitMethod method,
         const OptimizerConfig& config, std::uint64_t seed, const py::object& prior_mean) {
        const Rng rng(seed);
        const PriorMean pm = prior_mean_from_py(prior_mean);
        const IcmParams init = default_init(data, pm, config, rng.split(0));
        return fit(data, init, spec, method, config, rng.split(1));
      },
      py::arg("data"), py::arg("spec"), py::arg("method") = FitMethod::MorcgpWloo,
      py::arg("config") = OptimizerConfig(), py::arg("seed") = 0,
      py::arg("prior_mean") = py::none());

  m.def(
      "simulate_preset",
      [](const std::string& name, std::uint64_t seed) {
        const ScenarioConfig sc = builtin_scenario(name);
        Rng rng(seed);
        Rng gen = rng.split(0);
        const SimulatedData sim = sample_icm(sc, gen);
        Rng cont_rng = rng.split(1);
        const ContaminatedData cont = contaminate(sim.data, sc.contamination, cont_rng);
        return py::make_tuple(cont.data, sim.latent, cont.outliers);
      },
      py::arg("name"), py::arg("seed") = 0,
      "Returns (contaminated dataset, latent truth, outlier (row, channel) list)");

  m.def(
      "pif_curve",
      [](const Dataset& data, const IcmParams& params, const WeightSpec& spec, Index obs,
         Index channel, const Vector& magnitudes) {
        const PifCurve c = pif_curve(data, params, spec, obs, channel, magnitudes);
        return py::make_tuple(c.magnitudes, c.kl);
      },
      py::arg("data"), py::arg("params"), py::arg("spec"), py::arg("obs"),
      py::arg("channel"), py::arg("magnitudes"));

  m.def("load_csv", &load_csv);
  m.def("save_csv", &save_csv);
}
