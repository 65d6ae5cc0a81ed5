// SPDX-License-Identifier: Apache-2.0
//
// Python module exposing the core operations: channel synthesis, pilot
// assembly, the message-passing estimators, the pattern optimizer, and the
// experiment harness. RNG-consuming entry points take integer seeds.

#include <optional>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "xlce/bench.hpp"

namespace py = pybind11;
using namespace xlce;

namespace {

std::vector<CMat> py_realize_channels(const SceneConfig& scene_cfg,
                                      const SystemConfig& sys, std::uint64_t seed,
                                      bool frequency) {
  sys.validate();
  const DftOperators ops = DftOperators::make(sys);
  Rng rng(seed);
  ChannelRealization ch = realize_channels(scene_cfg, sys, ops, rng);
  return frequency ? std::move(ch.h) : std::move(ch.x);
}

PilotAllocation py_assemble(const std::string& scheme, const IMat& selection,
                            const std::vector<std::vector<int>>& groups,
                            const SystemConfig& sys, std::uint64_t seed) {
  Rng rng(seed);
  return assemble_pilots(scheme_from_name(scheme), selection, groups, sys, rng);
}

EstimatorResult py_run_turbo(const std::vector<CMat>& y,
                             const PilotAllocation& alloc, const SystemConfig& sys,
                             const EstimatorConfig& cfg,
                             const std::optional<std::vector<CMat>>& truth) {
  const DftOperators ops = DftOperators::make(sys);
  return run_turbo_mrf(y, alloc, ops, sys, cfg,
                       HyperParams::defaults(sys.n_users, sys.n_taps, sys.n_subarrays),
                       truth ? &*truth : nullptr);
}

EstimatorResult py_run_vamp(const std::vector<CMat>& y, const PilotAllocation& alloc,
                            const SystemConfig& sys, const BaselineConfig& cfg,
                            const std::optional<std::vector<CMat>>& truth) {
  const DftOperators ops = DftOperators::make(sys);
  return vamp_bg_estimate(y, alloc, ops, sys, cfg, truth ? &*truth : nullptr);
}

py::dict py_optimize(const PilotAllocation& alloc, const SystemConfig& sys,
                     OptimizerConfig cfg) {
  const DftOperators ops = DftOperators::make(sys);
  if (cfg.noise_var <= 0) cfg.noise_var = sys.noise_var();
  OptimizeTrace trace;
  const IMat sel = optimize_pattern(
      uniform_relaxed_init(sys.n_subcarriers, static_cast<int>(alloc.groups.size())),
      alloc.groups, ops, alloc.pilot_power, cfg, &trace);
  py::dict out;
  out["selection"] = sel;
  out["objective"] = trace.objective;
  out["final_objective"] = trace.final_objective;
  out["rounded_objective"] = trace.rounded_objective;
  return out;
}

py::dict py_run_experiment(const std::string& spec_json) {
  const ExperimentSpec spec = spec_from_json(spec_json);
  const auto records = run_experiment(spec);
  py::dict out;
  out["records_csv"] = records_to_csv(records);
  out["aggregate_csv"] = aggregate_csv(records);
  out["cdf_csv"] = cdf_csv(records);
  return out;
}

}  // namespace

PYBIND11_MODULE(_xlce, m) {
  m.doc() = "sub-array XL-MIMO uplink channel estimation";

  py::class_<SystemConfig>(m, "SystemConfig")
      .def(py::init<>())
      .def_readwrite("n_subcarriers", &SystemConfig::n_subcarriers)
      .def_readwrite("n_taps", &SystemConfig::n_taps)
      .def_readwrite("n_subarrays", &SystemConfig::n_subarrays)
      .def_readwrite("subarray_size", &SystemConfig::subarray_size)
      .def_readwrite("n_users", &SystemConfig::n_users)
      .def_readwrite("n_groups", &SystemConfig::n_groups)
      .def_readwrite("snr_db", &SystemConfig::snr_db)
      .def_readwrite("pilot_power", &SystemConfig::pilot_power)
      .def("antennas", &SystemConfig::antennas)
      .def("noise_var", &SystemConfig::noise_var)
      .def("validate", &SystemConfig::validate);

  py::class_<SceneConfig>(m, "SceneConfig")
      .def(py::init<>())
      .def_readwrite("clusters_per_user", &SceneConfig::clusters_per_user)
      .def_readwrite("common_fraction", &SceneConfig::common_fraction)
      .def_readwrite("rays_per_cluster", &SceneConfig::rays_per_cluster)
      .def_readwrite("cluster_delay_spread", &SceneConfig::cluster_delay_spread)
      .def_readwrite("visibility_min_frac", &SceneConfig::visibility_min_frac)
      .def_readwrite("visibility_max_frac", &SceneConfig::visibility_max_frac)
      .def_readwrite("line_of_sight", &SceneConfig::line_of_sight);

  py::class_<EstimatorConfig>(m, "EstimatorConfig")
      .def(py::init<>())
      .def_readwrite("i_max", &EstimatorConfig::i_max)
      .def_readwrite("i_mrf", &EstimatorConfig::i_mrf)
      .def_readwrite("damping", &EstimatorConfig::damping)
      .def_readwrite("em_w_period", &EstimatorConfig::em_w_period)
      .def_readwrite("variance_floor", &EstimatorConfig::variance_floor)
      .def_readwrite("em_enabled", &EstimatorConfig::em_enabled)
      .def_readwrite("em_w_step_scale", &EstimatorConfig::em_w_step_scale)
      .def_readwrite("init_prior_variance", &EstimatorConfig::init_prior_variance)
      .def_readwrite("conv_tol", &EstimatorConfig::conv_tol);

  py::class_<BaselineConfig>(m, "BaselineConfig")
      .def(py::init<>())
      .def_readwrite("i_max", &BaselineConfig::i_max)
      .def_readwrite("bg_rate_init", &BaselineConfig::bg_rate_init)
      .def_readwrite("bg_var_init", &BaselineConfig::bg_var_init)
      .def_readwrite("em_enabled", &BaselineConfig::em_enabled)
      .def_readwrite("omp_budget", &BaselineConfig::omp_budget)
      .def_readwrite("omp_threshold_scale", &BaselineConfig::omp_threshold_scale);

  py::class_<OptimizerConfig>(m, "OptimizerConfig")
      .def(py::init<>())
      .def_readwrite("prior_var", &OptimizerConfig::prior_var)
      .def_readwrite("noise_var", &OptimizerConfig::noise_var)
      .def_readwrite("learning_rate", &OptimizerConfig::learning_rate)
      .def_readwrite("steps", &OptimizerConfig::steps)
      .def_readwrite("round_threshold", &OptimizerConfig::round_threshold);

  py::class_<PilotGroup>(m, "PilotGroup")
      .def_readonly("users", &PilotGroup::users)
      .def_readonly("subcarriers", &PilotGroup::subcarriers)
      .def_readonly("shifts", &PilotGroup::shifts)
      .def_readonly("symbol", &PilotGroup::symbol);

  py::class_<PilotAllocation>(m, "PilotAllocation")
      .def_readonly("n_subcarriers", &PilotAllocation::n_subcarriers)
      .def_readonly("n_symbols", &PilotAllocation::n_symbols)
      .def_readonly("pilot_power", &PilotAllocation::pilot_power)
      .def_readonly("selection", &PilotAllocation::selection)
      .def_readonly("groups", &PilotAllocation::groups)
      .def_readonly("u", &PilotAllocation::u)
      .def_readonly("group_of_user", &PilotAllocation::group_of_user)
      .def("validate", &PilotAllocation::validate)
      .def("to_json", [](const PilotAllocation& a) { return allocation_to_json(a); })
      .def_static("from_json",
                  [](const std::string& t) { return allocation_from_json(t); });

  py::class_<IterationStats>(m, "IterationStats")
      .def_readonly("nmse", &IterationStats::nmse)
      .def_readonly("residual", &IterationStats::residual)
      .def_readonly("mean_change", &IterationStats::mean_change)
      .def_readonly("clamp_flags", &IterationStats::clamp_flags);

  py::class_<EstimatorDiagnostics>(m, "EstimatorDiagnostics")
      .def_readonly("iterations", &EstimatorDiagnostics::iterations)
      .def_readonly("iterations_to_converge",
                    &EstimatorDiagnostics::iterations_to_converge)
      .def_readonly("total_clamp_flags", &EstimatorDiagnostics::total_clamp_flags);

  py::class_<EstimatorResult>(m, "EstimatorResult")
      .def_readonly("h_hat", &EstimatorResult::h_hat)
      .def_readonly("x_hat", &EstimatorResult::x_hat)
      .def_readonly("diag", &EstimatorResult::diag);

  m.def("derive_seed", &derive_seed, py::arg("parent"), py::arg("stream"));
  m.def("realize_channels", &py_realize_channels, py::arg("scene"), py::arg("system"),
        py::arg("seed"), py::arg("frequency") = true,
        "Draw one multi-user channel; returns per-user matrices (N x M "
        "frequency response, or L x M taps with frequency=False).");
  m.def("group_users", &group_users, py::arg("positions"), py::arg("n_groups"));
  m.def("periodic_selection", &periodic_selection, py::arg("n"), py::arg("g"));
  m.def("run_interleaved_selection", &run_interleaved_selection, py::arg("n"),
        py::arg("groups"));
  m.def("thinned_selection", &thinned_selection, py::arg("n"), py::arg("groups"),
        py::arg("ratio"));
  m.def("assemble_pilots", &py_assemble, py::arg("scheme"), py::arg("selection"),
        py::arg("groups"), py::arg("system"), py::arg("seed") = 0);
  m.def("run_turbo_mrf", &py_run_turbo, py::arg("y"), py::arg("alloc"),
        py::arg("system"), py::arg("config") = EstimatorConfig{},
        py::arg("truth") = py::none());
  m.def("vamp_bg", &py_run_vamp, py::arg("y"), py::arg("alloc"), py::arg("system"),
        py::arg("config") = BaselineConfig{}, py::arg("truth") = py::none());
  m.def(
      "lmmse",
      [](const std::vector<CMat>& y, const PilotAllocation& alloc,
         const SystemConfig& sys) {
        return lmmse_estimate(y, alloc, DftOperators::make(sys), sys);
      },
      py::arg("y"), py::arg("alloc"), py::arg("system"));
  m.def(
      "lmmse_genie",
      [](const std::vector<CMat>& y, const PilotAllocation& alloc,
         const SystemConfig& sys, const std::vector<CMat>& x_true) {
        return lmmse_genie_estimate(y, alloc, DftOperators::make(sys), sys, x_true);
      },
      py::arg("y"), py::arg("alloc"), py::arg("system"), py::arg("x_true"));
  m.def(
      "omp",
      [](const std::vector<CMat>& y, const PilotAllocation& alloc,
         const SystemConfig& sys, const BaselineConfig& cfg) {
        return omp_estimate(y, alloc, DftOperators::make(sys), sys, cfg);
      },
      py::arg("y"), py::arg("alloc"), py::arg("system"),
      py::arg("config") = BaselineConfig{});
  m.def("optimize_pilots", &py_optimize, py::arg("alloc"), py::arg("system"),
        py::arg("config") = OptimizerConfig{},
        "Gradient-based pattern design; returns dict with the rounded "
        "selection and the objective trace.");
  m.def(
      "cir_to_frequency",
      [](const CMat& x, const SystemConfig& sys) {
        return cir_to_frequency(DftOperators::make(sys), x);
      },
      py::arg("x"), py::arg("system"));
  m.def(
      "frequency_to_cir",
      [](const CMat& h, const SystemConfig& sys) {
        return frequency_to_cir(DftOperators::make(sys), h);
      },
      py::arg("h"), py::arg("system"));
  m.def("nmse",
        py::overload_cast<const std::vector<CMat>&, const std::vector<CMat>&>(&nmse),
        py::arg("est"), py::arg("truth"));
  m.def("median_db", &median_db, py::arg("values"));
  m.def("run_experiment", &py_run_experiment, py::arg("spec_json"),
        "Run a full sweep from a JSON spec; returns CSV text blobs.");
  m.def("default_spec_json",
        [] { return spec_to_json(ExperimentSpec{}); });
}
