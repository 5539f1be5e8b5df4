// Python module exposing the adapted-solution engine: path sampling, the
// Picard solver, the deterministic Volterra solver, and the risk-measure
// property checks. Heavy solves release the GIL; the deterministic Volterra
// entry points keep it because their kernels may be Python callables.

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstddef>

#include "bsvie/bvie.hpp"
#include "bsvie/errors.hpp"
#include "bsvie/generator.hpp"
#include "bsvie/grids.hpp"
#include "bsvie/parallel.hpp"
#include "bsvie/path_ensemble.hpp"
#include "bsvie/regression.hpp"
#include "bsvie/risk.hpp"
#include "bsvie/solver.hpp"
#include "bsvie/time_grid.hpp"

namespace py = pybind11;
using namespace bsvie;

namespace {

py::array_t<double> y_array(const MSolutionEstimate& est) {
    const int paths = est.y.paths();
    const int slices = est.y.slices();
    py::array_t<double> out({paths, slices});
    auto buf = out.mutable_unchecked<2>();
    for (int m = 0; m < paths; ++m)
        for (int i = 0; i < slices; ++i) buf(m, i) = est.y.value(m, i);
    return out;
}

py::array_t<double> z_array(const MSolutionEstimate& est) {
    const int paths = est.z.paths();
    const int rows = est.z.rows();
    const int cols = est.z.cols();
    const int dim = est.z.dim();
    py::array_t<double> out({paths, rows, cols, dim});
    auto buf = out.mutable_unchecked<4>();
    for (int m = 0; m < paths; ++m)
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j)
                for (int k = 0; k < dim; ++k) buf(m, i, j, k) = est.z.value(m, i, j, k);
    return out;
}

py::array_t<double> states_array(const PathEnsemble& ens) {
    py::array_t<double> out({ens.paths(), ens.steps() + 1, ens.dim()});
    auto buf = out.mutable_unchecked<3>();
    for (int m = 0; m < ens.paths(); ++m)
        for (int i = 0; i <= ens.steps(); ++i)
            for (int k = 0; k < ens.dim(); ++k) buf(m, i, k) = ens.state(m, i, k);
    return out;
}

py::array_t<double> increments_array(const PathEnsemble& ens) {
    py::array_t<double> out({ens.paths(), ens.steps(), ens.dim()});
    auto buf = out.mutable_unchecked<3>();
    for (int m = 0; m < ens.paths(); ++m)
        for (int i = 0; i < ens.steps(); ++i)
            for (int k = 0; k < ens.dim(); ++k) buf(m, i, k) = ens.increment(m, i, k);
    return out;
}

py::dict check_to_dict(const AxiomCheck& c) {
    py::dict d;
    d["axiom"] = c.axiom;
    d["pass"] = c.pass;
    d["statistic"] = c.statistic;
    d["tolerance"] = c.tolerance;
    d["detail"] = c.detail;
    return d;
}

py::dict translation_to_dict(const TranslationCheck& t) {
    py::dict d;
    d["check"] = check_to_dict(t.check);
    d["shift_curve"] = t.shift_curve;
    d["reference"] = t.reference;
    d["max_cross_path_rms"] = t.max_cross_path_rms;
    d["compared_to_kernel"] = t.compared_to_kernel;
    return d;
}

py::dict report_to_dict(const CoherenceReport& r) {
    py::dict d;
    d["generator_name"] = r.generator_name;
    py::list checks;
    for (const auto& c : r.checks) checks.append(check_to_dict(c));
    d["checks"] = checks;
    d["translation"] = translation_to_dict(r.translation);
    d["tolerance"] = r.tolerance;
    d["rmse_y"] = r.rmse_y;
    d["rmse_z"] = r.rmse_z;
    d["all_pass"] = r.all_pass;
    return d;
}

py::dict counterexample_to_dict(const CounterexampleReport& r) {
    py::dict d;
    d["mean"] = r.mean;
    d["variance"] = r.variance;
    d["standard_error"] = r.standard_error;
    d["mid_variance"] = r.mid_variance;
    d["mid_standard_error"] = r.mid_standard_error;
    d["random_at_mid"] = r.random_at_mid;
    d["certain_at_mid"] = r.certain_at_mid;
    d["z_proxy"] = r.z_proxy;
    d["claim_level"] = r.claim_level;
    d["solver"] = py::cast(r.solver);
    return d;
}

} // namespace

PYBIND11_MODULE(_bsvie, m) {
    m.doc() = "Adapted-solution engine for backward stochastic Volterra equations: "
              "Picard iteration with cross-sectional regression, a deterministic "
              "Volterra solver, and dynamic risk-measure property checks.";

    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ConfigError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        }
    });

    py::class_<TimeGrid>(m, "TimeGrid", "Uniform partition of [0, horizon] into `steps` steps.")
        .def(py::init<double, int>(), py::arg("horizon"), py::arg("steps"))
        .def_property_readonly("horizon", &TimeGrid::horizon)
        .def_property_readonly("steps", &TimeGrid::steps)
        .def_property_readonly("dt", &TimeGrid::dt)
        .def("time", &TimeGrid::time, py::arg("i"))
        .def("times", &TimeGrid::times)
        .def("__repr__", [](const TimeGrid& g) {
            return "TimeGrid(horizon=" + std::to_string(g.horizon()) +
                   ", steps=" + std::to_string(g.steps()) + ")";
        });

    py::class_<PathEnsemble>(m, "PathEnsemble",
                             "Immutable Brownian increments and states; regeneration with the "
                             "same (seed, paths, steps, dim) is bit-identical regardless of the "
                             "worker count.")
        .def_static("sample", &PathEnsemble::sample, py::arg("grid"), py::arg("paths"),
                    py::arg("dim"), py::arg("seed"),
                    py::call_guard<py::gil_scoped_release>())
        .def_property_readonly("grid", &PathEnsemble::grid,
                               py::return_value_policy::reference_internal)
        .def_property_readonly("paths", &PathEnsemble::paths)
        .def_property_readonly("dim", &PathEnsemble::dim)
        .def_property_readonly("steps", &PathEnsemble::steps)
        .def_property_readonly("seed", &PathEnsemble::seed)
        .def("state", &PathEnsemble::state, py::arg("m"), py::arg("i"), py::arg("k"))
        .def("increment", &PathEnsemble::increment, py::arg("m"), py::arg("i"), py::arg("k"))
        .def("states", &states_array, "States as an array of shape (paths, steps+1, dim).")
        .def("increments", &increments_array,
             "Increments as an array of shape (paths, steps, dim).");

    m.def("sample_paths", &sample_paths, py::arg("grid"), py::arg("paths"), py::arg("dim"),
          py::arg("seed"), py::call_guard<py::gil_scoped_release>());

    py::class_<BasisSpec>(m, "BasisSpec",
                          "Polynomial regression basis: monomials up to `degree`, ridge on the "
                          "non-constant coefficients.")
        .def(py::init([](int degree, double ridge) {
                 BasisSpec b;
                 b.degree = degree;
                 b.ridge = ridge;
                 return b;
             }),
             py::arg("degree") = 2, py::arg("ridge") = 1e-8)
        .def_readwrite("degree", &BasisSpec::degree)
        .def_readwrite("ridge", &BasisSpec::ridge);

    m.def("polynomial_basis_size", &polynomial_basis_size, py::arg("dim"), py::arg("degree"));

    py::class_<GeneratorSpec>(m, "GeneratorSpec",
                              "Driver g(t, s, y, z, state). Built-in forms only: custom drivers "
                              "live on the C++ side so solves can run without the GIL.")
        .def_static("zero", &GeneratorSpec::zero)
        .def_static("linear", &GeneratorSpec::linear, py::arg("l1"), py::arg("l2"))
        .def_static("kappa_abs_z", &GeneratorSpec::kappa_abs_z, py::arg("kappa"))
        .def_readonly("lipschitz_y", &GeneratorSpec::lipschitz_y)
        .def_readonly("lipschitz_z", &GeneratorSpec::lipschitz_z);

    m.def("sin_state_coefficient", &sin_state_coefficient,
          "Driver g = sin(sum_k W(s)[k]) * y with a genuinely random coefficient.");

    py::class_<TerminalSpec>(m, "TerminalSpec", "Terminal data psi(t, W(T)).")
        .def_static("constant", &TerminalSpec::constant, py::arg("c"))
        .def_static("linear_terminal", &TerminalSpec::linear_terminal, py::arg("a"), py::arg("b"))
        .def_static("call_on_w", &TerminalSpec::call_on_w, py::arg("strike"))
        .def_static("put_on_w", &TerminalSpec::put_on_w, py::arg("strike"))
        .def("negated", &TerminalSpec::negated)
        .def("shifted", &TerminalSpec::shifted, py::arg("delta"))
        .def("scaled", &TerminalSpec::scaled, py::arg("factor"))
        .def_static("sum", &TerminalSpec::sum, py::arg("x"), py::arg("y"));

    py::enum_<InitialIterate>(m, "InitialIterate")
        .value("Zero", InitialIterate::Zero)
        .value("TerminalPropagated", InitialIterate::TerminalPropagated);

    py::class_<PicardOptions>(m, "PicardOptions")
        .def(py::init<>())
        .def_readwrite("beta", &PicardOptions::beta)
        .def_readwrite("tol", &PicardOptions::tol)
        .def_readwrite("max_iter", &PicardOptions::max_iter)
        .def_readwrite("init", &PicardOptions::init)
        .def_readwrite("forced_iterations", &PicardOptions::forced_iterations)
        .def_readwrite("lipschitz_samples", &PicardOptions::lipschitz_samples);

    py::class_<LipschitzReport>(m, "LipschitzReport")
        .def_readonly("checked", &LipschitzReport::checked)
        .def_readonly("declared_y", &LipschitzReport::declared_y)
        .def_readonly("declared_z", &LipschitzReport::declared_z)
        .def_readonly("max_ratio_y", &LipschitzReport::max_ratio_y)
        .def_readonly("max_ratio_z", &LipschitzReport::max_ratio_z)
        .def_readonly("within_y", &LipschitzReport::within_y)
        .def_readonly("within_z", &LipschitzReport::within_z)
        .def_readonly("base_term_estimate", &LipschitzReport::base_term_estimate)
        .def_readonly("base_term_coarse", &LipschitzReport::base_term_coarse)
        .def_readonly("finite", &LipschitzReport::finite)
        .def_readonly("samples", &LipschitzReport::samples);

    py::class_<SolverReport>(m, "SolverReport")
        .def_readonly("iterations", &SolverReport::iterations)
        .def_readonly("successive_norms", &SolverReport::successive_norms)
        .def_readonly("contraction_ratios", &SolverReport::contraction_ratios)
        .def_readonly("beta_used", &SolverReport::beta_used)
        .def_readonly("converged", &SolverReport::converged)
        .def_readonly("lipschitz", &SolverReport::lipschitz);

    py::class_<MSolutionEstimate>(m, "MSolutionEstimate",
                                  "Adapted solution estimate: y has shape (paths, steps+1); z has "
                                  "shape (paths, steps+1, steps, dim) with rows j >= i holding the "
                                  "equation integrand of slice i and rows j < i its own increment "
                                  "loadings back to time 0.")
        .def_property_readonly("y", &y_array)
        .def_property_readonly("z", &z_array)
        .def_property_readonly("y0", [](const MSolutionEstimate& est) { return est.y.value(0, 0); })
        .def_property_readonly("grid",
                               [](const MSolutionEstimate& est) { return est.grid; })
        .def_property_readonly("report",
                               [](const MSolutionEstimate& est) { return est.report; });

    m.def("default_beta", &default_beta, py::arg("generator"));

    m.def("picard_solve", &picard_solve, py::arg("generator"), py::arg("terminal"),
          py::arg("ensemble"), py::arg("basis"), py::arg("options") = PicardOptions{},
          py::call_guard<py::gil_scoped_release>());

    m.def("m_condition_residuals", &m_condition_residuals, py::arg("estimate"),
          py::arg("ensemble"), py::call_guard<py::gil_scoped_release>());

    m.def(
        "martingale_calibration",
        [](const PathEnsemble& ens, const BasisSpec& basis) {
            CalibrationResult cal;
            {
                py::gil_scoped_release guard;
                cal = martingale_calibration(ens, basis);
            }
            py::dict d;
            d["rmse_y"] = cal.rmse_y;
            d["rmse_z"] = cal.rmse_z;
            return d;
        },
        py::arg("ensemble"), py::arg("basis"));

    m.def("check_lipschitz", &check_lipschitz, py::arg("generator"), py::arg("ensemble"),
          py::arg("sample_count") = 256, py::call_guard<py::gil_scoped_release>());

    // Deterministic Volterra solver: the kernel may be a Python callable, so
    // these run with the GIL held.
    py::class_<KernelSpec>(m, "KernelSpec", "Deterministic Volterra kernel l(t, s).")
        .def_static("constant", &KernelSpec::constant, py::arg("r"))
        .def_static("time_only", &KernelSpec::time_only, py::arg("r_of_s"))
        .def_static("general", &KernelSpec::general, py::arg("fn"));

    m.def("solve_bvie", &solve_bvie, py::arg("kernel"), py::arg("c"), py::arg("grid"),
          py::arg("tol") = 1e-12, py::arg("max_iter") = 200);

    m.def("closed_form_translation", &closed_form_translation, py::arg("r"), py::arg("c"),
          py::arg("t"), py::arg("horizon"), py::arg("steps") = 256);

    // Dynamic risk measures.
    py::class_<RiskGenerator>(m, "RiskGenerator",
                              "Driver of a dynamic risk measure rho(t; claim); structural flags "
                              "tell the property checks what the driver guarantees.")
        .def_static("linear_form", &RiskGenerator::linear_form, py::arg("l1"), py::arg("l2"))
        .def_static("rate_form", &RiskGenerator::rate_form, py::arg("r1"), py::arg("kappa"))
        .def_static("quadratic_form", &RiskGenerator::quadratic_form, py::arg("a"))
        .def_static("custom", &RiskGenerator::custom, py::arg("generator"), py::arg("name"))
        .def_readonly("name", &RiskGenerator::name)
        .def_readonly("linear", &RiskGenerator::linear)
        .def_readonly("y_coefficient_deterministic", &RiskGenerator::y_coefficient_deterministic);

    m.def("rho", &rho, py::arg("risk"), py::arg("claim"), py::arg("ensemble"), py::arg("basis"),
          py::arg("options") = PicardOptions{}, py::call_guard<py::gil_scoped_release>());

    m.def("default_axiom_tolerance", &default_axiom_tolerance, py::arg("ensemble"),
          py::arg("basis"), py::call_guard<py::gil_scoped_release>());

    py::class_<BatteryConfig>(m, "BatteryConfig")
        .def(py::init<>())
        .def_readwrite("claim_scale", &BatteryConfig::claim_scale)
        .def_readwrite("shift", &BatteryConfig::shift)
        .def_readwrite("lambda_", &BatteryConfig::lambda)
        .def_readwrite("forced_iterations", &BatteryConfig::forced_iterations)
        .def_readwrite("tolerance_multiplier", &BatteryConfig::tolerance_multiplier)
        .def_readwrite("tolerance_override", &BatteryConfig::tolerance_override)
        .def_readwrite("from_slice", &BatteryConfig::from_slice);

    m.def(
        "coherence_report",
        [](const RiskGenerator& risk, const PathEnsemble& ens, const BasisSpec& basis,
           const BatteryConfig& config) {
            CoherenceReport rep;
            {
                py::gil_scoped_release guard;
                rep = coherence_report(risk, ens, basis, config);
            }
            return report_to_dict(rep);
        },
        py::arg("risk"), py::arg("ensemble"), py::arg("basis"),
        py::arg("config") = BatteryConfig{},
        "Run the standard property battery; returns a dict with per-check results.");

    m.def(
        "check_translation",
        [](const RiskGenerator& risk, const TerminalSpec& claim, double shift,
           const PathEnsemble& ens, const BasisSpec& basis, double tolerance,
           const PicardOptions& options) {
            TranslationCheck tc;
            {
                py::gil_scoped_release guard;
                tc = check_translation(risk, claim, shift, ens, basis, tolerance, options);
            }
            return translation_to_dict(tc);
        },
        py::arg("risk"), py::arg("claim"), py::arg("shift"), py::arg("ensemble"), py::arg("basis"),
        py::arg("tolerance"), py::arg("options") = PicardOptions{});

    m.def(
        "sin_counterexample",
        [](double claim_level, const PathEnsemble& ens, const BasisSpec& basis,
           const PicardOptions& options) {
            CounterexampleReport rep;
            {
                py::gil_scoped_release guard;
                rep = sin_counterexample(claim_level, ens, basis, options);
            }
            return counterexample_to_dict(rep);
        },
        py::arg("claim_level"), py::arg("ensemble"), py::arg("basis"),
        py::arg("options") = PicardOptions{},
        "Risk of the sure claim under the sin-modulated driver; randomness flags at the middle "
        "slice.");

    m.def("set_thread_count", &parallel::set_thread_count, py::arg("count"));
    m.def("thread_count", &parallel::thread_count);
}
