#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qwsense/estimation.hpp"
#include "qwsense/fisher.hpp"
#include "qwsense/gbz.hpp"
#include "qwsense/noise.hpp"
#include "qwsense/runner.hpp"
#include "qwsense/spectral.hpp"
#include "qwsense/walk.hpp"

namespace py = pybind11;
using namespace qwsense;

PYBIND11_MODULE(_qwsense, m) {
    m.doc() = "Non-unitary quantum walk sensing toolkit";
    m.attr("__version__") = tool_version;

    py::register_exception<degeneracy_error>(m, "DegeneracyError", PyExc_RuntimeError);
    py::register_exception<convergence_error>(m, "ConvergenceError", PyExc_RuntimeError);
    py::register_exception<tracking_error>(m, "TrackingError", PyExc_RuntimeError);

    py::enum_<Boundary>(m, "Boundary")
        .value("OBC", Boundary::OBC)
        .value("CBC", Boundary::CBC);
    py::enum_<Coin>(m, "Coin")
        .value("H", Coin::H)
        .value("V", Coin::V)
        .value("H_MINUS_V", Coin::HminusV)
        .value("H_PLUS_V", Coin::HplusV);
    py::enum_<Region>(m, "Region").value("LEFT", Region::Left).value("RIGHT", Region::Right);
    py::enum_<ThetaParam>(m, "ThetaParam")
        .value("THETA1_LEFT", ThetaParam::Theta1L)
        .value("THETA2_LEFT", ThetaParam::Theta2L)
        .value("THETA1_RIGHT", ThetaParam::Theta1R)
        .value("THETA2_RIGHT", ThetaParam::Theta2R)
        .value("LOCKED_PAIR", ThetaParam::LockedPair);
    py::enum_<DerivativeScheme>(m, "DerivativeScheme")
        .value("FORWARD_PAPER", DerivativeScheme::ForwardPaper)
        .value("CONVERGED", DerivativeScheme::Converged);
    py::enum_<ProbeKind>(m, "ProbeKind")
        .value("TRANSIENT", ProbeKind::Transient)
        .value("STEADY_STATE", ProbeKind::SteadyStateProbe);
    py::enum_<JitterMode>(m, "JitterMode")
        .value("STATIC_PER_RUN", JitterMode::StaticPerRun)
        .value("PER_STEP", JitterMode::PerStep);

    py::class_<WalkConfig>(m, "WalkConfig")
        .def(py::init([](int half_size, Boundary boundary, double theta1_left, double theta2_left,
                         double theta1_right, double theta2_right, double gamma) {
                 WalkConfig c{half_size, boundary, theta1_left, theta2_left,
                              theta1_right, theta2_right, gamma};
                 c.validate();
                 return c;
             }),
             py::arg("half_size"), py::arg("boundary") = Boundary::OBC,
             py::arg("theta1_left") = 0.0, py::arg("theta2_left") = 0.0,
             py::arg("theta1_right") = 0.0, py::arg("theta2_right") = 0.0,
             py::arg("gamma") = 0.0)
        .def_readwrite("half_size", &WalkConfig::half_size)
        .def_readwrite("boundary", &WalkConfig::boundary)
        .def_readwrite("theta1_left", &WalkConfig::theta1_left)
        .def_readwrite("theta2_left", &WalkConfig::theta2_left)
        .def_readwrite("theta1_right", &WalkConfig::theta1_right)
        .def_readwrite("theta2_right", &WalkConfig::theta2_right)
        .def_readwrite("gamma", &WalkConfig::gamma)
        .def_property_readonly("sites", &WalkConfig::sites)
        .def_property_readonly("dim", &WalkConfig::dim);

    py::class_<WalkerState>(m, "WalkerState")
        .def_readonly("amplitudes", &WalkerState::amplitudes)
        .def_readonly("log_norm", &WalkerState::log_norm);

    py::class_<StepOperator>(m, "StepOperator")
        .def_readonly("matrix", &StepOperator::matrix)
        .def_readonly("config", &StepOperator::config);

    m.def("build_step_operator", &build_step_operator, py::arg("config"));
    m.def("initial_state", &initial_state, py::arg("config"), py::arg("coin"));
    m.def("evolve", &evolve, py::arg("state"), py::arg("op"), py::arg("steps"));
    m.def("position_distribution", &position_distribution, py::arg("state"));
    m.def("loss_strength_from_reflectivity", &loss_strength_from_reflectivity, py::arg("p"));
    m.def("step_budget", &step_budget, py::arg("n_photons_initial"), py::arg("im_E_max"),
          py::arg("gamma"));

    py::class_<SpectrumResult>(m, "SpectrumResult")
        .def_readonly("eigenvalues", &SpectrumResult::eigenvalues)
        .def_readonly("quasi_energies", &SpectrumResult::quasi_energies)
        .def_readonly("right_eigenvectors", &SpectrumResult::right_eigenvectors);
    py::class_<SteadyState>(m, "SteadyState")
        .def_readonly("eigenvalue", &SteadyState::eigenvalue)
        .def_readonly("eigenvector", &SteadyState::eigenvector)
        .def_readonly("index", &SteadyState::index)
        .def_readonly("conjugate_pair", &SteadyState::conjugate_pair);
    py::class_<LineSpec>(m, "LineSpec")
        .def(py::init([](cx point, cx direction) { return LineSpec{point, direction}; }),
             py::arg("point") = cx(0, 0), py::arg("direction") = cx(0, 1))
        .def_readwrite("point", &LineSpec::point)
        .def_readwrite("direction", &LineSpec::direction);
    py::class_<GapReport>(m, "GapReport")
        .def_readonly("winding", &GapReport::winding)
        .def_readonly("loop_area", &GapReport::loop_area)
        .def_readonly("min_line_distance", &GapReport::min_line_distance)
        .def_readonly("both_sides", &GapReport::both_sides)
        .def_readonly("is_closed", &GapReport::is_closed)
        .def_readonly("authoritative", &GapReport::authoritative);
    py::class_<BlochLoops>(m, "BlochLoops")
        .def_readonly("momenta", &BlochLoops::momenta)
        .def_readonly("bands", &BlochLoops::bands);
    py::class_<LocalizationProfile>(m, "LocalizationProfile")
        .def_readonly("site_population", &LocalizationProfile::site_population)
        .def_readonly("participation_ratio", &LocalizationProfile::participation_ratio);

    m.def("full_spectrum", &full_spectrum, py::arg("op"));
    m.def("steady_state", &steady_state, py::arg("spectrum"));
    m.def("bloch_operator", &bloch_operator, py::arg("config"), py::arg("k"));
    m.def("bloch_loops", &bloch_loops, py::arg("config"), py::arg("num_points") = 512);
    m.def("point_gap_metric", &point_gap_metric, py::arg("loop"), py::arg("reference"),
          py::arg("tolerance_area") = 1e-4);
    m.def("point_gap_from_spectrum", &point_gap_from_spectrum, py::arg("spectrum"),
          py::arg("reference"), py::arg("tolerance_area") = 1e-4);
    m.def("line_gap_metric", &line_gap_metric, py::arg("spectrum"), py::arg("line"),
          py::arg("tolerance") = 1e-3);
    m.def("skin_localization", &skin_localization, py::arg("spectrum"));
    m.def("homogeneous_critical_angle", &homogeneous_critical_angle, py::arg("theta1"));

    py::class_<TransferBlocks>(m, "TransferBlocks")
        .def_readonly("c_minus", &TransferBlocks::c_minus)
        .def_readonly("c_plus", &TransferBlocks::c_plus);
    py::class_<ZetaResult>(m, "ZetaResult")
        .def_readonly("case_id", &ZetaResult::case_id)
        .def_readonly("value", &ZetaResult::value)
        .def_readonly("multiple_guards", &ZetaResult::multiple_guards);
    py::class_<GbzSolution>(m, "GbzSolution")
        .def_readonly("lam", &GbzSolution::lambda)
        .def_readonly("beta", &GbzSolution::beta)
        .def_readonly("beta_sm", &GbzSolution::beta_sm)
        .def_readonly("zeta_case", &GbzSolution::zeta_case)
        .def_readonly("zeta_value", &GbzSolution::zeta_value);
    py::class_<GbzResult>(m, "GbzResult")
        .def_readonly("solutions", &GbzResult::solutions)
        .def_readonly("unconverged_seeds", &GbzResult::unconverged_seeds);

    m.def("transfer_blocks", &transfer_blocks, py::arg("config"), py::arg("region"));
    m.def("beta_roots", &beta_roots, py::arg("blocks"), py::arg("lam"));
    m.def("zeta", &zeta, py::arg("beta1_left"), py::arg("beta2_left"), py::arg("beta1_right"),
          py::arg("beta2_right"));
    m.def("solve_gbz", &solve_gbz, py::arg("config"), py::arg("lambda_seeds") = std::vector<cx>{});
    m.def("boundary_matrix", &boundary_matrix, py::arg("config"), py::arg("lam"));

    py::class_<ProbeSpec>(m, "ProbeSpec")
        .def(py::init([](ProbeKind kind, int steps, Coin coin) {
                 return ProbeSpec{kind, steps, coin};
             }),
             py::arg("kind") = ProbeKind::Transient, py::arg("transient_steps") = 0,
             py::arg("initial_coin") = Coin::V)
        .def_readwrite("kind", &ProbeSpec::kind)
        .def_readwrite("transient_steps", &ProbeSpec::transient_steps)
        .def_readwrite("initial_coin", &ProbeSpec::initial_coin);
    py::class_<StateDerivative>(m, "StateDerivative")
        .def_readonly("state", &StateDerivative::state)
        .def_readonly("dstate", &StateDerivative::dstate)
        .def_readonly("h_used", &StateDerivative::h_used)
        .def_readonly("qfi", &StateDerivative::qfi)
        .def_readonly("truncation_estimate", &StateDerivative::truncation_estimate);
    py::class_<FisherSweep>(m, "FisherSweep")
        .def_readonly("theta_grid", &FisherSweep::theta_grid)
        .def_readonly("qfi", &FisherSweep::qfi)
        .def_readonly("cfi", &FisherSweep::cfi)
        .def_readonly("valid", &FisherSweep::valid)
        .def_readonly("notes", &FisherSweep::notes)
        .def_readonly("peak_theta_qfi", &FisherSweep::peak_theta_qfi)
        .def_readonly("peak_value_qfi", &FisherSweep::peak_value_qfi)
        .def_readonly("peak_theta_cfi", &FisherSweep::peak_theta_cfi)
        .def_readonly("peak_value_cfi", &FisherSweep::peak_value_cfi);
    py::class_<ScalingFit>(m, "ScalingFit")
        .def_readonly("sizes", &ScalingFit::sizes)
        .def_readonly("values", &ScalingFit::values)
        .def_readonly("exponent", &ScalingFit::exponent)
        .def_readonly("intercept", &ScalingFit::intercept)
        .def_readonly("r_squared", &ScalingFit::r_squared);
    py::class_<SteadyFisher>(m, "SteadyFisher")
        .def_readonly("qfi", &SteadyFisher::qfi)
        .def_readonly("cfi", &SteadyFisher::cfi)
        .def_readonly("h_used", &SteadyFisher::h_used);

    m.def("with_theta", &with_theta, py::arg("base"), py::arg("param"), py::arg("theta"));
    m.def("qfi_pure", &qfi_pure, py::arg("state"), py::arg("dstate"));
    m.def(
        "cfi_position",
        [](const VectorXd& p, const VectorXd& dp, double floor) {
            return cfi_position(p, dp, floor).value;
        },
        py::arg("p"), py::arg("dp"), py::arg("floor") = 1e-15);
    m.def("transient_state", &transient_state, py::arg("config"), py::arg("coin"),
          py::arg("steps"));
    m.def("state_derivative", &state_derivative, py::arg("config"), py::arg("param"),
          py::arg("steps"), py::arg("psi0"), py::arg("h0") = 1e-5);
    m.def("fisher_sweep", &fisher_sweep, py::arg("base"), py::arg("param"), py::arg("theta_grid"),
          py::arg("probe"), py::arg("scheme"), py::arg("threads") = 1);
    m.def("scaling_fit", &scaling_fit, py::arg("sizes"), py::arg("values"));
    m.def("steady_state_fisher", &steady_state_fisher, py::arg("config"), py::arg("param"),
          py::arg("scheme"), py::arg("forward_delta") = 0.0);
    m.def("fisher_time_trace", &fisher_time_trace, py::arg("config"), py::arg("param"),
          py::arg("t_max"), py::arg("psi0"), py::arg("h") = 1e-5);

    py::class_<MeasurementRecord>(m, "MeasurementRecord")
        .def_readonly("counts", &MeasurementRecord::counts)
        .def_readonly("total", &MeasurementRecord::total)
        .def_readonly("theta_true", &MeasurementRecord::theta_true)
        .def_readonly("seed", &MeasurementRecord::seed);
    py::class_<Posterior>(m, "Posterior")
        .def_readonly("theta_grid", &Posterior::theta_grid)
        .def_readonly("log_posterior", &Posterior::log_posterior)
        .def_readonly("pdf", &Posterior::pdf)
        .def_readonly("mean", &Posterior::mean)
        .def_readonly("std_dev", &Posterior::std_dev);
    py::class_<PriorSpec>(m, "PriorSpec")
        .def(py::init([](double lo, double hi) { return PriorSpec{lo, hi}; }), py::arg("lo"),
             py::arg("hi"))
        .def_readwrite("lo", &PriorSpec::lo)
        .def_readwrite("hi", &PriorSpec::hi);
    py::class_<EstimationResult>(m, "EstimationResult")
        .def_readonly("post", &EstimationResult::post)
        .def_readonly("refinements", &EstimationResult::refinements);

    m.def("sample_counts", &sample_counts, py::arg("p"), py::arg("total"), py::arg("seed"),
          py::arg("theta_true") = 0.0);
    m.def(
        "log_likelihood",
        [](const MeasurementRecord& r, const std::vector<double>& grid, const ForwardModel& f) {
            return log_likelihood(r, grid, f).values;
        },
        py::arg("record"), py::arg("theta_grid"), py::arg("model"));
    m.def("posterior", &posterior, py::arg("prior"), py::arg("loglik"), py::arg("theta_grid"));
    m.def("crb_bound", &crb_bound, py::arg("fisher_value"), py::arg("total"));
    m.def("estimate_with_refinement", &estimate_with_refinement, py::arg("record"),
          py::arg("model"), py::arg("prior"), py::arg("grid_points") = 1200,
          py::arg("max_refinements") = 8);
    m.def("save_record_json", &save_record_json, py::arg("record"), py::arg("config"),
          py::arg("path"));
    m.def(
        "load_record_json",
        [](const std::string& path) {
            WalkConfig config;
            MeasurementRecord record = load_record_json(path, &config);
            return py::make_tuple(record, config);
        },
        py::arg("path"));

    py::class_<DensityState>(m, "DensityState")
        .def_readonly("rho", &DensityState::rho)
        .def_readonly("log_trace", &DensityState::log_trace);
    py::class_<NoiseSpec>(m, "NoiseSpec")
        .def(py::init([](double eta, double w, int runs, uint64_t seed, JitterMode mode) {
                 return NoiseSpec{eta, w, runs, seed, mode};
             }),
             py::arg("eta") = 1.0, py::arg("waveplate_jitter") = 0.0, py::arg("runs") = 1,
             py::arg("seed") = 0, py::arg("jitter_mode") = JitterMode::StaticPerRun)
        .def_readwrite("eta", &NoiseSpec::eta)
        .def_readwrite("waveplate_jitter", &NoiseSpec::waveplate_jitter)
        .def_readwrite("runs", &NoiseSpec::runs)
        .def_readwrite("seed", &NoiseSpec::seed)
        .def_readwrite("jitter_mode", &NoiseSpec::jitter_mode);
    py::class_<NoisyCfi>(m, "NoisyCfi")
        .def_readonly("mean", &NoisyCfi::mean)
        .def_readonly("std_dev", &NoisyCfi::std_dev)
        .def_readonly("per_run", &NoisyCfi::per_run)
        .def_readonly("failures", &NoisyCfi::failures);

    m.def("density_from_pure", &density_from_pure, py::arg("state"));
    m.def("depolarize", &depolarize, py::arg("rho"), py::arg("eta"));
    m.def("evolve_density", &evolve_density, py::arg("rho0"), py::arg("op"), py::arg("steps"),
          py::arg("eta"));
    m.def("density_position_distribution", &density_position_distribution, py::arg("rho"));
    m.def("cfi_noisy", &cfi_noisy, py::arg("config"), py::arg("param"), py::arg("steps"),
          py::arg("psi0"), py::arg("spec"), py::arg("scheme"), py::arg("delta"));
    m.def("cfi_error_propagation", &cfi_error_propagation, py::arg("counts_i"),
          py::arg("counts_next"), py::arg("delta_theta"));

    m.def("preset_names", &preset_names);
    m.def(
        "preset_json",
        [](const std::string& name) { return run_config_to_json(preset(name)); },
        py::arg("name"));
}
