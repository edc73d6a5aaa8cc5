#include "qwsense/runner.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "qwsense/gbz.hpp"

namespace qwsense {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::Spectrum: return "spectrum";
        case Scenario::Gbz: return "gbz";
        case Scenario::FisherSweep: return "fisher-sweep";
        case Scenario::TimeTrace: return "time-trace";
        case Scenario::Scaling: return "scaling";
        case Scenario::Bayes: return "bayes";
        case Scenario::Noise: return "noise";
    }
    return "?";
}

Scenario scenario_from_string(const std::string& name) {
    for (Scenario s : {Scenario::Spectrum, Scenario::Gbz, Scenario::FisherSweep,
                       Scenario::TimeTrace, Scenario::Scaling, Scenario::Bayes, Scenario::Noise})
        if (to_string(s) == name) return s;
    throw std::invalid_argument("unknown scenario: " + name);
}

std::vector<double> RunConfig::theta_grid() const {
    if (!(grid_step > 0) || !(grid_stop >= grid_start))
        throw std::invalid_argument("theta grid: need start <= stop and step > 0");
    std::vector<double> grid;
    const int count = static_cast<int>(std::round((grid_stop - grid_start) / grid_step)) + 1;
    for (int i = 0; i < count; ++i) grid.push_back(grid_start + i * grid_step);
    return grid;
}

namespace {

void require_known_keys(const json& obj, const std::string& where,
                        const std::set<std::string>& known) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!known.count(it.key()))
            throw std::invalid_argument("unknown field '" + where + "." + it.key() + "'");
}

Coin coin_from_string(const std::string& s) {
    if (s == "H") return Coin::H;
    if (s == "V") return Coin::V;
    if (s == "H-V") return Coin::HminusV;
    if (s == "H+V") return Coin::HplusV;
    throw std::invalid_argument("unknown coin state: " + s + " (expected H, V, H-V, H+V)");
}

std::string coin_to_string(Coin c) {
    switch (c) {
        case Coin::H: return "H";
        case Coin::V: return "V";
        case Coin::HminusV: return "H-V";
        case Coin::HplusV: return "H+V";
    }
    return "?";
}

ThetaParam param_from_string(const std::string& s) {
    if (s == "theta1_left") return ThetaParam::Theta1L;
    if (s == "theta2_left") return ThetaParam::Theta2L;
    if (s == "theta1_right") return ThetaParam::Theta1R;
    if (s == "theta2_right") return ThetaParam::Theta2R;
    if (s == "locked_pair") return ThetaParam::LockedPair;
    throw std::invalid_argument("unknown parameter selector: " + s);
}

std::string param_to_string(ThetaParam p) {
    switch (p) {
        case ThetaParam::Theta1L: return "theta1_left";
        case ThetaParam::Theta2L: return "theta2_left";
        case ThetaParam::Theta1R: return "theta1_right";
        case ThetaParam::Theta2R: return "theta2_right";
        case ThetaParam::LockedPair: return "locked_pair";
    }
    return "?";
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
        out << content;
    }
    fs::rename(tmp, path);
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
    json root = json::parse(json_text);
    if (root.contains("resolved_config")) root = root.at("resolved_config");

    require_known_keys(root, "", {"scenario", "name", "walk", "grid", "probe", "derivative",
                                  "time_trace", "scaling", "spectrum", "bayes", "noise", "seed",
                                  "threads", "out_dir"});
    RunConfig c;
    c.scenario = scenario_from_string(root.at("scenario").get<std::string>());
    if (root.contains("name")) c.name = root.at("name").get<std::string>();

    const json& w = root.at("walk");
    require_known_keys(w, "walk",
                       {"half_size", "boundary", "theta1_left_over_pi", "theta2_left_over_pi",
                        "theta1_right_over_pi", "theta2_right_over_pi", "gamma"});
    c.walk.half_size = w.at("half_size").get<int>();
    const std::string boundary = w.at("boundary").get<std::string>();
    if (boundary != "OBC" && boundary != "CBC")
        throw std::invalid_argument("walk.boundary must be OBC or CBC");
    c.walk.boundary = boundary == "OBC" ? Boundary::OBC : Boundary::CBC;
    c.walk.theta1_left = w.at("theta1_left_over_pi").get<double>() * pi;
    c.walk.theta2_left = w.at("theta2_left_over_pi").get<double>() * pi;
    c.walk.theta1_right = w.at("theta1_right_over_pi").get<double>() * pi;
    c.walk.theta2_right = w.at("theta2_right_over_pi").get<double>() * pi;
    c.walk.gamma = w.at("gamma").get<double>();
    c.walk.validate();

    if (root.contains("grid")) {
        const json& g = root.at("grid");
        require_known_keys(g, "grid", {"param", "start_over_pi", "stop_over_pi", "step_over_pi"});
        c.param = param_from_string(g.at("param").get<std::string>());
        c.grid_start = g.at("start_over_pi").get<double>() * pi;
        c.grid_stop = g.at("stop_over_pi").get<double>() * pi;
        c.grid_step = g.at("step_over_pi").get<double>() * pi;
    }
    if (root.contains("probe")) {
        const json& p = root.at("probe");
        require_known_keys(p, "probe", {"kind", "steps", "coin"});
        const std::string kind = p.at("kind").get<std::string>();
        if (kind == "transient") c.probe.kind = ProbeKind::Transient;
        else if (kind == "steady-state") c.probe.kind = ProbeKind::SteadyStateProbe;
        else throw std::invalid_argument("probe.kind must be transient or steady-state");
        if (p.contains("steps")) c.probe.transient_steps = p.at("steps").get<int>();
        if (p.contains("coin")) c.probe.initial_coin = coin_from_string(p.at("coin").get<std::string>());
    }
    if (root.contains("derivative")) {
        const json& d = root.at("derivative");
        require_known_keys(d, "derivative", {"scheme"});
        const std::string scheme = d.at("scheme").get<std::string>();
        if (scheme == "forward_paper") c.scheme = DerivativeScheme::ForwardPaper;
        else if (scheme == "converged") c.scheme = DerivativeScheme::Converged;
        else throw std::invalid_argument("derivative.scheme must be forward_paper or converged");
    }
    if (root.contains("time_trace")) {
        const json& t = root.at("time_trace");
        require_known_keys(t, "time_trace", {"t_max"});
        c.t_max = t.at("t_max").get<int>();
    }
    if (root.contains("scaling")) {
        const json& s = root.at("scaling");
        require_known_keys(s, "scaling", {"sizes", "away_theta_over_pi"});
        c.scaling_sizes = s.at("sizes").get<std::vector<int>>();
        if (s.contains("away_theta_over_pi"))
            c.away_theta = s.at("away_theta_over_pi").get<double>() * pi;
    }
    if (root.contains("spectrum")) {
        const json& s = root.at("spectrum");
        require_known_keys(s, "spectrum",
                           {"line_point_re", "line_point_im", "line_dir_re", "line_dir_im",
                            "reference_re", "reference_im", "bloch_points"});
        c.line.point = cx(s.value("line_point_re", 0.0), s.value("line_point_im", 0.0));
        c.line.direction = cx(s.value("line_dir_re", 0.0), s.value("line_dir_im", 1.0));
        c.point_gap_reference = cx(s.value("reference_re", 0.0), s.value("reference_im", 0.0));
        c.bloch_points = s.value("bloch_points", 512);
    }
    if (root.contains("bayes")) {
        const json& b = root.at("bayes");
        require_known_keys(b, "bayes",
                           {"M", "trials", "prior_lo_over_pi", "prior_hi_over_pi", "grid_points"});
        c.bayes_m = b.at("M").get<long>();
        c.bayes_trials = b.value("trials", 1);
        c.prior.lo = b.value("prior_lo_over_pi", 0.0) * pi;
        c.prior.hi = b.value("prior_hi_over_pi", 1.0) * pi;
        c.posterior_grid_points = b.value("grid_points", 1200);
    }
    if (root.contains("noise")) {
        const json& nj = root.at("noise");
        require_known_keys(nj, "noise", {"eta", "waveplate_jitter_rad", "runs", "jitter_mode"});
        c.noise.eta = nj.value("eta", 1.0);
        c.noise.waveplate_jitter = nj.value("waveplate_jitter_rad", 0.0);
        c.noise.runs = nj.value("runs", 1);
        const std::string mode = nj.value("jitter_mode", std::string("static_per_run"));
        if (mode == "static_per_run") c.noise.jitter_mode = JitterMode::StaticPerRun;
        else if (mode == "per_step") c.noise.jitter_mode = JitterMode::PerStep;
        else throw std::invalid_argument("noise.jitter_mode must be static_per_run or per_step");
    }
    if (root.contains("seed")) c.seed = root.at("seed").get<uint64_t>();
    if (root.contains("threads")) c.threads = root.at("threads").get<int>();
    if (root.contains("out_dir")) c.out_dir = root.at("out_dir").get<std::string>();
    c.noise.seed = c.seed;
    return c;
}

std::string run_config_to_json(const RunConfig& c) {
    json root;
    root["scenario"] = to_string(c.scenario);
    root["name"] = c.name;
    root["walk"] = {
        {"half_size", c.walk.half_size},
        {"boundary", c.walk.boundary == Boundary::OBC ? "OBC" : "CBC"},
        {"theta1_left_over_pi", c.walk.theta1_left / pi},
        {"theta2_left_over_pi", c.walk.theta2_left / pi},
        {"theta1_right_over_pi", c.walk.theta1_right / pi},
        {"theta2_right_over_pi", c.walk.theta2_right / pi},
        {"gamma", c.walk.gamma},
    };
    root["grid"] = {
        {"param", param_to_string(c.param)},
        {"start_over_pi", c.grid_start / pi},
        {"stop_over_pi", c.grid_stop / pi},
        {"step_over_pi", c.grid_step / pi},
    };
    root["probe"] = {
        {"kind", c.probe.kind == ProbeKind::Transient ? "transient" : "steady-state"},
        {"steps", c.probe.transient_steps},
        {"coin", coin_to_string(c.probe.initial_coin)},
    };
    root["derivative"] = {
        {"scheme", c.scheme == DerivativeScheme::ForwardPaper ? "forward_paper" : "converged"}};
    root["time_trace"] = {{"t_max", c.t_max}};
    root["scaling"] = {{"sizes", c.scaling_sizes}};
    if (std::isfinite(c.away_theta))
        root["scaling"]["away_theta_over_pi"] = c.away_theta / pi;
    root["spectrum"] = {
        {"line_point_re", c.line.point.real()},     {"line_point_im", c.line.point.imag()},
        {"line_dir_re", c.line.direction.real()},   {"line_dir_im", c.line.direction.imag()},
        {"reference_re", c.point_gap_reference.real()},
        {"reference_im", c.point_gap_reference.imag()},
        {"bloch_points", c.bloch_points},
    };
    root["bayes"] = {
        {"M", c.bayes_m},
        {"trials", c.bayes_trials},
        {"prior_lo_over_pi", c.prior.lo / pi},
        {"prior_hi_over_pi", c.prior.hi / pi},
        {"grid_points", c.posterior_grid_points},
    };
    root["noise"] = {
        {"eta", c.noise.eta},
        {"waveplate_jitter_rad", c.noise.waveplate_jitter},
        {"runs", c.noise.runs},
        {"jitter_mode",
         c.noise.jitter_mode == JitterMode::StaticPerRun ? "static_per_run" : "per_step"},
    };
    root["seed"] = c.seed;
    root["threads"] = c.threads;
    root["out_dir"] = c.out_dir;
    return root.dump(2);
}

void apply_override(std::string& json_text, const std::string& key_value) {
    const auto eq = key_value.find('=');
    if (eq == std::string::npos)
        throw std::invalid_argument("--set expects key=value, got: " + key_value);
    const std::string path = key_value.substr(0, eq);
    const std::string value = key_value.substr(eq + 1);

    json root = json::parse(json_text);
    json* node = root.contains("resolved_config") ? &root.at("resolved_config") : &root;
    std::stringstream ss(path);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.empty()) throw std::invalid_argument("--set: empty key path");
    for (size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::parse_error&) {
        parsed = value;  // plain string
    }
    (*node)[parts.back()] = parsed;
    json_text = root.dump();
}

std::vector<std::string> preset_names() {
    return {"fig2-point", "fig2-line", "fig4-point", "fig4-line",
            "fig5-bayes", "sm-obc-extra", "sm-noise"};
}

RunConfig preset(const std::string& name) {
    RunConfig c;
    c.name = name;
    c.param = ThetaParam::LockedPair;
    c.walk.gamma = 0.3;
    c.walk.boundary = Boundary::OBC;
    c.seed = 1;

    auto lock_walk = [&](double fixed_over_pi, double swept_over_pi) {
        c.walk.theta1_left = fixed_over_pi * pi;
        c.walk.theta2_right = fixed_over_pi * pi;
        c.walk.theta2_left = swept_over_pi * pi;
        c.walk.theta1_right = swept_over_pi * pi;
    };

    if (name == "fig2-point") {
        c.scenario = Scenario::FisherSweep;
        c.walk.half_size = 50;
        lock_walk(0.9, 0.1);
        c.grid_start = 0.02 * pi;
        c.grid_stop = 0.2 * pi;
        c.grid_step = 0.005 * pi;
        c.probe = {ProbeKind::Transient, 50, Coin::V};
        c.scheme = DerivativeScheme::Converged;
    } else if (name == "fig2-line") {
        c.scenario = Scenario::FisherSweep;
        c.walk.half_size = 50;
        lock_walk(0.05, 0.779);
        c.grid_start = 0.65 * pi;
        c.grid_stop = 0.9 * pi;
        c.grid_step = 0.005 * pi;
        c.probe = {ProbeKind::Transient, 50, Coin::HminusV};
        c.scheme = DerivativeScheme::Converged;
    } else if (name == "fig4-point") {
        c.scenario = Scenario::FisherSweep;
        c.walk.half_size = 15;
        lock_walk(0.9, 0.1);
        c.grid_start = 0.02 * pi;
        c.grid_stop = 0.2 * pi;
        c.grid_step = 0.01 * pi;
        c.probe = {ProbeKind::Transient, 15, Coin::V};
        c.scheme = DerivativeScheme::ForwardPaper;
    } else if (name == "fig4-line") {
        c.scenario = Scenario::FisherSweep;
        c.walk.half_size = 15;
        lock_walk(0.05, 0.779);
        c.grid_start = 0.6 * pi;
        c.grid_stop = 0.9 * pi;
        c.grid_step = 0.01 * pi;
        c.probe = {ProbeKind::Transient, 15, Coin::HminusV};
        c.scheme = DerivativeScheme::ForwardPaper;
    } else if (name == "fig5-bayes") {
        c.scenario = Scenario::Bayes;
        c.walk.half_size = 15;
        lock_walk(0.9, 0.1);
        c.grid_start = 0.06 * pi;
        c.grid_stop = 0.2 * pi;
        c.grid_step = 0.01 * pi;
        c.probe = {ProbeKind::Transient, 15, Coin::V};
        c.bayes_m = 25000;
        c.bayes_trials = 3;
        c.prior = {0.0, pi};
        c.posterior_grid_points = 1200;
        c.seed = 20250801;
    } else if (name == "sm-obc-extra") {
        c.scenario = Scenario::FisherSweep;
        c.walk.half_size = 15;
        c.walk.theta1_left = 0.45 * pi;
        c.walk.theta1_right = 0.1 * pi;
        c.walk.theta2_right = 1.45 * pi;
        c.walk.theta2_left = 0.65 * pi;
        c.param = ThetaParam::Theta2L;
        c.grid_start = 0.5 * pi;
        c.grid_stop = 0.8 * pi;
        c.grid_step = 0.01 * pi;
        c.probe = {ProbeKind::Transient, 15, Coin::V};
        c.scheme = DerivativeScheme::Converged;
    } else if (name == "sm-noise") {
        c.scenario = Scenario::Noise;
        c.walk.half_size = 15;
        lock_walk(0.9, 0.1);
        c.grid_start = 0.05 * pi;
        c.grid_stop = 0.2 * pi;
        c.grid_step = 0.01 * pi;
        c.probe = {ProbeKind::Transient, 15, Coin::V};
        c.scheme = DerivativeScheme::ForwardPaper;
        c.noise.eta = 0.98;
        c.noise.waveplate_jitter = 0.1 * pi / 180.0;
        c.noise.runs = 20;
        c.seed = 7;
    } else {
        throw std::invalid_argument("unknown preset: " + name);
    }
    c.noise.seed = c.seed;
    return c;
}

namespace {

struct CsvBuilder {
    std::ostringstream out;
    explicit CsvBuilder(const std::string& header) { out << header << "\n"; }
    void row(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) out << ",";
            out << cells[i];
        }
        out << "\n";
    }
};

json scenario_spectrum(const RunConfig& c, CsvBuilder& csv) {
    const StepOperator op = build_step_operator(c.walk);
    const SpectrumResult spec = full_spectrum(op);
    const LocalizationProfile loc = skin_localization(spec);
    for (int i = 0; i < spec.eigenvalues.size(); ++i) {
        csv.row({std::to_string(i), fmt(spec.eigenvalues(i).real()), fmt(spec.eigenvalues(i).imag()),
                 fmt(spec.quasi_energies(i).real()), fmt(spec.quasi_energies(i).imag()),
                 fmt(std::abs(spec.eigenvalues(i))), fmt(loc.participation_ratio(i))});
    }
    json results;
    const GapReport cloud = point_gap_from_spectrum(spec, c.point_gap_reference);
    results["point_gap_cloud_area"] = cloud.loop_area;
    results["point_gap_cloud_is_closed"] = cloud.is_closed;
    results["point_gap_cloud_authoritative"] = cloud.authoritative;
    const GapReport lg = line_gap_metric(spec, c.line);
    results["line_gap_min_distance"] = lg.min_line_distance;
    results["line_gap_both_sides"] = lg.both_sides;
    results["line_gap_is_closed"] = lg.is_closed;
    if (c.walk.homogeneous()) {
        const BlochLoops loops = bloch_loops(c.walk, c.bloch_points);
        double area = 0.0;
        json windings = json::array();
        for (const auto& band : loops.bands) {
            const GapReport g = point_gap_metric(band, c.point_gap_reference);
            area += g.loop_area;
            windings.push_back(g.winding);
        }
        results["bloch_loop_area"] = area;
        results["bloch_windings"] = windings;
    }
    double mean_pr = 0.0;
    for (int i = 0; i < loc.participation_ratio.size(); ++i) mean_pr += loc.participation_ratio(i);
    results["mean_participation_ratio"] = mean_pr / loc.participation_ratio.size();
    return results;
}

json scenario_gbz(const RunConfig& c, CsvBuilder& csv) {
    const GbzResult gbz = solve_gbz(c.walk);
    double dev_max = 0.0, dev_min = std::numeric_limits<double>::infinity();
    for (const GbzSolution& s : gbz.solutions) {
        for (const cx b : s.beta) {
            dev_max = std::max(dev_max, std::abs(std::abs(b) - 1.0));
            dev_min = std::min(dev_min, std::abs(std::abs(b) - 1.0));
        }
        csv.row({fmt(s.lambda.real()), fmt(s.lambda.imag()), fmt(std::abs(s.beta[0])),
                 fmt(std::abs(s.beta[1])), fmt(std::abs(s.beta[2])), fmt(std::abs(s.beta[3])),
                 std::to_string(s.zeta_case), fmt(s.zeta_value)});
    }
    json results;
    results["solutions"] = gbz.solutions.size();
    results["unconverged_seeds"] = gbz.unconverged_seeds.size();
    results["max_abs_beta_deviation"] = dev_max;
    results["min_abs_beta_deviation"] = gbz.solutions.empty() ? 0.0 : dev_min;
    return results;
}

json scenario_fisher_sweep(const RunConfig& c, CsvBuilder& csv) {
    const FisherSweep sweep =
        fisher_sweep(c.walk, c.param, c.theta_grid(), c.probe, c.scheme, c.threads);
    for (size_t i = 0; i < sweep.theta_grid.size(); ++i) {
        const bool qpk = sweep.valid[i] && sweep.theta_grid[i] == sweep.peak_theta_qfi;
        const bool cpk = sweep.valid[i] && sweep.theta_grid[i] == sweep.peak_theta_cfi;
        csv.row({fmt(sweep.theta_grid[i] / pi), fmt(sweep.qfi[i]), fmt(sweep.cfi[i]),
                 std::to_string(static_cast<int>(sweep.valid[i])),
                 std::string(qpk ? "1" : "0"), std::string(cpk ? "1" : "0")});
    }
    json results;
    results["peak_theta_qfi_over_pi"] = sweep.peak_theta_qfi / pi;
    results["peak_value_qfi"] = sweep.peak_value_qfi;
    results["peak_theta_cfi_over_pi"] = sweep.peak_theta_cfi / pi;
    results["peak_value_cfi"] = sweep.peak_value_cfi;
    int invalid = 0;
    for (auto v : sweep.valid)
        if (!v) ++invalid;
    results["invalid_points"] = invalid;
    return results;
}

json scenario_time_trace(const RunConfig& c, CsvBuilder& csv) {
    const int t_max = c.t_max > 0 ? c.t_max : 10 * c.walk.sites();
    const std::vector<double> trace =
        fisher_time_trace(c.walk, c.param, t_max, c.probe.initial_coin);
    const double sites = c.walk.sites();
    for (int t = 0; t <= t_max; ++t)
        csv.row({std::to_string(t), fmt(t / sites), fmt(trace[t])});
    json results;
    results["qfi_final"] = trace.back();
    try {
        const SteadyFisher ss = steady_state_fisher(c.walk, c.param, DerivativeScheme::Converged);
        results["steady_state_qfi"] = ss.qfi;
        const int t10 = std::min(t_max, 10 * c.walk.sites());
        results["qfi_at_10N_rel_deviation"] = std::abs(trace[t10] - ss.qfi) / ss.qfi;
    } catch (const std::exception& e) {
        results["steady_state_qfi_error"] = e.what();
    }
    return results;
}

json scenario_scaling(const RunConfig& c, CsvBuilder& csv) {
    if (c.scaling_sizes.size() < 4)
        throw std::invalid_argument("scaling: need at least 4 sizes");
    std::vector<int> sizes;
    std::vector<double> peaks, aways;
    const bool has_away = std::isfinite(c.away_theta);
    for (int n_sites : c.scaling_sizes) {
        if (n_sites % 2 == 0 || n_sites < 3)
            throw std::invalid_argument("scaling sizes must be odd and >= 3");
        WalkConfig w = c.walk;
        w.half_size = (n_sites - 1) / 2;
        ProbeSpec probe = c.probe;
        if (probe.kind == ProbeKind::Transient) probe.transient_steps = w.half_size;
        const FisherSweep sweep =
            fisher_sweep(w, c.param, c.theta_grid(), probe, c.scheme, c.threads);
        sizes.push_back(n_sites);
        peaks.push_back(sweep.peak_value_qfi);
        double away = std::numeric_limits<double>::quiet_NaN();
        if (has_away) {
            if (probe.kind == ProbeKind::Transient) {
                const StateDerivative sd = state_derivative(
                    with_theta(w, c.param, c.away_theta), c.param, probe.transient_steps,
                    probe.initial_coin);
                away = sd.qfi;
            } else {
                away = steady_state_fisher(with_theta(w, c.param, c.away_theta), c.param, c.scheme,
                                           c.grid_step)
                           .qfi;
            }
        }
        aways.push_back(away);
        csv.row({std::to_string(n_sites), fmt(sweep.peak_value_qfi),
                 fmt(sweep.peak_theta_qfi / pi), fmt(sweep.peak_value_cfi),
                 fmt(sweep.peak_theta_cfi / pi), fmt(away)});
    }
    json results;
    const ScalingFit fit = scaling_fit(sizes, peaks);
    results["peak_exponent"] = fit.exponent;
    results["peak_r_squared"] = fit.r_squared;
    if (has_away) {
        const ScalingFit away_fit = scaling_fit(sizes, aways);
        results["away_exponent"] = away_fit.exponent;
        results["away_r_squared"] = away_fit.r_squared;
    }
    return results;
}

json scenario_bayes(const RunConfig& c, CsvBuilder& csv) {
    const int steps = c.probe.transient_steps > 0 ? c.probe.transient_steps : c.walk.half_size;
    const ForwardModel model = [&](double theta) {
        return position_distribution(
            WalkerState{transient_state(with_theta(c.walk, c.param, theta), c.probe.initial_coin,
                                        steps),
                        0.0});
    };
    json trials = json::array();
    int covered = 0, total = 0;
    const std::vector<double> grid = c.theta_grid();
    std::vector<double> mean_std(grid.size(), 0.0);
    for (size_t gi = 0; gi < grid.size(); ++gi) {
        const double theta_true = grid[gi];
        const VectorXd p_true = model(theta_true);
        for (int trial = 0; trial < c.bayes_trials; ++trial) {
            const uint64_t seed = c.seed + 1000003ULL * gi + static_cast<uint64_t>(trial);
            const MeasurementRecord record = sample_counts(p_true, c.bayes_m, seed, theta_true);
            const EstimationResult est =
                estimate_with_refinement(record, model, c.prior, c.posterior_grid_points);
            const StateDerivative sd = state_derivative(with_theta(c.walk, c.param, theta_true),
                                                        c.param, steps, c.probe.initial_coin);
            const double crb = crb_bound(sd.qfi, c.bayes_m);
            const bool ok = std::abs(est.post.mean - theta_true) <= 2.0 * est.post.std_dev;
            covered += ok;
            ++total;
            mean_std[gi] += est.post.std_dev / c.bayes_trials;
            csv.row({fmt(theta_true / pi), std::to_string(trial), fmt(est.post.mean / pi),
                     fmt(est.post.std_dev), fmt(crb), std::string(ok ? "1" : "0")});
        }
    }
    json results;
    results["coverage_2sigma"] = static_cast<double>(covered) / std::max(total, 1);
    const auto dip = std::min_element(mean_std.begin(), mean_std.end());
    results["precision_dip_theta_over_pi"] = grid[std::distance(mean_std.begin(), dip)] / pi;
    return results;
}

json scenario_noise(const RunConfig& c, CsvBuilder& csv) {
    const int steps = c.probe.transient_steps > 0 ? c.probe.transient_steps : c.walk.half_size;
    const std::vector<double> grid = c.theta_grid();
    double peak = -std::numeric_limits<double>::infinity();
    double peak_theta = 0.0;
    for (size_t i = 0; i + (c.scheme == DerivativeScheme::ForwardPaper ? 1 : 0) < grid.size();
         ++i) {
        const WalkConfig cfg = with_theta(c.walk, c.param, grid[i]);
        const NoisyCfi r =
            cfi_noisy(cfg, c.param, steps, c.probe.initial_coin, c.noise, c.scheme, c.grid_step);
        if (r.mean > peak) {
            peak = r.mean;
            peak_theta = grid[i];
        }
        csv.row({fmt(grid[i] / pi), fmt(r.mean), fmt(r.std_dev), std::to_string(r.failures)});
    }
    json results;
    results["peak_cfi_mean"] = peak;
    results["peak_theta_over_pi"] = peak_theta / pi;
    results["eta"] = c.noise.eta;
    results["waveplate_jitter_rad"] = c.noise.waveplate_jitter;
    results["runs"] = c.noise.runs;
    return results;
}

std::string csv_header(Scenario s) {
    switch (s) {
        case Scenario::Spectrum:
            return "index,re_lambda,im_lambda,re_E,im_E,abs_lambda,participation_ratio";
        case Scenario::Gbz:
            return "re_lambda,im_lambda,abs_beta1_left,abs_beta2_left,abs_beta1_right,"
                   "abs_beta2_right,zeta_case,zeta_value";
        case Scenario::FisherSweep:
            return "theta_over_pi,qfi,cfi,valid,is_qfi_peak,is_cfi_peak";
        case Scenario::TimeTrace:
            return "t,t_over_N,qfi";
        case Scenario::Scaling:
            return "N,peak_qfi,peak_theta_qfi_over_pi,peak_cfi,peak_theta_cfi_over_pi,away_qfi";
        case Scenario::Bayes:
            return "theta_true_over_pi,trial,theta_est_over_pi,posterior_std_rad,crb_qfi_rad,"
                   "within_2sigma";
        case Scenario::Noise:
            return "theta_over_pi,cfi_mean,cfi_std,failed_runs";
    }
    return "";
}

}  // namespace

RunArtifacts run_scenario(const RunConfig& config, std::ostream& log) {
    fs::create_directories(config.out_dir);
    CsvBuilder csv(csv_header(config.scenario));
    json results;
    RunArtifacts artifacts;
    try {
        switch (config.scenario) {
            case Scenario::Spectrum: results = scenario_spectrum(config, csv); break;
            case Scenario::Gbz: results = scenario_gbz(config, csv); break;
            case Scenario::FisherSweep: results = scenario_fisher_sweep(config, csv); break;
            case Scenario::TimeTrace: results = scenario_time_trace(config, csv); break;
            case Scenario::Scaling: results = scenario_scaling(config, csv); break;
            case Scenario::Bayes: results = scenario_bayes(config, csv); break;
            case Scenario::Noise: results = scenario_noise(config, csv); break;
        }
    } catch (const std::invalid_argument& e) {
        log << "validation error: " << e.what() << "\n";
        artifacts.exit_code = 1;
        return artifacts;
    } catch (const std::exception& e) {
        log << "numerical failure: " << e.what() << "\n";
        artifacts.exit_code = 2;
        return artifacts;
    }

    const fs::path base = fs::path(config.out_dir) / config.name;
    artifacts.csv_path = (base.string() + ".csv");
    artifacts.sidecar_path = (base.string() + ".json");

    json sidecar;
    sidecar["schema_version"] = sidecar_schema_version;
    sidecar["tool_version"] = tool_version;
    sidecar["seed"] = config.seed;
    sidecar["resolved_config"] = json::parse(run_config_to_json(config));
    sidecar["results"] = results;

    write_atomic(artifacts.csv_path, csv.out.str());
    write_atomic(artifacts.sidecar_path, sidecar.dump(2) + "\n");
    log << "wrote " << artifacts.csv_path << " and " << artifacts.sidecar_path << "\n";
    return artifacts;
}

}  // namespace qwsense
