#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qwsense/estimation.hpp"
#include "qwsense/fisher.hpp"
#include "qwsense/noise.hpp"
#include "qwsense/spectral.hpp"

namespace qwsense {

inline constexpr const char* tool_version = "0.1.0";
inline constexpr int sidecar_schema_version = 1;

enum class Scenario { Spectrum, Gbz, FisherSweep, TimeTrace, Scaling, Bayes, Noise };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& name);

/// Fully resolved run description. Angles are accepted in units of pi at this
/// interface and converted to radians when building WalkConfig objects.
struct RunConfig {
    Scenario scenario = Scenario::Spectrum;
    std::string name = "run";

    WalkConfig walk;  // radians inside

    // grid over the estimated parameter
    ThetaParam param = ThetaParam::LockedPair;
    double grid_start = 0.0, grid_stop = 0.0, grid_step = 0.0;  // radians

    ProbeSpec probe;
    DerivativeScheme scheme = DerivativeScheme::Converged;

    // time-trace
    int t_max = 0;

    // scaling
    std::vector<int> scaling_sizes;
    double away_theta = std::numeric_limits<double>::quiet_NaN();  // radians

    // spectrum diagnostics
    LineSpec line;
    cx point_gap_reference{0.0, 0.0};
    int bloch_points = 512;

    // bayes
    long bayes_m = 25000;
    int bayes_trials = 1;
    PriorSpec prior{0.0, pi};
    int posterior_grid_points = 1200;

    // noise
    NoiseSpec noise;

    uint64_t seed = 1;
    int threads = 1;
    std::string out_dir = ".";

    std::vector<double> theta_grid() const;  // radians
};

/// Strict JSON parsing: unknown fields are errors. Accepts either a plain
/// run-config object or a result sidecar (uses its "resolved_config").
RunConfig parse_run_config(const std::string& json_text);
std::string run_config_to_json(const RunConfig& config);

/// Built-in parameter sets reproducing the reference figures.
std::vector<std::string> preset_names();
RunConfig preset(const std::string& name);

/// Applies a dotted-path override, e.g. "walk.gamma=0.25" or
/// "grid.step_over_pi=0.01". Values are parsed as JSON scalars.
void apply_override(std::string& json_text, const std::string& key_value);

struct RunArtifacts {
    std::string csv_path;
    std::string sidecar_path;
    int exit_code = 0;
};

/// Executes the scenario and writes `<out>/<name>.csv` plus
/// `<out>/<name>.json` atomically. Log lines go to `log`.
RunArtifacts run_scenario(const RunConfig& config, std::ostream& log);

}  // namespace qwsense
