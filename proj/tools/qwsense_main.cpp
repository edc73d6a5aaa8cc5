#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "qwsense/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"qwsense: criticality-enhanced sensing in non-unitary quantum walks"};

    std::string config_path, preset_name, out_dir;
    std::vector<std::string> overrides;
    uint64_t seed = 0;
    bool seed_set = false, list_presets = false;
    int threads = 0;

    app.add_option("--config", config_path, "run configuration (JSON file or result sidecar)");
    app.add_option("--preset", preset_name, "built-in parameter set (see --list-presets)");
    app.add_option("--set", overrides, "override a config field, dotted path: key.path=value");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "random seed")->each([&](const std::string&) { seed_set = true; });
    app.add_option("--threads", threads, "worker threads (default: QWSENSE_THREADS or 1)");
    app.add_flag("--list-presets", list_presets, "list built-in presets and exit");

    CLI11_PARSE(app, argc, argv);

    if (list_presets) {
        for (const std::string& name : qwsense::preset_names()) std::cout << name << "\n";
        return 0;
    }

    try {
        std::string json_text;
        if (!config_path.empty() && !preset_name.empty()) {
            std::cerr << "validation error: give either --config or --preset, not both\n";
            return 1;
        } else if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) {
                std::cerr << "validation error: cannot read " << config_path << "\n";
                return 1;
            }
            std::ostringstream ss;
            ss << in.rdbuf();
            json_text = ss.str();
        } else if (!preset_name.empty()) {
            json_text = qwsense::run_config_to_json(qwsense::preset(preset_name));
        } else {
            std::cerr << "validation error: need --config or --preset\n";
            return 1;
        }

        for (const std::string& kv : overrides) qwsense::apply_override(json_text, kv);

        qwsense::RunConfig config = qwsense::parse_run_config(json_text);
        if (!out_dir.empty()) config.out_dir = out_dir;
        if (seed_set) {
            config.seed = seed;
            config.noise.seed = seed;
        }
        if (threads > 0) {
            config.threads = threads;
        } else if (const char* env = std::getenv("QWSENSE_THREADS")) {
            config.threads = std::max(1, std::atoi(env));
        }

        const qwsense::RunArtifacts artifacts = qwsense::run_scenario(config, std::cerr);
        return artifacts.exit_code;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
