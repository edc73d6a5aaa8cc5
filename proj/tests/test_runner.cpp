#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "qwsense/runner.hpp"

using namespace qwsense;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / "qwsense_test_out") {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("preset fidelity") {
    const RunConfig p2 = preset("fig2-point");
    CHECK(p2.walk.gamma == 0.3);
    CHECK(p2.walk.theta1_left == doctest::Approx(0.9 * pi));
    CHECK(p2.walk.theta2_right == doctest::Approx(0.9 * pi));
    CHECK(p2.walk.half_size == 50);
    CHECK(p2.probe.transient_steps == 50);
    CHECK(p2.probe.initial_coin == Coin::V);

    const RunConfig l2 = preset("fig2-line");
    CHECK(l2.walk.theta1_left == doctest::Approx(0.05 * pi));
    CHECK(l2.walk.theta2_right == doctest::Approx(0.05 * pi));
    CHECK(l2.probe.initial_coin == Coin::HminusV);

    const RunConfig f4 = preset("fig4-point");
    CHECK(f4.walk.half_size == 15);
    CHECK(f4.scheme == DerivativeScheme::ForwardPaper);
    CHECK(f4.grid_step == doctest::Approx(0.01 * pi));

    const RunConfig obc = preset("sm-obc-extra");
    CHECK(obc.walk.theta1_left == doctest::Approx(0.45 * pi));
    CHECK(obc.walk.theta1_right == doctest::Approx(0.1 * pi));
    CHECK(obc.walk.theta2_right == doctest::Approx(1.45 * pi));
    CHECK(obc.param == ThetaParam::Theta2L);

    const RunConfig f5 = preset("fig5-bayes");
    CHECK(f5.bayes_m == 25000);

    CHECK(preset_names().size() == 7);
    CHECK_THROWS_AS(preset("nope"), std::invalid_argument);
}

TEST_CASE("config parsing is strict") {
    const RunConfig base = preset("fig4-point");
    std::string text = run_config_to_json(base);
    CHECK_NOTHROW(parse_run_config(text));

    SUBCASE("unknown top-level field") {
        std::string bad = text;
        apply_override(bad, "bogus_field=1");
        CHECK_THROWS_WITH_AS(parse_run_config(bad),
                             doctest::Contains("bogus_field"), std::invalid_argument);
    }
    SUBCASE("unknown nested field carries its path") {
        std::string bad = text;
        apply_override(bad, "walk.typo_angle=0.5");
        CHECK_THROWS_WITH_AS(parse_run_config(bad),
                             doctest::Contains("walk.typo_angle"), std::invalid_argument);
    }
    SUBCASE("malformed angle string") {
        std::string bad = text;
        apply_override(bad, "walk.gamma=\"not-a-number\"");
        CHECK_THROWS(parse_run_config(bad));
    }
    SUBCASE("override changes a value") {
        std::string changed = text;
        apply_override(changed, "walk.gamma=0.17");
        CHECK(parse_run_config(changed).walk.gamma == doctest::Approx(0.17));
    }
}

TEST_CASE("round trip: sidecar reproduces byte-identical CSV") {
    TempDir tmp;
    RunConfig c = preset("fig4-point");
    c.walk.half_size = 6;
    c.probe.transient_steps = 6;
    c.out_dir = (tmp.path / "a").string();
    c.name = "tiny";
    std::ostringstream log;
    const RunArtifacts first = run_scenario(c, log);
    REQUIRE(first.exit_code == 0);

    RunConfig again = parse_run_config(slurp(first.sidecar_path));
    again.out_dir = (tmp.path / "b").string();
    const RunArtifacts second = run_scenario(again, log);
    REQUIRE(second.exit_code == 0);
    CHECK(slurp(first.csv_path) == slurp(second.csv_path));
}

TEST_CASE("scenario smoke runs") {
    TempDir tmp;
    std::ostringstream log;

    SUBCASE("spectrum") {
        RunConfig c;
        c.scenario = Scenario::Spectrum;
        c.name = "spec";
        c.out_dir = tmp.path.string();
        c.walk.half_size = 8;
        c.walk.boundary = Boundary::CBC;
        c.walk.theta1_left = c.walk.theta2_right = 0.9 * pi;
        c.walk.theta2_left = c.walk.theta1_right = 0.1 * pi;
        c.walk.gamma = 0.3;
        const RunArtifacts art = run_scenario(c, log);
        REQUIRE(art.exit_code == 0);
        const std::string csv = slurp(art.csv_path);
        CHECK(csv.rfind("index,re_lambda", 0) == 0);
        // one row per eigenvalue plus the header
        CHECK(std::count(csv.begin(), csv.end(), '\n') == c.walk.dim() + 1);
    }
    SUBCASE("gbz") {
        RunConfig c;
        c.scenario = Scenario::Gbz;
        c.name = "gbz";
        c.out_dir = tmp.path.string();
        c.walk.half_size = 10;
        c.walk.theta1_left = c.walk.theta2_right = 0.9 * pi;
        c.walk.theta2_left = c.walk.theta1_right = 0.05 * pi;
        c.walk.gamma = 0.3;
        const RunArtifacts art = run_scenario(c, log);
        REQUIRE(art.exit_code == 0);
        CHECK(slurp(art.sidecar_path).find("max_abs_beta_deviation") != std::string::npos);
    }
    SUBCASE("time trace") {
        RunConfig c = preset("fig2-point");
        c.scenario = Scenario::TimeTrace;
        c.name = "trace";
        c.out_dir = tmp.path.string();
        c.walk.half_size = 5;
        c.t_max = 20;
        const RunArtifacts art = run_scenario(c, log);
        REQUIRE(art.exit_code == 0);
        const std::string csv = slurp(art.csv_path);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 22);
    }
    SUBCASE("validation failure exits 1") {
        RunConfig c = preset("fig2-point");
        c.scenario = Scenario::Scaling;
        c.scaling_sizes = {10, 12};  // even and too few
        c.out_dir = tmp.path.string();
        const RunArtifacts art = run_scenario(c, log);
        CHECK(art.exit_code == 1);
    }
}

TEST_CASE("fisher sweep scenario marks peaks") {
    TempDir tmp;
    std::ostringstream log;
    RunConfig c = preset("fig4-point");
    c.walk.half_size = 6;
    c.probe.transient_steps = 6;
    c.scheme = DerivativeScheme::Converged;
    c.grid_start = 0.06 * pi;
    c.grid_stop = 0.18 * pi;
    c.grid_step = 0.02 * pi;
    c.name = "sweep";
    c.out_dir = tmp.path.string();
    const RunArtifacts art = run_scenario(c, log);
    REQUIRE(art.exit_code == 0);
    const std::string csv = slurp(art.csv_path);
    CHECK(csv.rfind("theta_over_pi,qfi,cfi,valid,is_qfi_peak,is_cfi_peak", 0) == 0);
    int qfi_peaks = 0;
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);  // header
    while (std::getline(lines, line)) {
        const auto last_two = line.rfind(",1,") != std::string::npos ||
                              line.size() > 2;
        (void)last_two;
        std::istringstream cells(line);
        std::string cell;
        std::vector<std::string> row;
        while (std::getline(cells, cell, ',')) row.push_back(cell);
        REQUIRE(row.size() == 6);
        qfi_peaks += row[4] == "1";
    }
    CHECK(qfi_peaks == 1);
}
