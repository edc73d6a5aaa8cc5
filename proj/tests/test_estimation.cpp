#include <doctest.h>

#include <cstdio>
#include <numeric>
#include <random>

#include "qwsense/estimation.hpp"
#include "qwsense/fisher.hpp"

using namespace qwsense;

namespace {

WalkConfig fig5_config() {
    WalkConfig c;
    c.half_size = 15;
    c.boundary = Boundary::OBC;
    c.theta1_left = 0.9 * pi;
    c.theta2_right = 0.9 * pi;
    c.theta2_left = 0.1 * pi;
    c.theta1_right = 0.1 * pi;
    c.gamma = 0.3;
    return c;
}

ForwardModel fig5_model() {
    const WalkConfig base = fig5_config();
    return [base](double theta) {
        const VectorXcd psi =
            transient_state(with_theta(base, ThetaParam::LockedPair, theta), Coin::V, 15);
        return position_distribution(WalkerState{psi, 0.0});
    };
}

}  // namespace

TEST_CASE("sample_counts") {
    SUBCASE("concentrated distribution puts everything on one site") {
        VectorXd p = VectorXd::Zero(5);
        p(2) = 1.0;
        const MeasurementRecord r = sample_counts(p, 1000, 7);
        CHECK(r.counts(2) == 1000);
        CHECK(r.counts.sum() == 1000);
    }
    SUBCASE("seeded determinism") {
        VectorXd p(4);
        p << 0.1, 0.2, 0.3, 0.4;
        const MeasurementRecord a = sample_counts(p, 5000, 123);
        const MeasurementRecord b = sample_counts(p, 5000, 123);
        CHECK((a.counts - b.counts).cwiseAbs().sum() == 0);
        const MeasurementRecord c = sample_counts(p, 5000, 124);
        CHECK((a.counts - c.counts).cwiseAbs().sum() != 0);
    }
    SUBCASE("law of large numbers within 3 sigma") {
        VectorXd p(4);
        p << 0.1, 0.2, 0.3, 0.4;
        const long m = 200000;
        const MeasurementRecord r = sample_counts(p, m, 2024);
        for (int j = 0; j < 4; ++j) {
            const double sigma = std::sqrt(p(j) * (1 - p(j)) * m);
            CHECK(std::abs(r.counts(j) - p(j) * m) < 3.0 * sigma);
        }
    }
    SUBCASE("invalid input rejected") {
        VectorXd bad(2);
        bad << 0.5, 0.2;
        CHECK_THROWS_AS(sample_counts(bad, 10, 1), std::invalid_argument);
        VectorXd p(2);
        p << 0.5, 0.5;
        CHECK_THROWS_AS(sample_counts(p, 0, 1), std::invalid_argument);
    }
}

TEST_CASE("log likelihood") {
    SUBCASE("empty record gives identically zero") {
        MeasurementRecord empty;
        empty.counts = VectorXi::Zero(31);
        empty.total = 0;
        std::vector<double> grid;
        for (int i = 0; i < 8; ++i) grid.push_back(0.05 * pi + 0.01 * pi * i);
        const LogLikelihood ll = log_likelihood(empty, grid, fig5_model());
        for (double v : ll.values) CHECK(v == 0.0);
    }
    SUBCASE("argmax lies near theta_true for large M") {
        const double theta_true = 0.12 * pi;
        const ForwardModel model = fig5_model();
        const MeasurementRecord r = sample_counts(model(theta_true), 25000, 31337, theta_true);
        std::vector<double> grid;
        for (int i = 0; i <= 300; ++i) grid.push_back(0.05 * pi + (0.15 * pi / 300.0) * i);
        const LogLikelihood ll = log_likelihood(r, grid, model);
        const auto it = std::max_element(ll.values.begin(), ll.values.end());
        const double argmax = grid[std::distance(ll.values.begin(), it)];
        CHECK(std::abs(argmax - theta_true) <= 2.0 * (grid[1] - grid[0]));
    }
    SUBCASE("site relabelling leaves values unchanged") {
        const ForwardModel model = fig5_model();
        const MeasurementRecord r = sample_counts(model(0.1 * pi), 2000, 5, 0.1 * pi);
        std::vector<double> grid{0.08 * pi, 0.1 * pi, 0.12 * pi};
        const LogLikelihood base = log_likelihood(r, grid, model);
        // reverse the site order consistently in both record and model
        MeasurementRecord flipped = r;
        flipped.counts = r.counts.reverse().eval();
        const ForwardModel flipped_model = [&](double th) {
            return VectorXd(model(th).reverse());
        };
        const LogLikelihood perm = log_likelihood(flipped, grid, flipped_model);
        for (size_t i = 0; i < grid.size(); ++i)
            CHECK(base.values[i] == doctest::Approx(perm.values[i]).epsilon(1e-12));
    }
}

TEST_CASE("posterior") {
    SUBCASE("no data reproduces the flat prior") {
        std::vector<double> grid, flat;
        const int g = 500;
        for (int i = 0; i < g; ++i) {
            grid.push_back(pi * i / (g - 1.0));
            flat.push_back(0.0);
        }
        const Posterior post = posterior(PriorSpec{0.0, pi}, flat, grid);
        double integral = 0.0;
        for (int i = 0; i + 1 < g; ++i)
            integral += 0.5 * (post.pdf[i] + post.pdf[i + 1]) * (grid[i + 1] - grid[i]);
        CHECK(integral == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(post.mean == doctest::Approx(pi / 2).epsilon(1e-6));
        CHECK(post.std_dev == doctest::Approx(pi / std::sqrt(12.0)).epsilon(1e-3));
    }
    SUBCASE("sub-resolution concentration is signalled") {
        std::vector<double> grid, ll;
        const int g = 300;
        for (int i = 0; i < g; ++i) {
            const double th = pi * i / (g - 1.0);
            grid.push_back(th);
            ll.push_back(-1e8 * (th - 1.0) * (th - 1.0));  // needle at theta = 1
        }
        CHECK_THROWS_AS(posterior(PriorSpec{0.0, pi}, ll, grid), convergence_error);
    }
    SUBCASE("grid size is enforced") {
        std::vector<double> grid(50), ll(50, 0.0);
        for (int i = 0; i < 50; ++i) grid[i] = i * 0.01;
        CHECK_THROWS_AS(posterior(PriorSpec{0.0, pi}, ll, grid), std::invalid_argument);
    }
}

TEST_CASE("crb bound") {
    CHECK(crb_bound(4.0, 1) == doctest::Approx(0.5));
    CHECK(crb_bound(4.0, 4) == doctest::Approx(0.25));
    CHECK(crb_bound(100.0, 16) == doctest::Approx(0.5 * crb_bound(100.0, 4)).epsilon(1e-12));
    CHECK_THROWS_AS(crb_bound(0.0, 10), std::invalid_argument);
    CHECK_THROWS_AS(crb_bound(-1.0, 10), std::invalid_argument);
}

TEST_CASE("estimation with refinement at the reference configuration") {
    const ForwardModel model = fig5_model();
    const double theta_true = 0.11 * pi;
    const MeasurementRecord r = sample_counts(model(theta_true), 25000, 97, theta_true);
    const EstimationResult est = estimate_with_refinement(r, model, PriorSpec{0.0, pi}, 600);
    CHECK(est.refinements >= 1);
    CHECK(std::abs(est.post.mean - theta_true) < 5.0 * est.post.std_dev);
    // posterior cannot beat the Cramer-Rao bound set by the QFI of the probe
    const StateDerivative sd = state_derivative(
        with_theta(fig5_config(), ThetaParam::LockedPair, theta_true), ThetaParam::LockedPair,
        15, Coin::V);
    CHECK(est.post.std_dev >= 0.95 * crb_bound(sd.qfi, 25000));

    SUBCASE("posterior is close to Gaussian at large M") {
        // excess kurtosis by quadrature
        const auto& grid = est.post.theta_grid;
        const auto& pdf = est.post.pdf;
        double m2 = 0.0, m4 = 0.0;
        for (size_t i = 0; i + 1 < grid.size(); ++i) {
            const double dm = grid[i + 1] - grid[i];
            const double c1 = grid[i] - est.post.mean, c2 = grid[i + 1] - est.post.mean;
            m2 += 0.5 * (pdf[i] * c1 * c1 + pdf[i + 1] * c2 * c2) * dm;
            m4 += 0.5 * (pdf[i] * c1 * c1 * c1 * c1 + pdf[i + 1] * c2 * c2 * c2 * c2) * dm;
        }
        const double excess_kurtosis = m4 / (m2 * m2) - 3.0;
        CHECK(std::abs(excess_kurtosis) < 0.2);
    }
}

TEST_CASE("record json round trip") {
    const ForwardModel model = fig5_model();
    const MeasurementRecord r = sample_counts(model(0.1 * pi), 500, 11, 0.1 * pi);
    const std::string path = "test_record_roundtrip.json";
    save_record_json(r, fig5_config(), path);
    WalkConfig loaded_config;
    const MeasurementRecord loaded = load_record_json(path, &loaded_config);
    CHECK((loaded.counts - r.counts).cwiseAbs().sum() == 0);
    CHECK(loaded.total == r.total);
    CHECK(loaded.theta_true == r.theta_true);
    CHECK(loaded.seed == r.seed);
    CHECK(loaded_config.half_size == 15);
    CHECK(loaded_config.theta1_left == doctest::Approx(0.9 * pi));
    std::remove(path.c_str());
}
