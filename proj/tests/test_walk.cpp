#include <doctest.h>

#include <random>

#include "qwsense/walk.hpp"

using namespace qwsense;

namespace {

WalkConfig basic_config(int n = 5, Boundary b = Boundary::CBC) {
    WalkConfig c;
    c.half_size = n;
    c.boundary = b;
    c.theta1_left = 0.3 * pi;
    c.theta2_left = 0.7 * pi;
    c.theta1_right = 0.3 * pi;
    c.theta2_right = 0.7 * pi;
    c.gamma = 0.25;
    return c;
}

}  // namespace

TEST_CASE("config validation") {
    WalkConfig c = basic_config();
    CHECK_NOTHROW(c.validate());
    c.half_size = 0;
    CHECK_THROWS_AS(build_step_operator(c), std::invalid_argument);
    c = basic_config();
    c.gamma = -0.1;
    CHECK_THROWS_AS(build_step_operator(c), std::invalid_argument);
    c = basic_config();
    c.theta1_left = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(build_step_operator(c), std::invalid_argument);
}

TEST_CASE("unitary limit at gamma = 0") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> angle(-pi, pi);
    for (int trial = 0; trial < 100; ++trial) {
        WalkConfig c;
        c.half_size = 4;
        c.boundary = Boundary::CBC;
        c.theta1_left = angle(rng);
        c.theta2_left = angle(rng);
        c.theta1_right = angle(rng);
        c.theta2_right = angle(rng);
        c.gamma = 0.0;
        const MatrixXcd u = build_step_operator(c).matrix;
        const MatrixXcd defect =
            u.adjoint() * u - MatrixXcd::Identity(c.dim(), c.dim());
        CHECK(defect.cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("rotation-free walk is shift times loss") {
    WalkConfig c;
    c.half_size = 3;
    c.boundary = Boundary::CBC;
    c.gamma = 0.3;
    const MatrixXcd u = build_step_operator(c).matrix;
    const int n = c.half_size;
    auto idx = [n](int j, int coin) { return 2 * (j + n) + coin; };
    // V amplitude moves j -> j+1 scaled by e^{-0.3}; H moves j -> j-1 by e^{+0.3}
    for (int j = -n; j <= n; ++j) {
        const int jp = j + 1 > n ? -n : j + 1;
        const int jm = j - 1 < -n ? n : j - 1;
        CHECK(std::abs(u(idx(jp, 1), idx(j, 1)) - std::exp(-0.3)) < 1e-12);
        CHECK(std::abs(u(idx(jm, 0), idx(j, 0)) - std::exp(0.3)) < 1e-12);
    }
    CHECK(std::abs(std::exp(-0.3) - 0.74082) < 1e-5);
}

TEST_CASE("locality: nearest-neighbour coupling only") {
    for (Boundary b : {Boundary::OBC, Boundary::CBC}) {
        WalkConfig c = basic_config(4, b);
        c.theta1_left = 0.9 * pi;
        c.theta2_left = 0.1 * pi;
        const MatrixXcd u = build_step_operator(c).matrix;
        const int n = c.half_size;
        for (int jd = -n; jd <= n; ++jd) {
            for (int js = -n; js <= n; ++js) {
                int dist = std::abs(jd - js);
                if (b == Boundary::CBC) dist = std::min(dist, c.sites() - dist);
                const double mag = u.block(2 * (jd + n), 2 * (js + n), 2, 2).cwiseAbs().maxCoeff();
                if (dist != 1) CHECK(mag == 0.0);
            }
        }
    }
}

TEST_CASE("OBC operator is a submatrix of a larger lattice operator") {
    WalkConfig small = basic_config(3, Boundary::OBC);
    small.theta1_left = 0.8 * pi;
    WalkConfig big = small;
    big.half_size = 6;
    const MatrixXcd u_small = build_step_operator(small).matrix;
    const MatrixXcd u_big = build_step_operator(big).matrix;
    const int off = 2 * (big.half_size - small.half_size);
    const MatrixXcd sub = u_big.block(off, off, small.dim(), small.dim());
    // interior columns agree exactly; boundary columns of the small system
    // only lack the out-of-range rows
    for (int col = 2; col < small.dim() - 2; ++col)
        CHECK((u_small.col(col) - sub.col(col)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("initial states") {
    WalkConfig c = basic_config(2);
    const WalkerState h = initial_state(c, Coin::H);
    CHECK(std::abs(h.amplitudes(2 * 2) - 1.0) < 1e-15);
    CHECK(h.amplitudes.norm() == doctest::Approx(1.0));

    const WalkerState v = initial_state(basic_config(15), Coin::V);
    CHECK(std::abs(v.amplitudes(2 * 15 + 1) - 1.0) < 1e-15);

    const WalkerState hv = initial_state(basic_config(15), Coin::HminusV);
    CHECK(hv.amplitudes.norm() == doctest::Approx(1.0));
    CHECK(std::abs(hv.amplitudes(2 * 15) - 1.0 / std::sqrt(2.0)) < 1e-15);
    CHECK(std::abs(hv.amplitudes(2 * 15 + 1) + 1.0 / std::sqrt(2.0)) < 1e-15);
}

TEST_CASE("evolve basics") {
    WalkConfig c = basic_config();
    const StepOperator op = build_step_operator(c);
    const WalkerState s0 = initial_state(c, Coin::V);

    const WalkerState same = evolve(s0, op, 0);
    CHECK((same.amplitudes - s0.amplitudes).norm() == 0.0);

    WalkConfig cu = c;
    cu.gamma = 0.0;
    const WalkerState s7 = evolve(initial_state(cu, Coin::V), build_step_operator(cu), 7);
    CHECK(std::abs(s7.log_norm) < 1e-12);

    WalkConfig other = basic_config(7);
    CHECK_THROWS_AS(evolve(initial_state(other, Coin::V), op, 1), std::invalid_argument);
}

TEST_CASE("per-step renormalization matches end normalization") {
    WalkConfig c = basic_config(6, Boundary::OBC);
    c.gamma = 0.2;
    c.theta1_left = 0.9 * pi;
    c.theta2_left = 0.15 * pi;
    const StepOperator op = build_step_operator(c);
    const WalkerState s0 = initial_state(c, Coin::HminusV);

    VectorXcd raw = s0.amplitudes;
    WalkerState stepped = s0;
    for (int t = 1; t <= 200; ++t) {
        raw = op.matrix * raw;
        stepped = evolve(stepped, op, 1);
        const VectorXcd end_normalized = raw / raw.norm();
        CHECK((stepped.amplitudes - end_normalized).cwiseAbs().maxCoeff() < 1e-10);
    }
    // log_norm recovers the true decay
    CHECK(std::abs(std::exp(stepped.log_norm) - raw.norm()) / raw.norm() < 1e-9);
}

TEST_CASE("position distribution") {
    WalkConfig c = basic_config(4);
    const WalkerState v = initial_state(c, Coin::V);
    const VectorXd p = position_distribution(v);
    CHECK(p(4) == doctest::Approx(1.0));
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));

    const WalkerState evolved = evolve(v, build_step_operator(c), 5);
    CHECK(position_distribution(evolved).sum() == doctest::Approx(1.0).epsilon(1e-12));

    WalkerState bad = v;
    bad.amplitudes *= 1.5;
    CHECK_THROWS_AS(position_distribution(bad), std::invalid_argument);
}

TEST_CASE("loss strength from reflectivity") {
    CHECK(loss_strength_from_reflectivity(0.0) == 0.0);
    CHECK(loss_strength_from_reflectivity(1.0 - std::exp(-1.2)) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(loss_strength_from_reflectivity(0.5) == doctest::Approx(std::log(2.0) / 4.0).epsilon(1e-12));
    CHECK(std::abs(loss_strength_from_reflectivity(0.5) - 0.17329) < 1e-5);
    CHECK_THROWS_AS(loss_strength_from_reflectivity(1.0), std::invalid_argument);
    CHECK_THROWS_AS(loss_strength_from_reflectivity(-0.1), std::invalid_argument);
}

TEST_CASE("step budget") {
    CHECK(step_budget(1.0, -0.1, 0.3) == 0);
    // exact inversion: e^{2*0.1*7} photons with net decay 0.1 -> 7 steps
    CHECK(step_budget(std::exp(2.0 * 0.1 * 7.0), 0.2, 0.3) == 7);
    CHECK(step_budget(1e6, 0.0, 0.3) == static_cast<long>(std::log(1e6) / 0.6));
    CHECK_THROWS_AS(step_budget(10.0, 0.3, 0.3), std::invalid_argument);
    CHECK_THROWS_AS(step_budget(10.0, 0.4, 0.3), std::invalid_argument);
    CHECK_THROWS_AS(step_budget(0.5, 0.0, 0.3), std::invalid_argument);
}
