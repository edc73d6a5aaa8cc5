#include <doctest.h>

#include <random>

#include "qwsense/estimation.hpp"
#include "qwsense/noise.hpp"

using namespace qwsense;

namespace {

WalkConfig locked(double fixed_over_pi, double swept_over_pi, int n, double gamma = 0.3) {
    WalkConfig c;
    c.half_size = n;
    c.boundary = Boundary::OBC;
    c.theta1_left = fixed_over_pi * pi;
    c.theta2_right = fixed_over_pi * pi;
    c.theta2_left = swept_over_pi * pi;
    c.theta1_right = swept_over_pi * pi;
    c.gamma = gamma;
    return c;
}

MatrixXcd random_density(int dim, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    MatrixXcd a(dim, dim);
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) a(r, c) = cx(g(rng), g(rng));
    MatrixXcd rho = a * a.adjoint();
    rho /= rho.trace().real();
    return rho;
}

}  // namespace

TEST_CASE("depolarize") {
    SUBCASE("eta = 1 is the identity channel") {
        DensityState d{random_density(6, 1), 0.0};
        const DensityState out = depolarize(d, 1.0);
        CHECK((out.rho - d.rho).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("eta = 1/2 kills coin coherence on a |+> state") {
        VectorXcd plus(2);
        plus << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
        const DensityState out = depolarize(density_from_pure(plus), 0.5);
        CHECK(std::abs(out.rho(0, 1)) < 1e-15);
        CHECK(std::abs(out.rho(1, 0)) < 1e-15);
        CHECK(out.rho(0, 0).real() == doctest::Approx(0.5));
    }
    SUBCASE("coin-diagonal states are fixed points") {
        MatrixXcd rho = MatrixXcd::Zero(4, 4);
        rho(0, 0) = 0.3;
        rho(1, 1) = 0.2;
        rho(2, 2) = 0.4;
        rho(3, 3) = 0.1;
        rho(0, 2) = rho(2, 0) = 0.05;  // same-coin site coherence survives
        const DensityState out = depolarize(DensityState{rho, 0.0}, 0.3);
        CHECK((out.rho - rho).cwiseAbs().maxCoeff() < 1e-15);
    }
    SUBCASE("trace and Hermiticity preserved exactly") {
        DensityState d{random_density(8, 2), 0.0};
        const DensityState out = depolarize(d, 0.7);
        CHECK(std::abs(out.rho.trace() - d.rho.trace()) < 1e-15);
        CHECK((out.rho - out.rho.adjoint()).cwiseAbs().maxCoeff() < 1e-14);
    }
    SUBCASE("two depolarizations compose by the twirl algebra") {
        // on coin-off-diagonal components the channel multiplies by 2 eta - 1,
        // so eta_eff = eta1 eta2 + (1 - eta1)(1 - eta2)
        DensityState d{random_density(6, 3), 0.0};
        const double eta1 = 0.85, eta2 = 0.6;
        const DensityState two = depolarize(depolarize(d, eta1), eta2);
        const DensityState one = depolarize(d, eta1 * eta2 + (1 - eta1) * (1 - eta2));
        CHECK((two.rho - one.rho).cwiseAbs().maxCoeff() < 1e-14);
    }
    SUBCASE("eta outside [0,1] rejected") {
        DensityState d{random_density(4, 4), 0.0};
        CHECK_THROWS_AS(depolarize(d, 1.2), std::invalid_argument);
        CHECK_THROWS_AS(depolarize(d, -0.1), std::invalid_argument);
    }
}

TEST_CASE("evolve_density") {
    SUBCASE("T = 0 returns the normalized input") {
        const WalkConfig c = locked(0.9, 0.1, 4);
        const StepOperator op = build_step_operator(c);
        DensityState d{2.0 * random_density(c.dim(), 5), 0.0};
        const DensityState out = evolve_density(d, op, 0, 1.0);
        CHECK((out.rho - d.rho).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("eta = 1 reproduces the pure-state projector") {
        std::mt19937_64 rng(17);
        std::uniform_real_distribution<double> angle(-pi, pi);
        std::uniform_real_distribution<double> g(0.0, 0.4);
        for (int trial = 0; trial < 20; ++trial) {
            WalkConfig c;
            c.half_size = 3;
            c.boundary = trial % 2 ? Boundary::OBC : Boundary::CBC;
            c.theta1_left = angle(rng);
            c.theta2_left = angle(rng);
            c.theta1_right = angle(rng);
            c.theta2_right = angle(rng);
            c.gamma = g(rng);
            const StepOperator op = build_step_operator(c);
            const WalkerState psi0 = initial_state(c, Coin::HminusV);
            const int steps = 6;
            const WalkerState psi = evolve(psi0, op, steps);
            const DensityState rho =
                evolve_density(density_from_pure(psi0.amplitudes), op, steps, 1.0);
            const MatrixXcd projector = psi.amplitudes * psi.amplitudes.adjoint();
            CHECK((rho.rho - projector).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
    SUBCASE("coin coherence decays monotonically in 1 - eta") {
        const WalkConfig c = locked(0.9, 0.12, 5);
        const StepOperator op = build_step_operator(c);
        const DensityState rho0 = density_from_pure(initial_state(c, Coin::HminusV).amplitudes);
        double prev = std::numeric_limits<double>::infinity();
        for (double eta : {1.0, 0.95, 0.9, 0.8, 0.6}) {
            const DensityState out = evolve_density(rho0, op, 5, eta);
            double coherence = 0.0;
            for (int r = 0; r < out.rho.rows(); ++r)
                for (int col = 0; col < out.rho.cols(); ++col)
                    if ((r & 1) != (col & 1)) coherence += std::abs(out.rho(r, col));
            CHECK(coherence <= prev + 1e-12);
            prev = coherence;
        }
    }
}

TEST_CASE("cfi_noisy") {
    const WalkConfig c = locked(0.9, 0.1, 7);
    SUBCASE("noise-free ensemble has zero variance and matches the clean value") {
        NoiseSpec clean;
        clean.eta = 1.0;
        clean.waveplate_jitter = 0.0;
        clean.runs = 20;
        clean.seed = 99;
        const NoisyCfi r = cfi_noisy(c, ThetaParam::LockedPair, 7, Coin::V, clean,
                                     DerivativeScheme::Converged, 0.0);
        CHECK(r.std_dev == 0.0);
        CHECK(r.failures == 0);
        REQUIRE(r.per_run.size() == 20);
        for (double v : r.per_run) CHECK(v == r.per_run[0]);
    }
    SUBCASE("jitter ensembles are seed-deterministic") {
        NoiseSpec spec;
        spec.eta = 1.0;
        spec.waveplate_jitter = 0.02;
        spec.runs = 8;
        spec.seed = 4242;
        const NoisyCfi a = cfi_noisy(c, ThetaParam::LockedPair, 7, Coin::V, spec,
                                     DerivativeScheme::Converged, 0.0);
        const NoisyCfi b = cfi_noisy(c, ThetaParam::LockedPair, 7, Coin::V, spec,
                                     DerivativeScheme::Converged, 0.0);
        CHECK(a.mean == b.mean);
        CHECK(a.std_dev == b.std_dev);
        CHECK(a.std_dev > 0.0);
        spec.jitter_mode = JitterMode::PerStep;
        const NoisyCfi p = cfi_noisy(c, ThetaParam::LockedPair, 7, Coin::V, spec,
                                     DerivativeScheme::Converged, 0.0);
        CHECK(p.mean != a.mean);
    }
    SUBCASE("decoherence degrades the peak value") {
        NoiseSpec noisy;
        noisy.eta = 0.98;
        noisy.runs = 1;
        double clean_peak = 0.0, noisy_peak = 0.0;
        NoiseSpec clean;
        clean.runs = 1;
        for (double x : {0.10, 0.12, 0.14}) {
            const WalkConfig cfg = with_theta(c, ThetaParam::LockedPair, x * pi);
            clean_peak = std::max(clean_peak, cfi_noisy(cfg, ThetaParam::LockedPair, 7, Coin::V,
                                                        clean, DerivativeScheme::Converged, 0.0)
                                                  .mean);
            noisy_peak = std::max(noisy_peak, cfi_noisy(cfg, ThetaParam::LockedPair, 7, Coin::V,
                                                        noisy, DerivativeScheme::Converged, 0.0)
                                                  .mean);
        }
        CHECK(noisy_peak < clean_peak);
    }
}

TEST_CASE("cfi error propagation") {
    SUBCASE("identical count patterns give exactly zero") {
        VectorXd m(4);
        m << 2500, 2500, 2500, 2500;
        CHECK(cfi_error_propagation(m, m, 0.01 * pi) == 0.0);
    }
    SUBCASE("single-site counts carry no sensitivity and no error") {
        VectorXd m = VectorXd::Zero(5);
        m(2) = 10000;
        CHECK(cfi_error_propagation(m, m, 0.01 * pi) == 0.0);
    }
    SUBCASE("error scales as one over sqrt of the count total") {
        VectorXd q(3), r(3);
        q << 0.2, 0.5, 0.3;
        r << 0.25, 0.45, 0.3;
        const double d1 = cfi_error_propagation(1e4 * q, 1e4 * r, 0.01 * pi);
        const double d2 = cfi_error_propagation(1e6 * q, 1e6 * r, 0.01 * pi);
        CHECK(d1 / d2 == doctest::Approx(10.0).epsilon(1e-9));
    }
    SUBCASE("zero totals rejected") {
        VectorXd z = VectorXd::Zero(3);
        VectorXd m(3);
        m << 1, 2, 3;
        CHECK_THROWS_AS(cfi_error_propagation(z, m, 0.01), std::invalid_argument);
    }
    SUBCASE("propagation formula tracks the Monte Carlo spread") {
        // forward-difference CFI from simulated photon counts at the
        // experimental configuration, 200 seeded records
        WalkConfig c = locked(0.9, 0.12, 15);
        const int steps = 15;
        const VectorXd p_i = position_distribution(
            WalkerState{transient_state(c, Coin::V, steps), 0.0});
        const VectorXd p_next = position_distribution(WalkerState{
            transient_state(with_theta(c, ThetaParam::LockedPair, 0.13 * pi), Coin::V, steps),
            0.0});
        const double dtheta = 0.01 * pi;
        const long m_total = 20000;

        std::vector<double> cfis;
        double delta_formula = 0.0;
        for (int rec = 0; rec < 200; ++rec) {
            const VectorXi ci = sample_counts(p_i, m_total, 1000 + rec).counts;
            const VectorXi cn = sample_counts(p_next, m_total, 5000 + rec).counts;
            VectorXd q = ci.cast<double>() / ci.sum();
            VectorXd r = cn.cast<double>() / cn.sum();
            double f = 0.0;
            for (int j = 0; j < q.size(); ++j) {
                if (q(j) <= 0) continue;
                const double dp = (r(j) - q(j)) / dtheta;
                f += dp * dp / q(j);
            }
            cfis.push_back(f);
            if (rec == 0)
                delta_formula =
                    cfi_error_propagation(ci.cast<double>(), cn.cast<double>(), dtheta);
        }
        double mean = 0.0;
        for (double f : cfis) mean += f;
        mean /= cfis.size();
        double var = 0.0;
        for (double f : cfis) var += (f - mean) * (f - mean);
        const double mc_spread = std::sqrt(var / (cfis.size() - 1));
        CHECK(std::abs(delta_formula - mc_spread) / mc_spread < 0.3);
    }
}
