#include "qwsense/walk.hpp"

#include <cmath>

namespace qwsense {

void WalkConfig::validate() const {
    if (half_size < 1) throw std::invalid_argument("WalkConfig: half_size must be >= 1");
    for (double a : {theta1_left, theta2_left, theta1_right, theta2_right}) {
        if (!std::isfinite(a)) throw std::invalid_argument("WalkConfig: non-finite coin angle");
    }
    if (!std::isfinite(gamma) || gamma < 0.0)
        throw std::invalid_argument("WalkConfig: gamma must be finite and >= 0");
}

Matrix2cd coin_rotation(double a) {
    Matrix2cd r;
    r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    return r;
}

Matrix2cd loss_block(double gamma) {
    Matrix2cd g = Matrix2cd::Zero();
    g(0, 0) = std::exp(gamma);
    g(1, 1) = std::exp(-gamma);
    return g;
}

StepOperator build_step_operator_sitewise(const WalkConfig& config,
                                          const std::vector<double>& theta1_by_site,
                                          const std::vector<double>& theta2_by_site) {
    config.validate();
    const int n = config.half_size;
    const int num_sites = config.sites();
    if (static_cast<int>(theta1_by_site.size()) != num_sites ||
        static_cast<int>(theta2_by_site.size()) != num_sites)
        throw std::invalid_argument("build_step_operator_sitewise: angle arrays must have N entries");
    for (int s = 0; s < num_sites; ++s) {
        if (!std::isfinite(theta1_by_site[s]) || !std::isfinite(theta2_by_site[s]))
            throw std::invalid_argument("build_step_operator_sitewise: non-finite site angle");
    }

    const Matrix2cd gamma_block = loss_block(config.gamma);
    const Matrix2cd proj_h = (Matrix2cd() << 1, 0, 0, 0).finished();
    const Matrix2cd proj_v = (Matrix2cd() << 0, 0, 0, 1).finished();

    MatrixXcd u = MatrixXcd::Zero(config.dim(), config.dim());
    // Column blocks: source site j applies R(theta2(j)/2)*Gamma, the H part
    // hops to j-1 and the V part to j+1, then R(theta1/2) acts at the
    // destination site.
    for (int j = -n; j <= n; ++j) {
        const int src = j + n;
        const Matrix2cd at_source = coin_rotation(theta2_by_site[src] / 2.0) * gamma_block;
        for (int dir : {-1, +1}) {
            int jd = j + dir;
            if (jd < -n) {
                if (config.boundary == Boundary::CBC) jd = n;
                else continue;
            } else if (jd > n) {
                if (config.boundary == Boundary::CBC) jd = -n;
                else continue;
            }
            const int dst = jd + n;
            const Matrix2cd& proj = (dir < 0) ? proj_h : proj_v;
            const Matrix2cd block =
                coin_rotation(theta1_by_site[dst] / 2.0) * proj * at_source;
            u.block<2, 2>(2 * dst, 2 * src) += block;
        }
    }
    return StepOperator{std::move(u), config};
}

StepOperator build_step_operator(const WalkConfig& config) {
    config.validate();
    const int n = config.half_size;
    std::vector<double> t1(config.sites()), t2(config.sites());
    for (int j = -n; j <= n; ++j) {
        const bool left = j <= -1;
        t1[j + n] = left ? config.theta1_left : config.theta1_right;
        t2[j + n] = left ? config.theta2_left : config.theta2_right;
    }
    return build_step_operator_sitewise(config, t1, t2);
}

WalkerState initial_state(const WalkConfig& config, Coin coin) {
    config.validate();
    const int n = config.half_size;
    VectorXcd amp = VectorXcd::Zero(config.dim());
    const int center = 2 * n;  // (j=0, H)
    const double s = 1.0 / std::sqrt(2.0);
    switch (coin) {
        case Coin::H: amp(center) = 1.0; break;
        case Coin::V: amp(center + 1) = 1.0; break;
        case Coin::HminusV:
            amp(center) = s;
            amp(center + 1) = -s;
            break;
        case Coin::HplusV:
            amp(center) = s;
            amp(center + 1) = s;
            break;
    }
    return WalkerState{std::move(amp), 0.0};
}

WalkerState evolve(const WalkerState& state, const StepOperator& op, int steps) {
    if (steps < 0) throw std::invalid_argument("evolve: steps must be >= 0");
    if (state.amplitudes.size() != op.matrix.rows())
        throw std::invalid_argument("evolve: state dimension does not match operator");
    WalkerState out = state;
    for (int t = 0; t < steps; ++t) {
        out.amplitudes = op.matrix * out.amplitudes;
        const double norm = out.amplitudes.norm();
        if (norm < 1e-300)
            throw std::underflow_error("evolve: step norm underflow below 1e-300");
        out.amplitudes /= norm;
        out.log_norm += std::log(norm);
    }
    return out;
}

VectorXd position_distribution(const WalkerState& state) {
    const double norm = state.amplitudes.norm();
    if (std::abs(norm - 1.0) > 1e-8)
        throw std::invalid_argument("position_distribution: state is not normalized");
    const int num_sites = static_cast<int>(state.amplitudes.size()) / 2;
    VectorXd p(num_sites);
    for (int s = 0; s < num_sites; ++s)
        p(s) = std::norm(state.amplitudes(2 * s)) + std::norm(state.amplitudes(2 * s + 1));
    return p;
}

double loss_strength_from_reflectivity(double p) {
    if (!(p >= 0.0 && p < 1.0))
        throw std::invalid_argument("loss_strength_from_reflectivity: p must be in [0, 1)");
    return -0.25 * std::log1p(-p);
}

long step_budget(double n_photons_initial, double im_E_max, double gamma) {
    if (n_photons_initial < 1.0)
        throw std::invalid_argument("step_budget: need at least one photon");
    const double decay = gamma - im_E_max;
    if (decay <= 0.0)
        throw std::invalid_argument("step_budget: configuration does not decay (im_E_max >= gamma)");
    const double t_real = std::log(n_photons_initial) / (2.0 * decay);
    long t = static_cast<long>(std::floor(t_real));
    // guard against floor knocking off an exactly attainable step
    if (n_photons_initial * std::exp(-2.0 * decay * static_cast<double>(t + 1)) >= 1.0 - 1e-12)
        ++t;
    return t;
}

}  // namespace qwsense
