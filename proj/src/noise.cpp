#include "qwsense/noise.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace qwsense {

DensityState density_from_pure(const VectorXcd& state) {
    DensityState d;
    d.rho = state * state.adjoint();
    const double tr = d.rho.trace().real();
    if (tr <= 0) throw std::invalid_argument("density_from_pure: zero-norm state");
    d.rho /= tr;
    d.log_trace = 0.0;
    return d;
}

namespace {

void check_density(const DensityState& d) {
    if (d.rho.rows() != d.rho.cols())
        throw std::invalid_argument("DensityState: rho must be square");
    if ((d.rho - d.rho.adjoint()).cwiseAbs().maxCoeff() > 1e-8)
        throw std::invalid_argument("DensityState: rho is not Hermitian");
}

// conjugation by I (x) sigma_z flips the sign of coin-off-diagonal entries
MatrixXcd sigma_z_conjugate(const MatrixXcd& rho) {
    MatrixXcd out = rho;
    const int dim = static_cast<int>(rho.rows());
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c)
            if ((r & 1) != (c & 1)) out(r, c) = -out(r, c);
    return out;
}

double uniform_pm(std::mt19937_64& engine, double width) {
    const double u = static_cast<double>(engine() >> 11) * 0x1.0p-53;
    return width * (2.0 * u - 1.0);
}

}  // namespace

DensityState depolarize(const DensityState& rho, double eta) {
    if (!(eta >= 0.0 && eta <= 1.0))
        throw std::invalid_argument("depolarize: eta must be in [0, 1]");
    check_density(rho);
    DensityState out;
    out.log_trace = rho.log_trace;
    out.rho = eta * rho.rho + (1.0 - eta) * sigma_z_conjugate(rho.rho);
    return out;
}

DensityState evolve_density(const DensityState& rho0, const StepOperator& op, int steps,
                            double eta) {
    if (rho0.rho.rows() != op.matrix.rows())
        throw std::invalid_argument("evolve_density: dimension mismatch");
    if (!(eta >= 0.0 && eta <= 1.0))
        throw std::invalid_argument("evolve_density: eta must be in [0, 1]");
    DensityState state = rho0;
    for (int t = 0; t < steps; ++t) {
        state.rho = op.matrix * state.rho * op.matrix.adjoint();
        const double tr = state.rho.trace().real();
        if (tr < 1e-300) throw std::underflow_error("evolve_density: trace underflow");
        state.rho /= tr;
        state.log_trace += std::log(tr);
        if (eta < 1.0) state.rho = eta * state.rho + (1.0 - eta) * sigma_z_conjugate(state.rho);
    }
    return state;
}

DensityState evolve_density_jittered(const WalkConfig& config, const DensityState& rho0,
                                     int steps, const NoiseSpec& spec, int run_index) {
    config.validate();
    if (spec.waveplate_jitter < 0)
        throw std::invalid_argument("evolve_density_jittered: W must be >= 0");
    const int n = config.half_size;
    const int num_sites = config.sites();
    std::mt19937_64 engine(spec.seed + 0x9e3779b97f4a7c15ULL * (run_index + 1));

    std::vector<double> base1(num_sites), base2(num_sites);
    for (int j = -n; j <= n; ++j) {
        const bool left = j <= -1;
        base1[j + n] = left ? config.theta1_left : config.theta1_right;
        base2[j + n] = left ? config.theta2_left : config.theta2_right;
    }

    auto jittered = [&](const std::vector<double>& base) {
        std::vector<double> out = base;
        for (double& a : out) a += uniform_pm(engine, spec.waveplate_jitter);
        return out;
    };

    if (spec.jitter_mode == JitterMode::StaticPerRun || spec.waveplate_jitter == 0.0) {
        const StepOperator op =
            build_step_operator_sitewise(config, jittered(base1), jittered(base2));
        return evolve_density(rho0, op, steps, spec.eta);
    }
    DensityState state = rho0;
    for (int t = 0; t < steps; ++t) {
        const StepOperator op =
            build_step_operator_sitewise(config, jittered(base1), jittered(base2));
        state = evolve_density(state, op, 1, spec.eta);
    }
    return state;
}

VectorXd density_position_distribution(const DensityState& rho) {
    const int num_sites = static_cast<int>(rho.rho.rows()) / 2;
    VectorXd p(num_sites);
    for (int s = 0; s < num_sites; ++s)
        p(s) = rho.rho(2 * s, 2 * s).real() + rho.rho(2 * s + 1, 2 * s + 1).real();
    const double sum = p.sum();
    if (sum > 0) p /= sum;
    return p;
}

NoisyCfi cfi_noisy(const WalkConfig& config, ThetaParam param, int steps, Coin psi0,
                   const NoiseSpec& spec, DerivativeScheme scheme, double delta) {
    if (spec.runs < 1) throw std::invalid_argument("cfi_noisy: runs must be >= 1");
    const double theta = get_theta(config, param);
    const double h = scheme == DerivativeScheme::ForwardPaper ? delta : 1e-4;
    if (!(h > 0)) throw std::invalid_argument("cfi_noisy: derivative step must be positive");

    NoisyCfi out;
    for (int run = 0; run < spec.runs; ++run) {
        try {
            auto probs_at = [&](double th) {
                const WalkConfig cfg = with_theta(config, param, th);
                const DensityState rho0 = density_from_pure(initial_state(cfg, psi0).amplitudes);
                return density_position_distribution(
                    evolve_density_jittered(cfg, rho0, steps, spec, run));
            };
            const VectorXd p = probs_at(theta);
            VectorXd dp;
            if (scheme == DerivativeScheme::ForwardPaper) {
                dp = (probs_at(theta + h) - p) / h;
            } else {
                dp = (probs_at(theta + h) - probs_at(theta - h)) / (2.0 * h);
            }
            out.per_run.push_back(cfi_position(p, dp).value);
        } catch (const std::exception& e) {
            ++out.failures;
            out.failure_notes.push_back(e.what());
        }
    }
    if (out.per_run.empty()) {
        if (!out.failure_notes.empty())
            throw convergence_error("cfi_noisy: every run failed: " + out.failure_notes.front());
        throw convergence_error("cfi_noisy: every run failed");
    }
    double mean = 0.0;
    for (double v : out.per_run) mean += v;
    mean /= static_cast<double>(out.per_run.size());
    out.mean = mean;
    const auto [lo, hi] = std::minmax_element(out.per_run.begin(), out.per_run.end());
    if (*lo == *hi || out.per_run.size() == 1) {
        out.std_dev = 0.0;  // identical realizations, exactly
    } else {
        double var = 0.0;
        for (double v : out.per_run) var += (v - mean) * (v - mean);
        out.std_dev = std::sqrt(var / static_cast<double>(out.per_run.size() - 1));
    }
    return out;
}

double cfi_error_propagation(const VectorXd& counts_i, const VectorXd& counts_next,
                             double delta_theta) {
    if (counts_i.size() != counts_next.size())
        throw std::invalid_argument("cfi_error_propagation: count vectors differ in length");
    if (!(delta_theta > 0))
        throw std::invalid_argument("cfi_error_propagation: delta_theta must be positive");
    const double mi = counts_i.sum();
    const double mn = counts_next.sum();
    if (!(mi > 0) || !(mn > 0))
        throw std::invalid_argument("cfi_error_propagation: zero total counts");

    const double dth2 = delta_theta * delta_theta;
    double sum = 0.0;
    for (int j = 0; j < counts_i.size(); ++j) {
        const double q = counts_i(j) / mi;       // p_tilde at theta_i
        const double r = counts_next(j) / mn;    // p_tilde at theta_{i+1}
        if (q <= 0.0) continue;                  // site contributes nothing to F
        // Delta p_tilde from sum_k (d p_tilde / d m_k)^2 m_k = p(1-p)/M
        const double var_q = q * (1.0 - q) / mi;
        const double var_r = r * (1.0 - r) / mn;
        const double df_dr = 2.0 * (r - q) / (q * dth2);
        const double df_dq = (q * q - r * r) / (q * q * dth2);
        sum += df_dr * df_dr * var_r + df_dq * df_dq * var_q;
    }
    return std::sqrt(sum);
}

}  // namespace qwsense
