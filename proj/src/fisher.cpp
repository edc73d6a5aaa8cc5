#include "qwsense/fisher.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <Eigen/LU>

namespace qwsense {

WalkConfig with_theta(const WalkConfig& base, ThetaParam param, double theta) {
    WalkConfig c = base;
    switch (param) {
        case ThetaParam::Theta1L: c.theta1_left = theta; break;
        case ThetaParam::Theta2L: c.theta2_left = theta; break;
        case ThetaParam::Theta1R: c.theta1_right = theta; break;
        case ThetaParam::Theta2R: c.theta2_right = theta; break;
        case ThetaParam::LockedPair:
            c.theta2_left = theta;
            c.theta1_right = theta;
            break;
    }
    return c;
}

double get_theta(const WalkConfig& config, ThetaParam param) {
    switch (param) {
        case ThetaParam::Theta1L: return config.theta1_left;
        case ThetaParam::Theta2L: return config.theta2_left;
        case ThetaParam::Theta1R: return config.theta1_right;
        case ThetaParam::Theta2R: return config.theta2_right;
        case ThetaParam::LockedPair: return config.theta2_left;
    }
    return 0.0;
}

double qfi_pure(const VectorXcd& state, const VectorXcd& dstate) {
    if (std::abs(state.norm() - 1.0) > 1e-8)
        throw std::invalid_argument("qfi_pure: state is not normalized");
    if (state.size() != dstate.size())
        throw std::invalid_argument("qfi_pure: dimension mismatch");
    const double dd = dstate.squaredNorm();
    const cx overlap = dstate.dot(state);  // <d|psi>
    double f = 4.0 * (dd - std::norm(overlap));
    if (f < -1e-12) throw std::invalid_argument("qfi_pure: negative value beyond tolerance");
    return std::max(f, 0.0);
}

CfiResult cfi_position(const VectorXd& p, const VectorXd& dp, double floor) {
    if (p.size() != dp.size())
        throw std::invalid_argument("cfi_position: dimension mismatch");
    double total = 0.0;
    for (int i = 0; i < p.size(); ++i) {
        if (p(i) < -1e-12)
            throw std::invalid_argument("cfi_position: negative probability");
        total += std::max(p(i), 0.0);
    }
    if (std::abs(total - 1.0) > 1e-6)
        throw std::invalid_argument("cfi_position: probabilities do not sum to 1");
    CfiResult result;
    for (int i = 0; i < p.size(); ++i) {
        if (p(i) > floor) {
            result.value += dp(i) * dp(i) / p(i);
        } else if (std::abs(dp(i)) > 1e-10) {
            ++result.conditioning_warnings;
        }
    }
    return result;
}

VectorXcd transient_state(const WalkConfig& config, Coin coin, int steps) {
    const StepOperator op = build_step_operator(config);
    return evolve(initial_state(config, coin), op, steps).amplitudes;
}

namespace {

// phase-align b against a: multiply b so <a|b> is real positive
VectorXcd gauge_align(const VectorXcd& a, const VectorXcd& b) {
    const cx overlap = a.dot(b);
    const double mag = std::abs(overlap);
    if (mag < 1e-300) return b;
    return b * (std::conj(overlap) / mag);
}

VectorXd position_probs(const VectorXcd& state) {
    const int num_sites = static_cast<int>(state.size()) / 2;
    VectorXd p(num_sites);
    for (int s = 0; s < num_sites; ++s)
        p(s) = std::norm(state(2 * s)) + std::norm(state(2 * s + 1));
    return p;
}

// dp_j = 2 Re sum_c conj(psi_{j,c}) dpsi_{j,c}
VectorXd position_prob_derivative(const VectorXcd& state, const VectorXcd& dstate) {
    const int num_sites = static_cast<int>(state.size()) / 2;
    VectorXd dp(num_sites);
    for (int s = 0; s < num_sites; ++s)
        dp(s) = 2.0 * (std::conj(state(2 * s)) * dstate(2 * s) +
                       std::conj(state(2 * s + 1)) * dstate(2 * s + 1))
                          .real();
    return dp;
}

}  // namespace

StateDerivative state_derivative(const WalkConfig& raw_config, ThetaParam param, int steps,
                                 Coin psi0, double h0) {
    if (h0 <= 0) throw std::invalid_argument("state_derivative: h must be positive");
    const double theta = get_theta(raw_config, param);
    // evaluate the centre on the parametrized family (relevant when param is
    // the locked pair and the incoming config does not satisfy the lock)
    const WalkConfig config = with_theta(raw_config, param, theta);
    const VectorXcd center = transient_state(config, psi0, steps);

    auto derivative_at = [&](double h) {
        const VectorXcd plus =
            gauge_align(center, transient_state(with_theta(config, param, theta + h), psi0, steps));
        const VectorXcd minus =
            gauge_align(center, transient_state(with_theta(config, param, theta - h), psi0, steps));
        return VectorXcd(((plus - minus) / (2.0 * h)).eval());
    };

    double h = h0;
    VectorXcd d_prev = derivative_at(h);
    double qfi_prev = qfi_pure(center, d_prev);
    constexpr int max_halvings = 8;
    for (int i = 0; i < max_halvings; ++i) {
        const double h_half = h / 2.0;
        VectorXcd d_half = derivative_at(h_half);
        const double qfi_half = qfi_pure(center, d_half);
        const double change = std::abs(qfi_half - qfi_prev);
        if (change <= 1e-4 * std::max(qfi_half, 1e-30)) {
            return StateDerivative{center, std::move(d_half), h_half, qfi_half, change};
        }
        h = h_half;
        d_prev = std::move(d_half);
        qfi_prev = qfi_half;
    }
    throw convergence_error("state_derivative: QFI did not stabilize under step halving");
}

FisherSweep fisher_sweep(const WalkConfig& base, ThetaParam param,
                         const std::vector<double>& theta_grid, const ProbeSpec& probe,
                         DerivativeScheme scheme, int threads) {
    if (theta_grid.size() < 2)
        throw std::invalid_argument("fisher_sweep: need at least two grid points");
    const double spacing = theta_grid[1] - theta_grid[0];
    for (size_t i = 1; i < theta_grid.size(); ++i) {
        if (std::abs((theta_grid[i] - theta_grid[i - 1]) - spacing) > 1e-12 * std::abs(spacing) + 1e-15)
            throw std::invalid_argument("fisher_sweep: theta grid must be uniform");
    }
    if (spacing <= 0) throw std::invalid_argument("fisher_sweep: grid must be increasing");

    const int g = static_cast<int>(theta_grid.size());
    FisherSweep sweep;
    sweep.theta_grid = theta_grid;
    sweep.qfi.assign(g, std::numeric_limits<double>::quiet_NaN());
    sweep.cfi.assign(g, std::numeric_limits<double>::quiet_NaN());
    sweep.valid.assign(g, 0);
    sweep.notes.assign(g, "");
    sweep.probe = probe;
    sweep.scheme = scheme;

    const int steps = probe.transient_steps > 0 ? probe.transient_steps : base.half_size;

    auto eval_point = [&](int i) {
        try {
            if (probe.kind == ProbeKind::SteadyStateProbe) {
                const WalkConfig cfg = with_theta(base, param, theta_grid[i]);
                const SteadyFisher sf = steady_state_fisher(cfg, param, scheme, spacing);
                sweep.qfi[i] = sf.qfi;
                sweep.cfi[i] = sf.cfi;
                sweep.valid[i] = 1;
            } else if (scheme == DerivativeScheme::Converged) {
                const WalkConfig cfg = with_theta(base, param, theta_grid[i]);
                const StateDerivative sd = state_derivative(cfg, param, steps, probe.initial_coin);
                sweep.qfi[i] = sd.qfi;
                sweep.cfi[i] = cfi_position(position_probs(sd.state),
                                            position_prob_derivative(sd.state, sd.dstate))
                                   .value;
                sweep.valid[i] = 1;
            } else {
                if (i + 1 >= g) {
                    sweep.notes[i] = "forward difference needs a next grid point";
                    return;
                }
                const VectorXcd here =
                    transient_state(with_theta(base, param, theta_grid[i]), probe.initial_coin, steps);
                const VectorXcd next = gauge_align(
                    here,
                    transient_state(with_theta(base, param, theta_grid[i + 1]), probe.initial_coin, steps));
                const VectorXcd d = (next - here) / spacing;
                sweep.qfi[i] = qfi_pure(here, d);
                const VectorXd p = position_probs(here);
                const VectorXd dp = (position_probs(next) - p) / spacing;
                sweep.cfi[i] = cfi_position(p, dp).value;
                sweep.valid[i] = 1;
            }
        } catch (const std::exception& e) {
            sweep.notes[i] = e.what();
        }
    };

    if (threads <= 1) {
        for (int i = 0; i < g; ++i) eval_point(i);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        for (int w = 0; w < threads; ++w) {
            pool.emplace_back([&] {
                for (int i = next.fetch_add(1); i < g; i = next.fetch_add(1)) eval_point(i);
            });
        }
        for (auto& t : pool) t.join();
    }

    sweep.peak_value_qfi = -std::numeric_limits<double>::infinity();
    sweep.peak_value_cfi = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < g; ++i) {
        if (!sweep.valid[i]) continue;
        if (sweep.qfi[i] > sweep.peak_value_qfi) {
            sweep.peak_value_qfi = sweep.qfi[i];
            sweep.peak_theta_qfi = theta_grid[i];
        }
        if (sweep.cfi[i] > sweep.peak_value_cfi) {
            sweep.peak_value_cfi = sweep.cfi[i];
            sweep.peak_theta_cfi = theta_grid[i];
        }
    }
    return sweep;
}

ScalingFit scaling_fit(const std::vector<int>& sizes, const std::vector<double>& values) {
    if (sizes.size() != values.size())
        throw std::invalid_argument("scaling_fit: size/value length mismatch");
    if (sizes.size() < 4)
        throw std::invalid_argument("scaling_fit: need at least 4 sizes");
    for (double v : values)
        if (!(v > 0)) throw std::invalid_argument("scaling_fit: values must be positive");

    const int m = static_cast<int>(sizes.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < m; ++i) {
        const double x = std::log(static_cast<double>(sizes[i]));
        const double y = std::log(values[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = m * sxx - sx * sx;
    ScalingFit fit;
    fit.sizes = sizes;
    fit.values = values;
    fit.exponent = (m * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.exponent * sx) / m;
    double ss_res = 0, ss_tot = 0;
    const double ymean = sy / m;
    for (int i = 0; i < m; ++i) {
        const double x = std::log(static_cast<double>(sizes[i]));
        const double y = std::log(values[i]);
        const double yhat = fit.exponent * x + fit.intercept;
        ss_res += (y - yhat) * (y - yhat);
        ss_tot += (y - ymean) * (y - ymean);
    }
    fit.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

namespace {

// two rounds of inverse iteration with Rayleigh-quotient updates
void polish_eigenpair(const MatrixXcd& u, cx& lambda, VectorXcd& v) {
    const int dim = static_cast<int>(u.rows());
    for (int round = 0; round < 2; ++round) {
        MatrixXcd shifted = u - lambda * MatrixXcd::Identity(dim, dim);
        Eigen::PartialPivLU<MatrixXcd> lu(shifted);
        VectorXcd y = lu.solve(v);
        const double norm = y.norm();
        if (!(norm > 0) || !std::isfinite(norm)) return;
        v = y / norm;
        lambda = v.dot(u * v);
    }
}

struct TrackedVector {
    cx lambda;
    VectorXcd vector;
};

// continuation of the dominant eigenvector to a neighbouring parameter value
TrackedVector track_eigenvector(const MatrixXcd& u_next, const VectorXcd& v_ref, cx lambda_ref) {
    Eigen::ComplexEigenSolver<MatrixXcd> solver(u_next, true);
    if (solver.info() != Eigen::Success)
        throw convergence_error("steady_state_fisher: eigensolver failed during tracking");
    const auto& vals = solver.eigenvalues();
    const int dim = static_cast<int>(vals.size());

    // conjugate partners live in the mirror half-plane; exclude them when the
    // reference eigenvalue is safely complex
    const bool restrict_half = lambda_ref.imag() > 1e-8 * std::abs(lambda_ref);
    double best = -1.0, second = -1.0;
    int best_index = -1;
    for (int i = 0; i < dim; ++i) {
        if (restrict_half && vals(i).imag() <= 0) continue;
        const double overlap = std::abs(v_ref.dot(solver.eigenvectors().col(i).normalized()));
        if (overlap > best) {
            second = best;
            best = overlap;
            best_index = i;
        } else if (overlap > second) {
            second = overlap;
        }
    }
    if (best_index < 0)
        throw tracking_error("steady_state_fisher: no candidate eigenvector in half-plane");
    if (second >= 0 && best - second < 0.1)
        throw tracking_error("steady_state_fisher: eigenvector tracking ambiguous (overlap gap < 0.1)");

    TrackedVector out{vals(best_index), solver.eigenvectors().col(best_index).normalized()};
    polish_eigenpair(u_next, out.lambda, out.vector);
    return out;
}

}  // namespace

SteadyFisher steady_state_fisher(const WalkConfig& raw_config, ThetaParam param,
                                 DerivativeScheme scheme, double forward_delta) {
    const double theta = get_theta(raw_config, param);
    const WalkConfig config = with_theta(raw_config, param, theta);
    const StepOperator op = build_step_operator(config);
    const SpectrumResult spec = full_spectrum(op);
    const SteadyState ss = steady_state(spec);
    cx lambda = ss.eigenvalue;
    VectorXcd v = ss.eigenvector;
    polish_eigenpair(op.matrix, lambda, v);

    auto build = [&](double th) { return build_step_operator(with_theta(config, param, th)); };

    auto qfi_cfi_at = [&](double h) {
        const TrackedVector plus = track_eigenvector(build(theta + h).matrix, v, lambda);
        const TrackedVector minus = track_eigenvector(build(theta - h).matrix, v, lambda);
        const VectorXcd vp = gauge_align(v, plus.vector);
        const VectorXcd vm = gauge_align(v, minus.vector);
        const VectorXcd d = (vp - vm) / (2.0 * h);
        SteadyFisher out;
        out.qfi = qfi_pure(v, d);
        out.cfi = cfi_position(position_probs(v), position_prob_derivative(v, d)).value;
        out.h_used = h;
        return out;
    };

    if (scheme == DerivativeScheme::ForwardPaper) {
        if (!(forward_delta > 0))
            throw std::invalid_argument("steady_state_fisher: forward scheme needs a delta");
        const TrackedVector next = track_eigenvector(build(theta + forward_delta).matrix, v, lambda);
        const VectorXcd vn = gauge_align(v, next.vector);
        const VectorXcd d = (vn - v) / forward_delta;
        SteadyFisher out;
        out.qfi = qfi_pure(v, d);
        const VectorXd p = position_probs(v);
        const VectorXd dp = (position_probs(vn) - p) / forward_delta;
        out.cfi = cfi_position(p, dp).value;
        out.h_used = forward_delta;
        return out;
    }

    double h = 1e-5;
    SteadyFisher prev = qfi_cfi_at(h);
    constexpr int max_halvings = 6;
    for (int i = 0; i < max_halvings; ++i) {
        SteadyFisher half = qfi_cfi_at(h / 2.0);
        if (std::abs(half.qfi - prev.qfi) <= 1e-4 * std::max(half.qfi, 1e-30)) return half;
        h /= 2.0;
        prev = half;
    }
    throw convergence_error("steady_state_fisher: QFI did not stabilize under step halving");
}

std::vector<double> fisher_time_trace(const WalkConfig& raw_config, ThetaParam param, int t_max,
                                      Coin psi0, double h) {
    if (t_max < 1) throw std::invalid_argument("fisher_time_trace: t_max must be >= 1");
    const double theta = get_theta(raw_config, param);
    const WalkConfig config = with_theta(raw_config, param, theta);
    const StepOperator op0 = build_step_operator(config);
    const StepOperator op_p = build_step_operator(with_theta(config, param, theta + h));
    const StepOperator op_m = build_step_operator(with_theta(config, param, theta - h));
    const StepOperator op_p2 = build_step_operator(with_theta(config, param, theta + h / 2));
    const StepOperator op_m2 = build_step_operator(with_theta(config, param, theta - h / 2));

    WalkerState s0 = initial_state(config, psi0);
    WalkerState sp = s0, sm = s0, sp2 = s0, sm2 = s0;
    std::vector<double> trace(t_max + 1);
    trace[0] = 0.0;  // the initial state carries no theta dependence
    for (int t = 1; t <= t_max; ++t) {
        s0 = evolve(s0, op0, 1);
        sp = evolve(sp, op_p, 1);
        sm = evolve(sm, op_m, 1);
        sp2 = evolve(sp2, op_p2, 1);
        sm2 = evolve(sm2, op_m2, 1);
        const VectorXcd d =
            (gauge_align(s0.amplitudes, sp.amplitudes) - gauge_align(s0.amplitudes, sm.amplitudes)) /
            (2.0 * h);
        const VectorXcd d2 = (gauge_align(s0.amplitudes, sp2.amplitudes) -
                              gauge_align(s0.amplitudes, sm2.amplitudes)) /
                             h;
        const double q = qfi_pure(s0.amplitudes, d);
        const double q2 = qfi_pure(s0.amplitudes, d2);
        if (std::abs(q2 - q) > 1e-3 * std::max(q2, 1e-30)) {
            // rare: re-derive this instant with the full halving loop
            const StateDerivative sd = state_derivative(config, param, t, psi0, h / 2);
            trace[t] = sd.qfi;
        } else {
            trace[t] = q2;
        }
    }
    return trace;
}

}  // namespace qwsense
