#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qwsense/spectral.hpp"
#include "qwsense/walk.hpp"

namespace qwsense {

/// Which coin angle(s) the estimated parameter theta controls. LockedPair
/// moves theta2_left and theta1_right together (the estimation target used
/// throughout the domain-wall figures).
enum class ThetaParam { Theta1L, Theta2L, Theta1R, Theta2R, LockedPair };

enum class DerivativeScheme {
    ForwardPaper,  // (f(theta + dtheta) - f(theta)) / dtheta at the grid spacing
    Converged      // central difference with automatic step halving
};

enum class ProbeKind { Transient, SteadyStateProbe };

struct ProbeSpec {
    ProbeKind kind = ProbeKind::Transient;
    int transient_steps = 0;  // 0 -> (N-1)/2
    Coin initial_coin = Coin::V;
};

WalkConfig with_theta(const WalkConfig& base, ThetaParam param, double theta);
double get_theta(const WalkConfig& config, ThetaParam param);

/// F_Q = 4 (<d|d> - |<d|psi>|^2) for a normalized pure state.
double qfi_pure(const VectorXcd& state, const VectorXcd& dstate);

/// F_C = sum_j dp_j^2 / p_j over entries with p_j above `floor`. Entries below
/// the floor with |dp_j| > 1e-10 count as conditioning warnings.
struct CfiResult {
    double value = 0.0;
    int conditioning_warnings = 0;
};
CfiResult cfi_position(const VectorXd& p, const VectorXd& dp, double floor = 1e-15);

/// End-normalized transient state U(theta)^T |psi0> / ||.||.
VectorXcd transient_state(const WalkConfig& config, Coin coin, int steps);

/// Gauge-aligned central-difference derivative of the normalized transient
/// state, with automatic halving of h until the induced QFI is stable to
/// 1e-4 relative. Throws convergence_error when halving fails to settle.
struct StateDerivative {
    VectorXcd state;
    VectorXcd dstate;
    double h_used = 0.0;
    double qfi = 0.0;
    double truncation_estimate = 0.0;  // |QFI(h) - QFI(h/2)|
};
StateDerivative state_derivative(const WalkConfig& config, ThetaParam param, int steps,
                                 Coin psi0, double h0 = 1e-5);

struct FisherSweep {
    std::vector<double> theta_grid;
    std::vector<double> qfi;
    std::vector<double> cfi;
    std::vector<uint8_t> valid;        // per grid point
    std::vector<std::string> notes;    // failure notes for invalid points
    double peak_theta_qfi = 0.0, peak_value_qfi = 0.0;
    double peak_theta_cfi = 0.0, peak_value_cfi = 0.0;
    ProbeSpec probe;
    DerivativeScheme scheme = DerivativeScheme::Converged;
};

/// QFI and CFI over a uniform theta grid. Per-point failures are recorded
/// without aborting the sweep. Under ForwardPaper the derivative uses the
/// grid spacing itself, so the last grid point is not evaluated.
FisherSweep fisher_sweep(const WalkConfig& base, ThetaParam param,
                         const std::vector<double>& theta_grid, const ProbeSpec& probe,
                         DerivativeScheme scheme, int threads = 1);

struct ScalingFit {
    std::vector<int> sizes;
    std::vector<double> values;
    double exponent = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

/// Least-squares fit of ln(value) against ln(N).
ScalingFit scaling_fit(const std::vector<int>& sizes, const std::vector<double>& values);

/// QFI/CFI of the unit-normalized dominant eigenvector, derivative by
/// gauge-aligned central difference with overlap-continued eigenvectors.
/// Throws tracking_error when the continuation is ambiguous and
/// degeneracy_error when the steady state itself is (from steady_state).
struct SteadyFisher {
    double qfi = 0.0;
    double cfi = 0.0;
    double h_used = 0.0;
};
SteadyFisher steady_state_fisher(const WalkConfig& config, ThetaParam param,
                                 DerivativeScheme scheme, double forward_delta = 0.0);

/// QFI of the normalized evolved state at each t = 1..t_max.
std::vector<double> fisher_time_trace(const WalkConfig& config, ThetaParam param, int t_max,
                                      Coin psi0, double h = 1e-5);

}  // namespace qwsense
