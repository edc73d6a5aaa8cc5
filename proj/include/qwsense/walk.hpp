#pragma once

#include <vector>

#include "qwsense/common.hpp"

namespace qwsense {

enum class Boundary { OBC, CBC };

enum class Coin { H, V, HminusV, HplusV };

/// Parameters of the domain-wall walk: lattice of N = 2n+1 sites j in [-n, n],
/// left region j in [-n, -1], right region j in [0, n].
struct WalkConfig {
    int half_size = 1;  // n
    Boundary boundary = Boundary::OBC;
    double theta1_left = 0.0;
    double theta2_left = 0.0;
    double theta1_right = 0.0;
    double theta2_right = 0.0;
    double gamma = 0.0;

    int sites() const { return 2 * half_size + 1; }
    int dim() const { return 2 * sites(); }
    bool homogeneous() const {
        return theta1_left == theta1_right && theta2_left == theta2_right;
    }
    void validate() const;
};

/// Complex amplitudes over (site, coin) with the running log of norm factors
/// dropped by per-step renormalization.
struct WalkerState {
    VectorXcd amplitudes;
    double log_norm = 0.0;
};

struct StepOperator {
    MatrixXcd matrix;
    WalkConfig config;
};

/// Coin rotation exp(-i a sigma_y) in the (H, V) basis.
Matrix2cd coin_rotation(double a);

/// Loss block diag(e^gamma, e^-gamma) = exp(gamma sigma_z).
Matrix2cd loss_block(double gamma);

/// One step of the non-unitary walk, U = R_{theta1/2} S R_{theta2/2} Gamma,
/// with region-dependent coin angles. Under OBC, amplitude shifted past the
/// ends is dropped; under CBC the ends are connected.
StepOperator build_step_operator(const WalkConfig& config);

/// Same operator with explicit per-site coin angles (used by the jitter model).
/// theta1_by_site/theta2_by_site hold N values indexed j + n.
StepOperator build_step_operator_sitewise(const WalkConfig& config,
                                          const std::vector<double>& theta1_by_site,
                                          const std::vector<double>& theta2_by_site);

/// |0> (x) |psi_c>, normalized.
WalkerState initial_state(const WalkConfig& config, Coin coin);

/// Applies op `steps` times, renormalizing each step and accumulating the
/// dropped factor into log_norm.
WalkerState evolve(const WalkerState& state, const StepOperator& op, int steps);

/// p_j = |psi_{j,H}|^2 + |psi_{j,V}|^2 for a normalized state.
VectorXd position_distribution(const WalkerState& state);

/// gamma = -ln(1-p)/4 for PPBS reflectivity p in [0, 1).
double loss_strength_from_reflectivity(double p);

/// Largest T with expected surviving photons >= 1 given the exponential decay
/// N_ph(T) = N_ph(0) exp(2 (im_E_max - gamma) T).
long step_budget(double n_photons_initial, double im_E_max, double gamma);

}  // namespace qwsense
