#pragma once

#include <string>
#include <vector>

#include "qwsense/fisher.hpp"
#include "qwsense/walk.hpp"

namespace qwsense {

/// Density matrix over (site, coin) with the running log of trace factors
/// dropped by per-step renormalization.
struct DensityState {
    MatrixXcd rho;
    double log_trace = 0.0;
};

DensityState density_from_pure(const VectorXcd& state);

enum class JitterMode { StaticPerRun, PerStep };

struct NoiseSpec {
    double eta = 1.0;              // depolarizing retention, in [0, 1]
    double waveplate_jitter = 0.0; // W, radians; uniform deviation in [-W, W]
    int runs = 1;
    uint64_t seed = 0;
    JitterMode jitter_mode = JitterMode::StaticPerRun;
};

/// rho' = eta rho + (1-eta) (I (x) sigma_z) rho (I (x) sigma_z)^dagger.
DensityState depolarize(const DensityState& rho, double eta);

/// Per step: rho -> U rho U^dagger, renormalize by trace, depolarize.
DensityState evolve_density(const DensityState& rho0, const StepOperator& op, int steps,
                            double eta);

/// One jittered realization of the density evolution: every coin angle gets a
/// uniform deviation in [-W, W] (per site, and per step in PerStep mode),
/// deterministic in (spec.seed, run_index). The same deviations apply at
/// every theta the caller evaluates within this run.
DensityState evolve_density_jittered(const WalkConfig& config, const DensityState& rho0,
                                     int steps, const NoiseSpec& spec, int run_index);

VectorXd density_position_distribution(const DensityState& rho);

struct NoisyCfi {
    double mean = 0.0;
    double std_dev = 0.0;
    std::vector<double> per_run;
    int failures = 0;
    std::vector<std::string> failure_notes;
};

/// Mean and standard deviation over noise realizations of the position CFI of
/// the density-evolved probe. The derivative follows `scheme`: ForwardPaper
/// uses the supplied delta; Converged uses a central difference at h = 1e-4.
NoisyCfi cfi_noisy(const WalkConfig& config, ThetaParam param, int steps, Coin psi0,
                   const NoiseSpec& spec, DerivativeScheme scheme, double delta);

/// Statistical uncertainty of the forward-difference CFI estimator under
/// Poissonian counting, by propagation through p_tilde = m / sum(m).
/// Count vectors are raw photon counts at theta_i and theta_{i+1}.
double cfi_error_propagation(const VectorXd& counts_i, const VectorXd& counts_next,
                             double delta_theta);

}  // namespace qwsense
