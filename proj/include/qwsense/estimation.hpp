#pragma once

#include <functional>
#include <string>
#include <vector>

#include "qwsense/walk.hpp"

namespace qwsense {

struct MeasurementRecord {
    VectorXi counts;         // per site
    long total = 0;          // M
    double theta_true = 0.0;
    uint64_t seed = 0;
};

/// Seeded multinomial draw of M outcomes from p. Deterministic across
/// platforms (inverse-CDF over raw mt19937_64 output).
MeasurementRecord sample_counts(const VectorXd& p, long total, uint64_t seed,
                                double theta_true = 0.0);

using ForwardModel = std::function<VectorXd(double)>;

struct LogLikelihood {
    std::vector<double> values;  // sum_j m_j ln p_j(theta), multinomial coefficient dropped
    int floored_with_counts = 0;  // sites floored at 1e-300 that carried counts
};

LogLikelihood log_likelihood(const MeasurementRecord& record,
                             const std::vector<double>& theta_grid,
                             const ForwardModel& model);

struct PriorSpec {
    double lo = 0.0;
    double hi = pi;  // flat over [lo, hi]
};

struct Posterior {
    std::vector<double> theta_grid;
    std::vector<double> log_posterior;  // up to a constant
    std::vector<double> pdf;            // trapezoid-normalized
    double mean = 0.0;
    double std_dev = 0.0;
};

/// Normalizes exp(loglik)*prior on the grid and returns moments. Throws
/// convergence_error when the posterior mass concentrates below the grid
/// resolution (std < 2 grid steps); callers refine the grid and retry.
Posterior posterior(const PriorSpec& prior, const std::vector<double>& loglik,
                    const std::vector<double>& theta_grid);

/// Cramer-Rao lower bound on the standard deviation, 1/sqrt(M F).
double crb_bound(double fisher_value, long total);

/// posterior() with automatic grid refinement around the mode.
struct EstimationResult {
    Posterior post;
    int refinements = 0;
};
EstimationResult estimate_with_refinement(const MeasurementRecord& record,
                                          const ForwardModel& model, const PriorSpec& prior,
                                          int grid_points = 1200, int max_refinements = 8);

/// Record import/export as JSON (fields: counts, M, theta_true, seed, config).
void save_record_json(const MeasurementRecord& record, const WalkConfig& config,
                      const std::string& path);
MeasurementRecord load_record_json(const std::string& path, WalkConfig* config_out = nullptr);

}  // namespace qwsense
