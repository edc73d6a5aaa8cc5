#pragma once

#include <array>
#include <utility>
#include <vector>

#include "qwsense/walk.hpp"

namespace qwsense {

/// Full eigensystem of a step operator. Eigenvalues are sorted by descending
/// |lambda| with ascending-argument tiebreak; quasi-energies are E = i ln(lambda)
/// on the principal branch Re E in (-pi, pi].
struct SpectrumResult {
    VectorXcd eigenvalues;
    VectorXcd quasi_energies;
    MatrixXcd right_eigenvectors;  // unit-norm columns, one per eigenvalue
};

SpectrumResult full_spectrum(const StepOperator& op);

cx quasi_energy(cx lambda);

struct SteadyState {
    cx eigenvalue;
    VectorXcd eigenvector;
    int index;             // column in the SpectrumResult
    bool conjugate_pair;   // the partner conj(lambda) shares |lambda|
};

/// Eigenpair with the largest Im E (= largest |lambda|). Modulus ties from a
/// complex-conjugate pair (the operator is real) resolve to the Im(lambda) >= 0
/// member; a modulus tie extending beyond that pair throws degeneracy_error.
SteadyState steady_state(const SpectrumResult& spectrum);

/// 2x2 momentum-space operator R(theta1/2) S(k) R(theta2/2) Gamma with
/// S(k) = diag(e^{ik}, e^{-ik}). Requires a homogeneous config.
Matrix2cd bloch_operator(const WalkConfig& config, double k);

/// Both eigenvalue bands of the Bloch operator swept over k in (-pi, pi],
/// ordered by k with band identity tracked by continuity.
struct BlochLoops {
    std::vector<double> momenta;
    std::array<std::vector<cx>, 2> bands;
};

BlochLoops bloch_loops(const WalkConfig& config, int num_points = 512);

/// Reference line in the complex plane: all points `point + t*direction`.
struct LineSpec {
    cx point{0.0, 0.0};
    cx direction{0.0, 1.0};  // default: vertical line Re = const
};

struct GapReport {
    enum class Kind { point, line };
    Kind kind = Kind::point;
    int winding = 0;
    double loop_area = 0.0;
    double min_line_distance = 0.0;
    LineSpec line;
    bool both_sides = false;
    bool is_closed = false;
    bool authoritative = true;  // false for the finite-spectrum area heuristic
};

/// Winding number and shoelace area of an ordered spectral loop around a
/// reference point. Throws if the reference lies on the loop (within 1e-9).
GapReport point_gap_metric(const std::vector<cx>& loop, cx reference,
                           double tolerance_area = 1e-4);

/// Area heuristic for an unordered finite spectrum: shoelace area of the
/// eigenvalue cloud ordered by angle about its centroid. Flagged
/// non-authoritative in the report.
GapReport point_gap_from_spectrum(const SpectrumResult& spectrum, cx reference,
                                  double tolerance_area = 1e-4);

/// Minimal distance from any quasi-energy to the reference line, and whether
/// both sides of the line are populated. Closed when the distance is below
/// `tolerance` with population on both sides.
GapReport line_gap_metric(const SpectrumResult& spectrum, const LineSpec& line,
                          double tolerance = 1e-3);

struct LocalizationProfile {
    VectorXd site_population;      // summed over eigenstates, sums to 2N
    VectorXd participation_ratio;  // per eigenstate, >= 1
};

LocalizationProfile skin_localization(const SpectrumResult& spectrum);

/// The two theta2 values solving cos((theta1 + theta2)/2) = 0 and
/// cos((theta1 - theta2)/2) = 0, reduced mod 2 pi.
std::pair<double, double> homogeneous_critical_angle(double theta1);

}  // namespace qwsense
