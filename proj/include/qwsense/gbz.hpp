#pragma once

#include <array>
#include <vector>

#include "qwsense/walk.hpp"

namespace qwsense {

enum class Region { Left, Right };

/// Rank-1 coin blocks of the hopping decomposition
/// U = sum_j |j-1><j| (x) C_{-1}(j) + |j+1><j| (x) C_{+1}(j),
/// evaluated with the bulk (region-uniform) angles.
struct TransferBlocks {
    Matrix2cd c_minus;
    Matrix2cd c_plus;
};

TransferBlocks transfer_blocks(const WalkConfig& config, Region region);

/// The two roots of det(C_{-1} b + C_{+1}/b - lambda) = 0, which reduces to a
/// quadratic because the blocks are rank-1. Ordered |b1| <= |b2| with argument
/// tiebreak. Throws convergence_error if the quadratic degenerates.
std::pair<cx, cx> beta_roots(const TransferBlocks& blocks, cx lambda);

struct ZetaResult {
    int case_id = 0;  // 1..4
    double value = 0.0;
    bool multiple_guards = false;
};

/// The four-case piecewise boundary function of the asymptotic domain-wall
/// eigenvalue condition. Guards carry a 1e-12 slack; when several hold the
/// lowest-numbered case applies and the event is flagged. Throws
/// convergence_error if no guard holds.
ZetaResult zeta(cx beta1_left, cx beta2_left, cx beta1_right, cx beta2_right);

struct GbzSolution {
    cx lambda;
    std::array<cx, 4> beta;      // raw quadratic roots (b1L, b2L, b1R, b2R)
    std::array<cx, 4> beta_sm;   // left pair inverted: the zeta variables
    int zeta_case = 0;
    double zeta_value = 0.0;
};

struct GbzResult {
    std::vector<GbzSolution> solutions;       // sorted by arg(lambda)
    std::vector<cx> unconverged_seeds;
};

/// Solves zeta = 0 along the spectral curve. Seeds default to the OBC
/// finite-spectrum eigenvalues (at the config's n) plus argument-midpoint
/// refinements; each seed is refined radially in |lambda|.
GbzResult solve_gbz(const WalkConfig& config,
                    const std::vector<cx>& lambda_seeds = {});

/// 4x4 boundary-condition matrix of the finite domain-wall system in the
/// ansatz coefficients; det = 0 at OBC eigenvalues. Columns are normalized.
/// Intended as a small-n validation cross-check.
Eigen::Matrix4cd boundary_matrix(const WalkConfig& config, cx lambda);

}  // namespace qwsense
