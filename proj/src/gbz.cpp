#include "qwsense/gbz.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "qwsense/spectral.hpp"

namespace qwsense {

TransferBlocks transfer_blocks(const WalkConfig& config, Region region) {
    config.validate();
    const double t1 = region == Region::Left ? config.theta1_left : config.theta1_right;
    const double t2 = region == Region::Left ? config.theta2_left : config.theta2_right;
    const Matrix2cd r1 = coin_rotation(t1 / 2.0);
    const Matrix2cd r2g = coin_rotation(t2 / 2.0) * loss_block(config.gamma);
    const Matrix2cd proj_h = (Matrix2cd() << 1, 0, 0, 0).finished();
    const Matrix2cd proj_v = (Matrix2cd() << 0, 0, 0, 1).finished();
    return TransferBlocks{r1 * proj_h * r2g, r1 * proj_v * r2g};
}

std::pair<cx, cx> beta_roots(const TransferBlocks& blocks, cx lambda) {
    if (std::abs(lambda) == 0.0)
        throw std::invalid_argument("beta_roots: lambda must be nonzero");
    const Matrix2cd& a = blocks.c_minus;
    const Matrix2cd& b = blocks.c_plus;
    // Expanding the determinant and multiplying by beta; the beta^2 and
    // beta^{-2} coefficients vanish because det(C_{+-1}) = 0.
    const cx k = a(0, 0) * b(1, 1) + a(1, 1) * b(0, 0) - a(0, 1) * b(1, 0) - a(1, 0) * b(0, 1);
    const cx c2 = -lambda * a.trace();
    const cx c1 = lambda * lambda + k;
    const cx c0 = -lambda * b.trace();
    if (std::abs(c2) < 1e-14)
        throw convergence_error("beta_roots: degenerate quadratic (leading coefficient ~ 0)");
    const cx disc = std::sqrt(c1 * c1 - 4.0 * c2 * c0);
    cx r1 = (-c1 + disc) / (2.0 * c2);
    cx r2 = (-c1 - disc) / (2.0 * c2);
    if (std::abs(r1) > std::abs(r2) ||
        (std::abs(r1) == std::abs(r2) && std::arg(r1) > std::arg(r2)))
        std::swap(r1, r2);
    return {r1, r2};
}

ZetaResult zeta(cx b1l, cx b2l, cx b1r, cx b2r) {
    constexpr double slack = 1e-12;
    const double p11 = std::abs(b1l * b1r);
    const double p22 = std::abs(b2l * b2r);
    const double p21 = std::abs(b2l * b1r);
    const double p12 = std::abs(b1l * b2r);

    ZetaResult result;
    auto take = [&](int id, double value) {
        if (result.case_id == 0) {
            result.case_id = id;
            result.value = value;
        } else {
            result.multiple_guards = true;
        }
    };
    if (p22 <= 1 + slack && p21 <= 1 + slack && p12 <= 1 + slack) take(1, p11 - 1.0);
    if (p11 >= 1 - slack && p12 >= 1 - slack && p21 >= 1 - slack) take(2, p22 - 1.0);
    if (p21 >= 1 - slack && p12 <= 1 + slack) take(3, std::abs(b1l) - std::abs(b2l));
    if (p12 >= 1 - slack && p21 <= 1 + slack) take(4, std::abs(b1r) - std::abs(b2r));
    if (result.case_id == 0)
        throw convergence_error("zeta: no case guard holds");
    return result;
}

namespace {

// zeta variables: the left ansatz runs over negative site indices, so its
// decay factors enter reciprocally; right roots enter as-is.
std::array<cx, 4> to_zeta_variables(const std::array<cx, 4>& raw) {
    cx t1 = 1.0 / raw[1];
    cx t2 = 1.0 / raw[0];
    if (std::abs(t1) > std::abs(t2)) std::swap(t1, t2);
    return {t1, t2, raw[2], raw[3]};
}

struct ZetaEvaluator {
    TransferBlocks left, right;

    std::array<cx, 4> raw_roots(cx lambda) const {
        const auto [l1, l2] = beta_roots(left, lambda);
        const auto [r1, r2] = beta_roots(right, lambda);
        return {l1, l2, r1, r2};
    }

    // case-fixed value, smooth in lambda
    double case_value(int case_id, cx lambda) const {
        const auto sm = to_zeta_variables(raw_roots(lambda));
        switch (case_id) {
            case 1: return std::abs(sm[0] * sm[2]) - 1.0;
            case 2: return std::abs(sm[1] * sm[3]) - 1.0;
            case 3: return std::abs(sm[0]) - std::abs(sm[1]);
            default: return std::abs(sm[2]) - std::abs(sm[3]);
        }
    }
};

}  // namespace

GbzResult solve_gbz(const WalkConfig& config, const std::vector<cx>& lambda_seeds) {
    config.validate();
    const ZetaEvaluator eval{transfer_blocks(config, Region::Left),
                             transfer_blocks(config, Region::Right)};

    std::vector<cx> seeds = lambda_seeds;
    if (seeds.empty()) {
        WalkConfig obc = config;
        obc.boundary = Boundary::OBC;
        const SpectrumResult spec = full_spectrum(build_step_operator(obc));
        for (int i = 0; i < spec.eigenvalues.size(); ++i)
            if (std::abs(spec.eigenvalues(i)) > 1e-8) seeds.push_back(spec.eigenvalues(i));
        // refinement ring: argument midpoints between neighbours
        std::vector<cx> sorted = seeds;
        std::sort(sorted.begin(), sorted.end(),
                  [](cx a, cx b) { return std::arg(a) < std::arg(b); });
        for (size_t i = 0; i + 1 < sorted.size(); ++i)
            seeds.push_back(0.5 * (sorted[i] + sorted[i + 1]));
    }

    constexpr double accept_tol = 1e-10;
    constexpr double final_tol = 1e-8;

    GbzResult result;
    for (const cx seed : seeds) {
        const double phase = std::arg(seed);
        const double r0 = std::abs(seed);
        int case_id;
        try {
            const auto sm = to_zeta_variables(eval.raw_roots(seed));
            case_id = zeta(sm[0], sm[1], sm[2], sm[3]).case_id;
        } catch (const convergence_error&) {
            result.unconverged_seeds.push_back(seed);
            continue;
        }
        auto f = [&](double r) { return eval.case_value(case_id, std::polar(r, phase)); };

        cx lambda;
        const double z0 = f(r0);
        if (std::abs(z0) < accept_tol) {
            lambda = seed;
        } else {
            // bracket radially, widening geometrically
            double lo = 0, hi = 0;
            bool bracketed = false;
            for (double d : {0.005, 0.01, 0.02, 0.04, 0.08, 0.16, 0.32, 0.64}) {
                if (std::signbit(f(r0 * (1 + d))) != std::signbit(z0)) {
                    lo = r0;
                    hi = r0 * (1 + d);
                    bracketed = true;
                    break;
                }
                const double rlo = std::max(r0 * (1 - d), 1e-9);
                if (std::signbit(f(rlo)) != std::signbit(z0)) {
                    lo = rlo;
                    hi = r0;
                    bracketed = true;
                    break;
                }
            }
            if (bracketed) {
                double flo = f(lo);
                for (int it = 0; it < 90; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    const double fm = f(mid);
                    if (std::signbit(fm) == std::signbit(flo)) {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
                lambda = std::polar(0.5 * (lo + hi), phase);
            } else {
                // tangential zero: golden-section minimum of |f|
                constexpr double gr = 0.6180339887498949;
                double a = r0 * 0.5, b = r0 * 1.5;
                double c = b - gr * (b - a), d = a + gr * (b - a);
                double fc = std::abs(f(c)), fd = std::abs(f(d));
                for (int it = 0; it < 200; ++it) {
                    if (fc < fd) {
                        b = d;
                        d = c;
                        fd = fc;
                        c = b - gr * (b - a);
                        fc = std::abs(f(c));
                    } else {
                        a = c;
                        c = d;
                        fc = fd;
                        d = a + gr * (b - a);
                        fd = std::abs(f(d));
                    }
                }
                const double rmin = 0.5 * (a + b);
                if (std::abs(f(rmin)) > 1e-7) {
                    result.unconverged_seeds.push_back(seed);
                    continue;
                }
                lambda = std::polar(rmin, phase);
            }
        }

        GbzSolution sol;
        sol.lambda = lambda;
        sol.beta = eval.raw_roots(lambda);
        sol.beta_sm = to_zeta_variables(sol.beta);
        ZetaResult zr;
        try {
            zr = zeta(sol.beta_sm[0], sol.beta_sm[1], sol.beta_sm[2], sol.beta_sm[3]);
        } catch (const convergence_error&) {
            result.unconverged_seeds.push_back(seed);
            continue;
        }
        if (std::abs(zr.value) > final_tol) {
            result.unconverged_seeds.push_back(seed);
            continue;
        }
        sol.zeta_case = zr.case_id;
        sol.zeta_value = zr.value;
        result.solutions.push_back(sol);
    }

    std::sort(result.solutions.begin(), result.solutions.end(),
              [](const GbzSolution& a, const GbzSolution& b) {
                  return std::arg(a.lambda) < std::arg(b.lambda);
              });
    return result;
}

Eigen::Matrix4cd boundary_matrix(const WalkConfig& config, cx lambda) {
    config.validate();
    const int n = config.half_size;
    const TransferBlocks left = transfer_blocks(config, Region::Left);
    const TransferBlocks right = transfer_blocks(config, Region::Right);
    const auto [l1, l2] = beta_roots(left, lambda);
    const auto [r1, r2] = beta_roots(right, lambda);
    const std::array<cx, 2> bl{l1, l2}, br{r1, r2};

    auto null_vector = [lambda](const TransferBlocks& blocks, cx beta) {
        const Matrix2cd m =
            blocks.c_minus * beta + blocks.c_plus / beta - lambda * Matrix2cd::Identity();
        Eigen::JacobiSVD<Matrix2cd> svd(m, Eigen::ComputeFullV);
        return Eigen::Vector2cd(svd.matrixV().col(1));
    };
    const std::array<Eigen::Vector2cd, 2> chi_l{null_vector(left, bl[0]), null_vector(left, bl[1])};
    const std::array<Eigen::Vector2cd, 2> chi_r{null_vector(right, br[0]), null_vector(right, br[1])};

    const Matrix2cd r2g_l = coin_rotation(config.theta2_left / 2.0) * loss_block(config.gamma);
    const Matrix2cd r2g_r = coin_rotation(config.theta2_right / 2.0) * loss_block(config.gamma);
    const Eigen::RowVector2cd row_h_l = r2g_l.row(0), row_v_l = r2g_l.row(1);
    const Eigen::RowVector2cd row_h_r = r2g_r.row(0), row_v_r = r2g_r.row(1);

    Eigen::Matrix4cd m = Eigen::Matrix4cd::Zero();
    for (int j = 0; j < 2; ++j) {
        // no inflow from the missing site -n-1 (left outer edge)
        m(0, j) = (row_v_l * chi_l[j])(0) * std::pow(bl[j], -n - 1);
        // no inflow from the missing site n+1 (right outer edge)
        m(1, 2 + j) = (row_h_r * chi_r[j])(0) * std::pow(br[j], n + 1);
        // interface: the hop into j = -1 uses the right-region source coin
        m(2, j) = -(row_h_l * chi_l[j])(0);
        m(2, 2 + j) = (row_h_r * chi_r[j])(0);
        // interface: the hop into j = 0 uses the left-region source coin
        m(3, j) = (row_v_l * chi_l[j])(0) / bl[j];
        m(3, 2 + j) = -(row_v_r * chi_r[j])(0) / br[j];
    }
    for (int c = 0; c < 4; ++c) {
        const double norm = m.col(c).norm();
        if (norm > 0) m.col(c) /= norm;
    }
    return m;
}

}  // namespace qwsense
