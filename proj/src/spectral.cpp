#include "qwsense/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace qwsense {

cx quasi_energy(cx lambda) {
    double re = -std::arg(lambda);
    if (re <= -pi) re += 2.0 * pi;
    return {re, std::log(std::abs(lambda))};
}

SpectrumResult full_spectrum(const StepOperator& op) {
    Eigen::ComplexEigenSolver<MatrixXcd> solver(op.matrix, /*computeEigenvectors=*/true);
    if (solver.info() != Eigen::Success)
        throw convergence_error("full_spectrum: eigensolver did not converge");

    const int dim = static_cast<int>(op.matrix.rows());
    std::vector<int> order(dim);
    std::iota(order.begin(), order.end(), 0);
    const auto& vals = solver.eigenvalues();
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double ma = std::abs(vals(a)), mb = std::abs(vals(b));
        if (ma != mb) return ma > mb;
        return std::arg(vals(a)) < std::arg(vals(b));
    });

    SpectrumResult result;
    result.eigenvalues.resize(dim);
    result.quasi_energies.resize(dim);
    result.right_eigenvectors.resize(dim, dim);
    for (int i = 0; i < dim; ++i) {
        const int k = order[i];
        result.eigenvalues(i) = vals(k);
        result.quasi_energies(i) = quasi_energy(vals(k));
        result.right_eigenvectors.col(i) = solver.eigenvectors().col(k).normalized();
    }
    return result;
}

SteadyState steady_state(const SpectrumResult& spectrum) {
    const int dim = static_cast<int>(spectrum.eigenvalues.size());
    if (dim == 0) throw std::invalid_argument("steady_state: empty spectrum");
    constexpr double tie_tol = 1e-9;

    const double top = std::abs(spectrum.eigenvalues(0));
    std::vector<int> tied;
    for (int i = 0; i < dim && std::abs(spectrum.eigenvalues(i)) > top - tie_tol; ++i)
        tied.push_back(i);

    // Prefer the Im(lambda) >= 0 member so conjugate pairs resolve deterministically.
    int pick = tied[0];
    for (int i : tied) {
        if (spectrum.eigenvalues(i).imag() >= -1e-14) {
            pick = i;
            break;
        }
    }
    const cx lambda = spectrum.eigenvalues(pick);

    bool conj_pair = false;
    int extra_ties = 0;
    for (int i : tied) {
        if (i == pick) continue;
        if (std::abs(spectrum.eigenvalues(i) - std::conj(lambda)) < 1e-8 * std::max(1.0, top) &&
            std::abs(lambda.imag()) > 1e-12 && !conj_pair) {
            conj_pair = true;
        } else {
            ++extra_ties;
        }
    }
    if (extra_ties > 0)
        throw degeneracy_error("steady_state: top |lambda| degenerate beyond a conjugate pair");

    return SteadyState{lambda, spectrum.right_eigenvectors.col(pick), pick, conj_pair};
}

Matrix2cd bloch_operator(const WalkConfig& config, double k) {
    config.validate();
    if (!config.homogeneous())
        throw std::invalid_argument("bloch_operator: config must be homogeneous");
    Matrix2cd shift = Matrix2cd::Zero();
    shift(0, 0) = std::polar(1.0, k);
    shift(1, 1) = std::polar(1.0, -k);
    return coin_rotation(config.theta1_left / 2.0) * shift *
           coin_rotation(config.theta2_left / 2.0) * loss_block(config.gamma);
}

BlochLoops bloch_loops(const WalkConfig& config, int num_points) {
    if (num_points < 8) throw std::invalid_argument("bloch_loops: need at least 8 points");
    BlochLoops loops;
    loops.momenta.reserve(num_points);
    loops.bands[0].reserve(num_points);
    loops.bands[1].reserve(num_points);
    for (int i = 0; i < num_points; ++i) {
        const double k = -pi + 2.0 * pi * (i + 1) / num_points;  // (-pi, pi]
        Eigen::ComplexEigenSolver<Matrix2cd> solver(bloch_operator(config, k), false);
        cx a = solver.eigenvalues()(0), b = solver.eigenvalues()(1);
        if (!loops.bands[0].empty()) {
            const cx pa = loops.bands[0].back(), pb = loops.bands[1].back();
            if (std::abs(a - pa) + std::abs(b - pb) > std::abs(b - pa) + std::abs(a - pb))
                std::swap(a, b);
        }
        loops.momenta.push_back(k);
        loops.bands[0].push_back(a);
        loops.bands[1].push_back(b);
    }
    return loops;
}

namespace {

double shoelace_area(const std::vector<cx>& poly) {
    const size_t m = poly.size();
    double twice = 0.0;
    for (size_t i = 0; i < m; ++i) {
        const cx& a = poly[i];
        const cx& b = poly[(i + 1) % m];
        twice += a.real() * b.imag() - b.real() * a.imag();
    }
    return 0.5 * std::abs(twice);
}

}  // namespace

GapReport point_gap_metric(const std::vector<cx>& loop, cx reference, double tolerance_area) {
    if (loop.size() < 8)
        throw std::invalid_argument("point_gap_metric: loop too short");
    double total_arg = 0.0;
    for (size_t i = 0; i < loop.size(); ++i) {
        const cx a = loop[i] - reference;
        const cx b = loop[(i + 1) % loop.size()] - reference;
        if (std::abs(a) < 1e-9)
            throw std::invalid_argument("point_gap_metric: reference lies on the loop");
        total_arg += std::arg(b / a);
    }
    GapReport report;
    report.kind = GapReport::Kind::point;
    report.winding = static_cast<int>(std::lround(total_arg / (2.0 * pi)));
    report.loop_area = shoelace_area(loop);
    report.is_closed = report.loop_area < tolerance_area;
    report.authoritative = true;
    return report;
}

GapReport point_gap_from_spectrum(const SpectrumResult& spectrum, cx reference,
                                  double tolerance_area) {
    std::vector<cx> cloud;
    cloud.reserve(spectrum.eigenvalues.size());
    for (int i = 0; i < spectrum.eigenvalues.size(); ++i)
        cloud.push_back(spectrum.eigenvalues(i));
    cx centroid = std::accumulate(cloud.begin(), cloud.end(), cx{0, 0});
    centroid /= static_cast<double>(cloud.size());
    std::sort(cloud.begin(), cloud.end(), [&](cx a, cx b) {
        return std::arg(a - centroid) < std::arg(b - centroid);
    });

    GapReport report;
    report.kind = GapReport::Kind::point;
    report.loop_area = shoelace_area(cloud);
    report.is_closed = report.loop_area < tolerance_area;
    report.authoritative = false;
    bool reference_enclosed = true;
    double total_arg = 0.0;
    for (size_t i = 0; i < cloud.size(); ++i) {
        const cx a = cloud[i] - reference;
        const cx b = cloud[(i + 1) % cloud.size()] - reference;
        if (std::abs(a) < 1e-9) {
            reference_enclosed = false;
            break;
        }
        total_arg += std::arg(b / a);
    }
    report.winding = reference_enclosed
                         ? static_cast<int>(std::lround(total_arg / (2.0 * pi)))
                         : 0;
    return report;
}

GapReport line_gap_metric(const SpectrumResult& spectrum, const LineSpec& line,
                          double tolerance) {
    const double dnorm = std::abs(line.direction);
    if (!(dnorm > 0.0) || !std::isfinite(dnorm))
        throw std::invalid_argument("line_gap_metric: malformed line direction");
    const cx dir = line.direction / dnorm;

    GapReport report;
    report.kind = GapReport::Kind::line;
    report.line = LineSpec{line.point, dir};
    double min_dist = std::numeric_limits<double>::infinity();
    bool above = false, below = false;
    for (int i = 0; i < spectrum.quasi_energies.size(); ++i) {
        const cx rel = (spectrum.quasi_energies(i) - line.point) / dir;
        const double signed_dist = rel.imag();
        min_dist = std::min(min_dist, std::abs(signed_dist));
        if (signed_dist > 0) above = true;
        if (signed_dist < 0) below = true;
    }
    report.min_line_distance = min_dist;
    report.both_sides = above && below;
    report.is_closed = report.both_sides && min_dist < tolerance;
    return report;
}

LocalizationProfile skin_localization(const SpectrumResult& spectrum) {
    const int dim = static_cast<int>(spectrum.eigenvalues.size());
    const int num_sites = dim / 2;
    LocalizationProfile profile;
    profile.site_population = VectorXd::Zero(num_sites);
    profile.participation_ratio.resize(dim);
    for (int v = 0; v < dim; ++v) {
        double inverse_pr = 0.0;
        for (int s = 0; s < num_sites; ++s) {
            const double w = std::norm(spectrum.right_eigenvectors(2 * s, v)) +
                             std::norm(spectrum.right_eigenvectors(2 * s + 1, v));
            profile.site_population(s) += w;
            inverse_pr += w * w;
        }
        profile.participation_ratio(v) = 1.0 / inverse_pr;
    }
    return profile;
}

std::pair<double, double> homogeneous_critical_angle(double theta1) {
    return {mod_2pi(pi - theta1), mod_2pi(pi + theta1)};
}

}  // namespace qwsense
