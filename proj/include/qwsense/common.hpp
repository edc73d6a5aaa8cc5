#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qwsense {

using cx = std::complex<double>;
using Eigen::Matrix2cd;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using Eigen::VectorXi;

inline constexpr double pi = std::numbers::pi;

/// Spectrum is degenerate where a unique selection was required.
struct degeneracy_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An iterative numerical procedure failed to reach its tolerance.
struct convergence_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Eigenvector continuation could not identify a unique branch.
struct tracking_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double mod_2pi(double a) {
    double r = std::fmod(a, 2.0 * pi);
    if (r < 0) r += 2.0 * pi;
    return r;
}

}  // namespace qwsense
