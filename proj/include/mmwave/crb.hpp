#pragma once

#include <Eigen/Dense>

#include "mmwave/signal.hpp"

namespace mmwave {

/// Operating point of the single-sinusoid observation model, with the
/// unknown vector ordered [omega_x, omega_y, omega_z, phi, g, sigma2].
struct SignalPoint {
    Eigen::Vector3d omega = Eigen::Vector3d::Zero();
    double g = 1.0;       // amplitude modulus, > 0
    double phi = 0.0;     // phase, rad
    double sigma2 = 1.0;  // noise variance, > 0
    int n_fast = 128;
    int n_slow = 64;
    int n_rx = 8;

    void validate() const;  // throws std::invalid_argument
};

/// Fisher information of [omega_x, omega_y, omega_z, phi, g, sigma2]
/// for y = gamma * a(omega) + CN(0, sigma2 I) over N*M*L samples.
///
/// Block structure: the (omega, phi) block is (2NMLg^2/sigma^2) * Phi
/// with Phi built from first/second index moments; the g and sigma2
/// entries are 2NML/sigma^2 and NML/sigma^4 and decouple from the rest.
Eigen::Matrix<double, 6, 6> fisher_matrix(const SignalPoint& p);

/// Closed-form CRB of the three frequencies:
/// diag(6 sigma^2 / (NML g^2) * [1/(N^2-1), 1/(M^2-1), 1/(L^2-1)]).
/// Requires N, M, L >= 2.
Eigen::Matrix3d crb_freq(const SignalPoint& p);

/// CRB of (r, v, theta) via the diagonal reparameterization Jacobian
/// diag(r_max/2pi, v_max/pi, 1/(pi cos(theta))). Requires |theta| < pi/2.
Eigen::Matrix3d crb_rvtheta(const SignalPoint& p, const RadarLimits& lim,
                            double theta);

/// CRB of the Cartesian position [px, py] for a single target at
/// (r, theta); the closed form in r_max, r, sin/cos theta, N^2-1, L^2-1.
Eigen::Matrix2d crb_pxpy(const SignalPoint& p, const RadarLimits& lim, double r,
                         double theta);

/// CRB of [px, py, v]: block-diagonal with the radial-velocity bound
/// (v_max/pi)^2 * 6 sigma^2 / (NML g^2 (M^2-1)).
Eigen::Matrix3d crb_pxpyv(const SignalPoint& p, const RadarLimits& lim, double r,
                          double theta);

}  // namespace mmwave
