#include "mmwave/crb.hpp"

#include <cmath>
#include <stdexcept>

namespace mmwave {

void SignalPoint::validate() const {
    if (g <= 0.0) throw std::invalid_argument("SignalPoint: g must be > 0");
    if (sigma2 <= 0.0) throw std::invalid_argument("SignalPoint: sigma2 must be > 0");
    if (n_fast < 1 || n_slow < 1 || n_rx < 1)
        throw std::invalid_argument("SignalPoint: dimensions must be >= 1");
}

Eigen::Matrix<double, 6, 6> fisher_matrix(const SignalPoint& p) {
    p.validate();
    const double N = p.n_fast, M = p.n_slow, L = p.n_rx;
    const double NML = N * M * L;
    const double g2 = p.g * p.g;

    Eigen::Matrix4d Phi;
    Phi << (N - 1) * (2 * N - 1) / 6.0, (M - 1) * (N - 1) / 4.0,
        (L - 1) * (N - 1) / 4.0, (N - 1) / 2.0,
        (N - 1) * (M - 1) / 4.0, (M - 1) * (2 * M - 1) / 6.0,
        (L - 1) * (M - 1) / 4.0, (M - 1) / 2.0,
        (N - 1) * (L - 1) / 4.0, (M - 1) * (L - 1) / 4.0,
        (L - 1) * (2 * L - 1) / 6.0, (L - 1) / 2.0,
        (N - 1) / 2.0, (M - 1) / 2.0, (L - 1) / 2.0, 1.0;

    Eigen::Matrix<double, 6, 6> F = Eigen::Matrix<double, 6, 6>::Zero();
    F.topLeftCorner<4, 4>() = (2.0 * NML * g2 / p.sigma2) * Phi;
    F(4, 4) = 2.0 * NML / p.sigma2;
    F(5, 5) = NML / (p.sigma2 * p.sigma2);
    return F;
}

Eigen::Matrix3d crb_freq(const SignalPoint& p) {
    p.validate();
    if (p.n_fast < 2 || p.n_slow < 2 || p.n_rx < 2)
        throw std::invalid_argument("crb_freq: all dimensions must be >= 2");
    const double N = p.n_fast, M = p.n_slow, L = p.n_rx;
    const double pref = 6.0 * p.sigma2 / (N * M * L * p.g * p.g);
    Eigen::Vector3d d{pref / (N * N - 1.0), pref / (M * M - 1.0),
                      pref / (L * L - 1.0)};
    return d.asDiagonal();
}

Eigen::Matrix3d crb_rvtheta(const SignalPoint& p, const RadarLimits& lim,
                            double theta) {
    const double c = std::cos(theta);
    if (c < 1e-12) throw std::invalid_argument("crb_rvtheta: |theta| must be < pi/2");
    const Eigen::Matrix3d Cw = crb_freq(p);
    Eigen::Vector3d j{lim.r_max / (2.0 * kPi), lim.v_max / kPi, 1.0 / (kPi * c)};
    return j.asDiagonal() * Cw * j.asDiagonal();
}

Eigen::Matrix2d crb_pxpy(const SignalPoint& p, const RadarLimits& lim, double r,
                         double theta) {
    p.validate();
    if (p.n_fast < 2 || p.n_slow < 2 || p.n_rx < 2)
        throw std::invalid_argument("crb_pxpy: all dimensions must be >= 2");
    const double c = std::cos(theta);
    if (c < 1e-12) throw std::invalid_argument("crb_pxpy: |theta| must be < pi/2");
    const double N = p.n_fast, M = p.n_slow, L = p.n_rx;
    const double s = std::sin(theta);
    const double pref =
        6.0 * p.sigma2 / (kPi * kPi * N * M * L * p.g * p.g);
    const double a = lim.r_max * lim.r_max / (4.0 * (N * N - 1.0));
    const double b = r * r / (L * L - 1.0);
    Eigen::Matrix2d C;
    C(0, 0) = a * s * s + b;
    C(0, 1) = (a - b / (c * c)) * s * c;
    C(1, 0) = C(0, 1);
    C(1, 1) = a * c * c + b * (s / c) * (s / c);
    return pref * C;
}

Eigen::Matrix3d crb_pxpyv(const SignalPoint& p, const RadarLimits& lim, double r,
                          double theta) {
    const double M = p.n_slow;
    Eigen::Matrix3d C = Eigen::Matrix3d::Zero();
    C.topLeftCorner<2, 2>() = crb_pxpy(p, lim, r, theta);
    C(2, 2) = (lim.v_max / kPi) * (lim.v_max / kPi) * 6.0 * p.sigma2 /
              (p.n_fast * M * p.n_rx * p.g * p.g * (M * M - 1.0));
    return C;
}

}  // namespace mmwave
