#include "mmwave/assoc.hpp"

#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>

namespace mmwave {

void AssocConfig::validate() const {
    if (p_d <= 0.0 || p_d >= 1.0)
        throw std::invalid_argument("AssocConfig: p_d must be in (0, 1)");
    if (p_g <= 0.0 || p_g >= 1.0)
        throw std::invalid_argument("AssocConfig: p_g must be in (0, 1)");
    if (n_iter < 1) throw std::invalid_argument("AssocConfig: n_iter must be >= 1");
    if (mu_c < 0.0) throw std::invalid_argument("AssocConfig: mu_c must be >= 0");
    if (f_c <= 0.0) throw std::invalid_argument("AssocConfig: f_c must be > 0");
}

double chi_square_quantile(double p, int dof) {
    boost::math::chi_squared_distribution<double> dist(dof);
    return boost::math::quantile(dist, p);
}

Eigen::Matrix<double, 2, 4> measurement_matrix() {
    Eigen::Matrix<double, 2, 4> H = Eigen::Matrix<double, 2, 4>::Zero();
    H(0, 0) = 1.0;
    H(1, 2) = 1.0;
    return H;
}

Eigen::Matrix<double, 3, 4> measurement_matrix_3d(double theta) {
    Eigen::Matrix<double, 3, 4> H = Eigen::Matrix<double, 3, 4>::Zero();
    H(0, 0) = 1.0;
    H(1, 2) = 1.0;
    H(2, 1) = std::sin(theta);
    H(2, 3) = std::cos(theta);
    return H;
}

namespace {

double mahalanobis2_2d(const Measurement& meas, const TrackPrediction& pred,
                       Eigen::Matrix2d* S_out) {
    const auto H = measurement_matrix();
    const Eigen::Matrix2d S = H * pred.sigma * H.transpose() + meas.R;
    Eigen::LLT<Eigen::Matrix2d> llt(S);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("gate: singular innovation covariance");
    const Eigen::Vector2d e = meas.z - H * pred.x;
    if (S_out) *S_out = S;
    return e.dot(llt.solve(e));
}

double mahalanobis2_3d(const Measurement& meas, const TrackPrediction& pred) {
    const auto H = measurement_matrix_3d(pred.theta);
    Eigen::Matrix3d R = Eigen::Matrix3d::Zero();
    R.topLeftCorner<2, 2>() = meas.R;
    R(2, 2) = meas.var_v;
    const Eigen::Matrix3d S = H * pred.sigma * H.transpose() + R;
    Eigen::LLT<Eigen::Matrix3d> llt(S);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("gate: singular innovation covariance");
    Eigen::Vector3d e;
    e << meas.z[0], meas.z[1], meas.v_r;
    e -= H * pred.x;
    return e.dot(llt.solve(e));
}

}  // namespace

bool gate_2d(const Measurement& meas, const TrackPrediction& pred, double p_g) {
    return mahalanobis2_2d(meas, pred, nullptr) <= chi_square_quantile(p_g, 2);
}

bool gate_3d(const Measurement& meas, const TrackPrediction& pred, double p_g) {
    return mahalanobis2_3d(meas, pred) <= chi_square_quantile(p_g, 3);
}

InitialMessages init_messages(const std::vector<TrackPrediction>& tracks,
                              const std::vector<Measurement>& measurements,
                              const AssocConfig& cfg) {
    cfg.validate();
    const int K = static_cast<int>(tracks.size());
    const int H = static_cast<int>(measurements.size());
    InitialMessages out;
    out.beta0 = Eigen::MatrixXd::Zero(K, H + 1);
    out.xi0 = Eigen::MatrixXd::Zero(H, K + 1);
    out.gates.setZero(K, H);

    const double d_gate =
        chi_square_quantile(cfg.p_g, cfg.gate_mode == GateMode::k3D ? 3 : 2);
    // Keeps the factor graph well-posed when mu_c * f_c underflows or
    // the clutter mean is configured to zero.
    const double clutter_intensity = std::max(cfg.mu_c * cfg.f_c, 1e-30);

    for (int h = 0; h < H; ++h) out.xi0(h, 0) = clutter_intensity;
    for (int k = 0; k < K; ++k) {
        out.beta0(k, 0) = 1.0 - cfg.p_d;
        for (int h = 0; h < H; ++h) {
            Eigen::Matrix2d S;
            const double q2 = mahalanobis2_2d(measurements[h], tracks[k], &S);
            const double q = cfg.gate_mode == GateMode::k3D
                                 ? mahalanobis2_3d(measurements[h], tracks[k])
                                 : q2;
            if (q > d_gate) continue;
            out.gates(k, h) = 1;
            const double det = S.determinant();
            out.beta0(k, h + 1) =
                cfg.p_d * std::exp(-0.5 * q2) / (2.0 * kPi * std::sqrt(det));
            out.xi0(h, k + 1) = 1.0;
        }
    }
    return out;
}

AssocResult spa_iterate(const Eigen::MatrixXd& beta0, const Eigen::MatrixXd& xi0,
                        int n_iter) {
    const int K = static_cast<int>(beta0.rows());
    const int H = static_cast<int>(xi0.rows());
    if (beta0.cols() != H + 1 || (H > 0 && xi0.cols() != K + 1))
        throw std::invalid_argument("spa_iterate: inconsistent message shapes");
    if ((beta0.array() < 0).any() || (xi0.array() < 0).any())
        throw std::invalid_argument("spa_iterate: negative initial messages");
    for (int k = 0; k < K; ++k)
        if (beta0(k, 0) <= 0.0)
            throw std::invalid_argument("spa_iterate: miss hypothesis has no mass");

    // delta(k, h): message w_k -> b_h; v(h, k): message b_h -> w_k
    Eigen::MatrixXd delta(K, H), v(H, K);
    for (int k = 0; k < K; ++k)
        for (int h = 0; h < H; ++h) delta(k, h) = beta0(k, h + 1) / beta0(k, 0);

    for (int it = 0; it < n_iter; ++it) {
        for (int h = 0; h < H; ++h) {
            double tot = xi0(h, 0);
            for (int k = 0; k < K; ++k) tot += xi0(h, k + 1) * delta(k, h);
            for (int k = 0; k < K; ++k) {
                const double denom = tot - xi0(h, k + 1) * delta(k, h);
                v(h, k) = denom > 0.0 ? xi0(h, k + 1) / denom : 0.0;
            }
        }
        for (int k = 0; k < K; ++k) {
            double tot = beta0(k, 0);
            for (int h = 0; h < H; ++h) tot += beta0(k, h + 1) * v(h, k);
            for (int h = 0; h < H; ++h) {
                const double denom = tot - beta0(k, h + 1) * v(h, k);
                delta(k, h) = beta0(k, h + 1) / denom;
            }
        }
    }

    AssocResult out;
    out.beta = Eigen::MatrixXd::Zero(K, H + 1);
    out.xi = Eigen::MatrixXd::Zero(H, K + 1);
    for (int k = 0; k < K; ++k) {
        double denom = beta0(k, 0);
        for (int h = 0; h < H; ++h) denom += beta0(k, h + 1) * v(h, k);
        out.beta(k, 0) = beta0(k, 0) / denom;
        for (int h = 0; h < H; ++h) out.beta(k, h + 1) = beta0(k, h + 1) * v(h, k) / denom;
    }
    for (int h = 0; h < H; ++h) {
        double denom = xi0(h, 0);
        for (int k = 0; k < K; ++k) denom += xi0(h, k + 1) * delta(k, h);
        if (denom <= 0.0) {
            out.xi(h, 0) = 1.0;  // unexplainable measurement: clutter/newborn
            continue;
        }
        out.xi(h, 0) = xi0(h, 0) / denom;
        for (int k = 0; k < K; ++k) out.xi(h, k + 1) = xi0(h, k + 1) * delta(k, h) / denom;
    }
    return out;
}

AssocResult associate(const std::vector<TrackPrediction>& tracks,
                      const std::vector<Measurement>& measurements,
                      const AssocConfig& cfg) {
    InitialMessages init = init_messages(tracks, measurements, cfg);
    AssocResult res = spa_iterate(init.beta0, init.xi0, cfg.n_iter);
    res.gates = std::move(init.gates);
    return res;
}

}  // namespace mmwave
