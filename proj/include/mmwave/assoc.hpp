#pragma once

#include <vector>

#include <Eigen/Dense>

#include "mmwave/detector.hpp"

namespace mmwave {

enum class GateMode { k2D, k3D };

struct AssocConfig {
    double p_d = 0.9;        // constant detection probability
    double mu_c = 4.0;       // clutter mean per frame
    double f_c = 1.0 / 3600; // clutter spatial density, uniform over the ROI
    double p_g = 0.95;       // gate probability
    int n_iter = 10;         // SPA iterations
    GateMode gate_mode = GateMode::k3D;

    void validate() const;
};

/// Predicted track summary used by gating and association.
struct TrackPrediction {
    Eigen::Vector4d x = Eigen::Vector4d::Zero();      // x_hat(t|t-1)
    Eigen::Matrix4d sigma = Eigen::Matrix4d::Zero();  // Sigma(t|t-1)
    double theta = 0.0;  // azimuth used to build H' in the 3D gate
};

/// Soft association output. beta is K x (H+1) with column 0 the miss
/// hypothesis; xi is H x (K+1) with column 0 the clutter hypothesis.
/// gates(k, h) marks the valid region membership.
struct AssocResult {
    Eigen::MatrixXd beta;
    Eigen::MatrixXd xi;
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> gates;
};

/// Chi-square quantile, used for gate thresholds.
double chi_square_quantile(double p, int dof);

/// Position measurement matrix H (2x4).
Eigen::Matrix<double, 2, 4> measurement_matrix();
/// Radial-velocity-augmented matrix H' (3x4) built with sin/cos theta.
Eigen::Matrix<double, 3, 4> measurement_matrix_3d(double theta);

/// 2-dof Mahalanobis gate on position. Throws on singular innovation
/// covariance.
bool gate_2d(const Measurement& meas, const TrackPrediction& pred, double p_g);

/// 3-dof gate on [px, py, v_r] with R' = blkdiag(R, var_v).
bool gate_3d(const Measurement& meas, const TrackPrediction& pred, double p_g);

/// Initial messages: beta0(k, 0) = 1 - P_D, beta0(k, h) = P_D * N(z_h;
/// H x_k, S_kh) inside the gate and 0 outside; xi0(h, 0) = mu_c * f_c,
/// xi0(h, k) = gate indicator.
struct InitialMessages {
    Eigen::MatrixXd beta0;  // K x (H+1)
    Eigen::MatrixXd xi0;    // H x (K+1)
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> gates;  // K x H
};

InitialMessages init_messages(const std::vector<TrackPrediction>& tracks,
                              const std::vector<Measurement>& measurements,
                              const AssocConfig& cfg);

/// Iterate the two message equations n_iter times and normalize.
AssocResult spa_iterate(const Eigen::MatrixXd& beta0, const Eigen::MatrixXd& xi0,
                        int n_iter);

/// Gate + init + iterate in one call.
AssocResult associate(const std::vector<TrackPrediction>& tracks,
                      const std::vector<Measurement>& measurements,
                      const AssocConfig& cfg);

}  // namespace mmwave
