#pragma once

#include <complex>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mmwave/signal.hpp"

namespace mmwave {

/// CA-CFAR configuration. train_band gives the outer half-extents of
/// the training rectangle (guard included), so the training cell count
/// is (2tx+1)(2ty+1) - (2gx+1)(2gy+1).
struct CfarConfig {
    double p_fa = 0.01;          // per-frame design false alarm probability
    int train_x = 5, train_y = 4;
    int guard_x = 3, guard_y = 3;
    std::optional<double> alpha; // override for the computed multiplier
    int K_max = 30;
    int K_invalid = 3;
    int oversample = 4;          // detection grid oversampling

    int training_cell_count() const {
        return (2 * train_x + 1) * (2 * train_y + 1) -
               (2 * guard_x + 1) * (2 * guard_y + 1);
    }
    void validate() const;
};

/// One extracted sinusoid with its mapped target state.
struct Detection {
    Eigen::Vector3d omega = Eigen::Vector3d::Zero();  // wx, wy in [0,2pi); wz in (-pi,pi]
    std::vector<cd> gains;   // per-antenna complex gains g_hat
    cd gamma{0.0, 0.0};      // amplitude from the azimuth fit
    double r = 0.0;          // m
    double v = 0.0;          // m/s
    double theta = 0.0;      // rad
    double snr_db = 0.0;     // integrated SNR estimate
    bool passed_threshold = false;
};

/// Cartesian pseudo-measurement with CRB-scaled covariance.
struct Measurement {
    Eigen::Vector2d z = Eigen::Vector2d::Zero();  // [px, py] m
    Eigen::Matrix2d R = Eigen::Matrix2d::Identity();
    double v_r = 0.0;    // radial velocity m/s
    double var_v = 0.0;  // its variance
    double theta = 0.0;  // rad
    double r = 0.0;      // m
    int frame = 0;
    double snr_db = 0.0;
    bool theta_clamped = false;
};

/// Solve the CA-CFAR multiplier for the multi-snapshot cell-averaging
/// statistic: the per-cell false alarm probability of
/// T_cut > alpha * mean(T_train) where every statistic is
/// sum_l |<a, Y_l>|^2 / (NM). Under noise the exceedance probability is
/// a ratio of independent scaled chi-squares; alpha comes from inverting
/// that distribution numerically.
double cfar_threshold_multiplier(double p_fa_cell, int n_train, int snapshots);

/// Per-snapshot oversampled spectra of one frame, evaluated on the
/// (os*N) x (os*M) grid.
struct SpectrumSet {
    int n_fast = 0, n_slow = 0, oversample = 1;
    std::vector<std::vector<cd>> F;  // [L][(os*N) * (os*M)]

    int grid_rows() const { return n_fast * oversample; }
    int grid_cols() const { return n_slow * oversample; }
};

/// Frequency-domain parameters of one extracted sinusoid.
struct SinusoidEstimate {
    double wx = 0.0, wy = 0.0;
    std::vector<cd> gains;  // per snapshot
};

SpectrumSet compute_spectra(const BasebandCube& cube, int oversample);

/// Residue spectra via the Dirichlet-kernel closed form: the FFT is
/// never recomputed, each sinusoid is subtracted analytically.
std::vector<std::vector<cd>> residue_spectrum(
    const SpectrumSet& spectra, std::span<const SinusoidEstimate> detections);

/// Multi-snapshot periodogram S(w) = sum_l |<a_N(wx) a_M^T(wy), Z_l>|^2 / (NM).
double mnomp_objective(const BasebandCube& Z, double wx, double wy);
void mnomp_objective_derivs(const BasebandCube& Z, double wx, double wy,
                            Eigen::Vector2d& grad, Eigen::Matrix2d& hess);

struct RefineResult {
    double wx = 0.0, wy = 0.0;
    std::vector<cd> gains;
};

/// One damped Newton step on S over Z (residue plus the refined
/// component); the step is kept only if S increases, halving up to 10
/// times, and gains are re-solved at the final frequencies.
RefineResult newton_refine_2d(const BasebandCube& Z, double wx, double wy);

struct DetectionResult {
    std::vector<Detection> detections;
    double sigma2_hat = 0.0;
    /// Total residual energy after each greedy iteration (diagnostics).
    std::vector<double> residual_trace;
};

/// Streamlined 2D multi-snapshot NOMP with CFAR stopping and the
/// K_invalid anti-masking rule, plus the FFT + CA-CFAR baseline.
/// A detector instance caches FFT plans; reuse it across frames of the
/// same geometry. Instances are independent, one per thread.
class MnompDetector {
public:
    MnompDetector(const RadarParams& params, const CfarConfig& cfg);
    ~MnompDetector();
    MnompDetector(MnompDetector&&) noexcept;
    MnompDetector& operator=(MnompDetector&&) noexcept;

    DetectionResult detect(const BasebandCube& cube);           // 2D-MNOMP-CFAR
    DetectionResult detect_fft_cfar(const BasebandCube& cube);  // baseline

    const RadarParams& params() const;
    const RadarLimits& limits() const;
    /// Multiplier actually used by detect(); the false-alarm budget is
    /// spread over the oversampled search grid.
    double alpha_mnomp() const;
    /// Multiplier used by detect_fft_cfar(); budget over the N*M bins.
    double alpha_fft() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

DetectionResult mnomp_detect(const BasebandCube& cube, const RadarParams& params,
                             const CfarConfig& cfg);
DetectionResult fft_cfar_detect(const BasebandCube& cube, const RadarParams& params,
                                const CfarConfig& cfg);

/// Least-squares azimuth fit to the gain vector: periodogram argmax on
/// an oversampled grid plus Newton refinement. Returns (omega_z, gamma).
std::pair<double, cd> azimuth_ls(std::span<const cd> gains);

struct PolarState {
    double r = 0.0, v = 0.0, theta = 0.0;
};

/// Invert the frequency map: r from wx, v from wy taken in (-pi, pi],
/// theta = asin(wz/pi). Throws if |wz| > pi.
PolarState freq_to_state(const Eigen::Vector3d& omega, const RadarLimits& lim);

/// Build the Cartesian pseudo-measurement, R = kappa * CRB([px,py])
/// evaluated at the estimate.
Measurement to_pseudo_measurement(const Detection& det, const RadarParams& params,
                                  double sigma2_hat, double kappa);

/// Single-linkage clustering: two measurements link when both the
/// position distance and the radial-velocity difference are inside the
/// gates. Each cluster collapses to its mean.
std::vector<Measurement> cluster_measurements(const std::vector<Measurement>& meas,
                                              double d_pos, double d_vel);

}  // namespace mmwave
