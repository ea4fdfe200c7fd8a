#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace mmwave {

using cd = std::complex<double>;
using Rng = std::mt19937_64;

inline constexpr double kSpeedOfLight = 3.0e8;  // m/s, as used throughout
inline constexpr double kPi = 3.14159265358979323846;

/// Wrap an angle into [0, 2*pi).
double wrap_two_pi(double w);
/// Wrap an angle into (-pi, pi].
double wrap_pi(double w);

/// LFMCW waveform and array constants.
///
/// Units: f_c [Hz], mu [Hz/s], T_s [s] (ADC sample interval), T_r [s]
/// (chirp repetition interval), T_ramp/T_idle [s], d [m] (element
/// spacing, defaults to lambda/2), T_frame [s].
struct RadarParams {
    double f_c = 77.0e9;
    double mu = 3.2e12;
    double T_s = 4.6875e-7;
    double T_r = 160.0e-6;
    double T_ramp = 60.0e-6;
    double T_idle = 100.0e-6;
    double d = 0.0;  // 0 means "use lambda/2"
    int n_fast = 128;   // N
    int n_slow = 64;    // M
    int n_rx = 8;       // L
    double T_frame = 0.1;

    double wavelength() const { return kSpeedOfLight / f_c; }
    double spacing() const { return d > 0.0 ? d : 0.5 * wavelength(); }
    void validate() const;  // throws std::invalid_argument
};

/// Unambiguous ranges and linear-processing resolutions.
struct RadarLimits {
    double r_max;      // m
    double r_res;      // m
    double v_max;      // m/s
    double v_res;      // m/s
    double theta_max;  // rad
    double theta_res;  // rad, at boresight
};

RadarLimits compute_limits(const RadarParams& p);

/// One point target in the plane, CV state [px, vx, py, vy].
struct TruthTarget {
    std::int64_t label = 0;
    Eigen::Vector4d x = Eigen::Vector4d::Zero();
    cd gamma{1.0, 0.0};

    double range() const { return std::hypot(x[0], x[2]); }
    double azimuth() const { return std::atan2(x[0], x[2]); }
    /// Radial velocity v = vx*sin(theta) + vy*cos(theta).
    double radial_velocity() const;
};

/// One frame of baseband data, N x M x L complex.
/// Memory layout: snapshot-major, (l*N + n)*M + m.
struct BasebandCube {
    int n_fast = 0;
    int n_slow = 0;
    int n_rx = 0;
    std::vector<cd> data;
    std::optional<double> noise_var;

    BasebandCube() = default;
    BasebandCube(int N, int M, int L)
        : n_fast(N), n_slow(M), n_rx(L),
          data(static_cast<std::size_t>(N) * M * L) {}

    cd& at(int n, int m, int l) {
        return data[(static_cast<std::size_t>(l) * n_fast + n) * n_slow + m];
    }
    const cd& at(int n, int m, int l) const {
        return data[(static_cast<std::size_t>(l) * n_fast + n) * n_slow + m];
    }
    std::span<cd> snapshot(int l) {
        return {data.data() + static_cast<std::size_t>(l) * n_fast * n_slow,
                static_cast<std::size_t>(n_fast) * n_slow};
    }
    std::span<const cd> snapshot(int l) const {
        return {data.data() + static_cast<std::size_t>(l) * n_fast * n_slow,
                static_cast<std::size_t>(n_fast) * n_slow};
    }
};

/// Scenario generation knobs (ROI rectangle, initial state ranges,
/// clutter mean, per-target integrated SNR).
struct ScenarioConfig {
    double roi_x_min = -30.0, roi_x_max = 30.0;
    double roi_y_min = 0.0, roi_y_max = 60.0;
    int n_targets = 6;
    double init_pos_x_min = -10.0, init_pos_x_max = 10.0;
    double init_pos_y_min = 6.0, init_pos_y_max = 24.0;
    double init_vel_x_min = -3.0, init_vel_x_max = 3.0;
    double init_vel_y_min = -1.0, init_vel_y_max = 5.0;
    double T_frame = 0.1;
    int n_frames = 60;
    Eigen::Vector2d process_noise{1e-6, 1e-6};  // diagonal of Q
    double clutter_mean = 4.0;                  // mu_c
    double snr_db = 19.0;                       // integrated, NM|gamma|^2/sigma^2
    std::uint64_t seed = 1;

    double roi_area() const {
        return (roi_x_max - roi_x_min) * (roi_y_max - roi_y_min);
    }
    void validate() const;
};

/// CV transition matrix for frame interval T.
Eigen::Matrix4d cv_transition(double T);
/// Process-noise gain, piecewise-constant white acceleration:
/// [[T^2/2,0],[T,0],[0,T^2/2],[0,T]].
Eigen::Matrix<double, 4, 2> cv_noise_gain(double T);

/// x <- A x + Gamma w, w ~ N(0, Q). Labels preserved.
std::vector<TruthTarget> propagate_targets(const std::vector<TruthTarget>& targets,
                                           const Eigen::Matrix4d& A,
                                           const Eigen::Matrix<double, 4, 2>& Gamma,
                                           const Eigen::Matrix2d& Q, Rng& rng);

/// Target as seen by the waveform: polar state plus complex amplitude.
struct PointEcho {
    double r = 0.0;      // m
    double v = 0.0;      // m/s (radial)
    double theta = 0.0;  // rad
    cd gamma{1.0, 0.0};
};

/// Map a polar state onto the three angular frequencies
/// (omega_x, omega_y, omega_z). omega_y is wrapped into [-pi, pi),
/// which is where velocity aliasing happens physically.
Eigen::Vector3d state_to_freq(double r, double v, double theta,
                              const RadarLimits& lim);

/// Synthesize one baseband frame: sum of 3D complex exponentials plus
/// i.i.d. complex Gaussian noise of variance sigma2.
BasebandCube synthesize_frame(const RadarParams& params,
                              const std::vector<PointEcho>& targets,
                              double sigma2, Rng& rng);

/// Truth trajectory and measurement-level clutter for one run.
struct Scenario {
    /// truth[t] = target states at frame t.
    std::vector<std::vector<TruthTarget>> truth;
    /// clutter[t] = clutter positions (px, py) at frame t.
    std::vector<std::vector<Eigen::Vector2d>> clutter;
};

Scenario generate_scenario(const ScenarioConfig& cfg, Rng& rng);

}  // namespace mmwave
