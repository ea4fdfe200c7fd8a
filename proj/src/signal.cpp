#include "mmwave/signal.hpp"

#include <cmath>
#include <stdexcept>

namespace mmwave {

double wrap_two_pi(double w) {
    double out = std::fmod(w, 2.0 * kPi);
    if (out < 0.0) out += 2.0 * kPi;
    return out;
}

double wrap_pi(double w) {
    double out = std::fmod(w + kPi, 2.0 * kPi);
    if (out < 0.0) out += 2.0 * kPi;
    out -= kPi;
    return out == -kPi ? kPi : out;  // (-pi, pi]
}

void RadarParams::validate() const {
    if (f_c <= 0 || mu <= 0 || T_s <= 0 || T_r <= 0 || T_ramp <= 0 || T_idle < 0 ||
        T_frame <= 0)
        throw std::invalid_argument("RadarParams: waveform constants must be positive");
    if (n_fast < 1 || n_slow < 1 || n_rx < 1)
        throw std::invalid_argument("RadarParams: N, M, L must be >= 1");
    if (T_r < T_ramp)
        throw std::invalid_argument("RadarParams: T_r must be >= T_ramp");
    if (d < 0)
        throw std::invalid_argument("RadarParams: element spacing must be nonnegative");
}

RadarLimits compute_limits(const RadarParams& p) {
    p.validate();
    const double lambda = p.wavelength();
    RadarLimits lim;
    lim.r_max = kSpeedOfLight / (2.0 * p.mu * p.T_s);
    lim.r_res = kSpeedOfLight / (2.0 * p.mu * p.T_ramp);
    lim.v_max = lambda / (4.0 * p.T_r);
    lim.v_res = lambda / (2.0 * p.n_slow * p.T_r);
    lim.theta_max = std::asin(std::min(1.0, lambda / (2.0 * p.spacing())));
    lim.theta_res = lambda / (p.n_rx * p.spacing());
    return lim;
}

double TruthTarget::radial_velocity() const {
    const double th = azimuth();
    return x[1] * std::sin(th) + x[3] * std::cos(th);
}

void ScenarioConfig::validate() const {
    if (roi_x_max <= roi_x_min || roi_y_max <= roi_y_min)
        throw std::invalid_argument("ScenarioConfig: empty ROI");
    if (init_pos_x_max < init_pos_x_min || init_pos_y_max < init_pos_y_min ||
        init_vel_x_max < init_vel_x_min || init_vel_y_max < init_vel_y_min)
        throw std::invalid_argument("ScenarioConfig: empty init range");
    if (n_targets < 0) throw std::invalid_argument("ScenarioConfig: n_targets < 0");
    if (clutter_mean < 0) throw std::invalid_argument("ScenarioConfig: clutter_mean < 0");
    if (n_frames < 1) throw std::invalid_argument("ScenarioConfig: n_frames < 1");
    if (T_frame <= 0) throw std::invalid_argument("ScenarioConfig: T_frame <= 0");
}

Eigen::Matrix4d cv_transition(double T) {
    Eigen::Matrix4d A = Eigen::Matrix4d::Identity();
    A(0, 1) = T;
    A(2, 3) = T;
    return A;
}

Eigen::Matrix<double, 4, 2> cv_noise_gain(double T) {
    Eigen::Matrix<double, 4, 2> G = Eigen::Matrix<double, 4, 2>::Zero();
    G(0, 0) = 0.5 * T * T;
    G(1, 0) = T;
    G(2, 1) = 0.5 * T * T;
    G(3, 1) = T;
    return G;
}

std::vector<TruthTarget> propagate_targets(const std::vector<TruthTarget>& targets,
                                           const Eigen::Matrix4d& A,
                                           const Eigen::Matrix<double, 4, 2>& Gamma,
                                           const Eigen::Matrix2d& Q, Rng& rng) {
    // Q is diagonal in every configuration we use; draw component-wise.
    std::normal_distribution<double> unit(0.0, 1.0);
    const Eigen::Matrix2d sqrtQ = Q.llt().matrixL();
    std::vector<TruthTarget> out;
    out.reserve(targets.size());
    for (const TruthTarget& t : targets) {
        Eigen::Vector2d w{unit(rng), unit(rng)};
        TruthTarget nt = t;
        nt.x = A * t.x + Gamma * (sqrtQ * w);
        out.push_back(nt);
    }
    return out;
}

Eigen::Vector3d state_to_freq(double r, double v, double theta,
                              const RadarLimits& lim) {
    Eigen::Vector3d w;
    w[0] = 2.0 * kPi * r / lim.r_max;
    double wy = kPi * v / lim.v_max;
    wy = std::fmod(wy + kPi, 2.0 * kPi);
    if (wy < 0.0) wy += 2.0 * kPi;
    w[1] = wy - kPi;  // [-pi, pi)
    w[2] = kPi * std::sin(theta);
    return w;
}

BasebandCube synthesize_frame(const RadarParams& params,
                              const std::vector<PointEcho>& targets,
                              double sigma2, Rng& rng) {
    params.validate();
    if (sigma2 < 0.0) throw std::invalid_argument("synthesize_frame: sigma2 < 0");
    for (const PointEcho& t : targets)
        if (!std::isfinite(t.gamma.real()) || !std::isfinite(t.gamma.imag()))
            throw std::invalid_argument("synthesize_frame: non-finite amplitude");

    const int N = params.n_fast, M = params.n_slow, L = params.n_rx;
    const RadarLimits lim = compute_limits(params);
    BasebandCube cube(N, M, L);
    cube.noise_var = sigma2;

    std::vector<cd> ax(N), ay(M);
    for (const PointEcho& t : targets) {
        const Eigen::Vector3d w = state_to_freq(t.r, t.v, t.theta, lim);
        for (int n = 0; n < N; ++n) ax[n] = std::polar(1.0, n * w[0]);
        for (int m = 0; m < M; ++m) ay[m] = std::polar(1.0, m * w[1]);
        for (int l = 0; l < L; ++l) {
            const cd gl = t.gamma * std::polar(1.0, l * w[2]);
            cd* s = cube.snapshot(l).data();
            for (int n = 0; n < N; ++n) {
                const cd gx = gl * ax[n];
                cd* row = s + static_cast<std::size_t>(n) * M;
                for (int m = 0; m < M; ++m) row[m] += gx * ay[m];
            }
        }
    }
    if (sigma2 > 0.0) {
        std::normal_distribution<double> noise(0.0, std::sqrt(sigma2 / 2.0));
        for (cd& v : cube.data) v += cd{noise(rng), noise(rng)};
    }
    return cube;
}

Scenario generate_scenario(const ScenarioConfig& cfg, Rng& rng) {
    cfg.validate();
    std::uniform_real_distribution<double> upx(cfg.init_pos_x_min, cfg.init_pos_x_max);
    std::uniform_real_distribution<double> upy(cfg.init_pos_y_min, cfg.init_pos_y_max);
    std::uniform_real_distribution<double> uvx(cfg.init_vel_x_min, cfg.init_vel_x_max);
    std::uniform_real_distribution<double> uvy(cfg.init_vel_y_min, cfg.init_vel_y_max);
    std::uniform_real_distribution<double> ucx(cfg.roi_x_min, cfg.roi_x_max);
    std::uniform_real_distribution<double> ucy(cfg.roi_y_min, cfg.roi_y_max);
    std::uniform_real_distribution<double> uph(0.0, 2.0 * kPi);
    std::poisson_distribution<int> clutter_count(cfg.clutter_mean);

    std::vector<TruthTarget> targets;
    targets.reserve(cfg.n_targets);
    for (int k = 0; k < cfg.n_targets; ++k) {
        TruthTarget t;
        t.label = k + 1;
        t.x << upx(rng), uvx(rng), upy(rng), uvy(rng);
        t.gamma = std::polar(1.0, uph(rng));  // unit modulus; SNR applied at synthesis
        targets.push_back(t);
    }

    const Eigen::Matrix4d A = cv_transition(cfg.T_frame);
    const Eigen::Matrix<double, 4, 2> Gamma = cv_noise_gain(cfg.T_frame);
    const Eigen::Matrix2d Q = cfg.process_noise.asDiagonal();

    Scenario sc;
    sc.truth.reserve(cfg.n_frames);
    sc.clutter.reserve(cfg.n_frames);
    for (int t = 0; t < cfg.n_frames; ++t) {
        if (t > 0) targets = propagate_targets(targets, A, Gamma, Q, rng);
        sc.truth.push_back(targets);
        std::vector<Eigen::Vector2d> cl;
        const int n_cl = cfg.clutter_mean > 0.0 ? clutter_count(rng) : 0;
        cl.reserve(n_cl);
        for (int i = 0; i < n_cl; ++i) cl.push_back({ucx(rng), ucy(rng)});
        sc.clutter.push_back(std::move(cl));
    }
    return sc;
}

}  // namespace mmwave
