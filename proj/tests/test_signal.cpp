#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "mmwave/detector.hpp"
#include "mmwave/fft.hpp"
#include "mmwave/signal.hpp"

using namespace mmwave;

namespace {

// Table-1 waveform (real AWR1642 capture geometry).
RadarParams table1_params() {
    RadarParams p;
    p.f_c = 77.0e9;
    p.mu = 8.012e12;
    p.T_s = 2.0e-7;  // f_s = 5 MHz
    p.T_r = 59.0e-6;
    p.T_ramp = 56.0e-6;
    p.T_idle = 3.0e-6;
    p.n_fast = 128;
    p.n_slow = 64;
    p.n_rx = 4;
    p.T_frame = 0.1;
    return p;
}

// Simulation waveform: r_max = 100 m with T_s = T_ramp / N.
RadarParams sim_params() {
    RadarParams p;
    p.f_c = 77.0e9;
    p.T_ramp = 60.0e-6;
    p.T_idle = 100.0e-6;
    p.T_r = 160.0e-6;
    p.n_fast = 128;
    p.n_slow = 64;
    p.n_rx = 8;
    p.T_s = p.T_ramp / p.n_fast;
    p.mu = kSpeedOfLight / (2.0 * 100.0 * p.T_s);
    p.T_frame = 0.1;
    return p;
}

}  // namespace

TEST_CASE("compute_limits reproduces the table-1 figures") {
    const RadarLimits lim = compute_limits(table1_params());
    CHECK(lim.r_max == doctest::Approx(93.6).epsilon(1e-3));
    CHECK(lim.v_max == doctest::Approx(16.5).epsilon(1e-2));
}

TEST_CASE("compute_limits reproduces the simulation resolutions") {
    const RadarLimits lim = compute_limits(sim_params());
    CHECK(lim.r_max == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(lim.r_res == doctest::Approx(0.78).epsilon(0.01));
    CHECK(lim.v_res == doctest::Approx(0.19).epsilon(0.01));
    CHECK(lim.v_max == doctest::Approx(6.08).epsilon(1e-2));
}

TEST_CASE("half-wavelength spacing gives a full field of view") {
    const RadarLimits lim = compute_limits(sim_params());
    CHECK(lim.theta_max == doctest::Approx(kPi / 2).epsilon(1e-12));
    CHECK(lim.theta_res == doctest::Approx(2.0 / 8).epsilon(1e-12));
}

TEST_CASE("limits invariants hold") {
    for (const RadarParams& p : {table1_params(), sim_params()}) {
        const RadarLimits lim = compute_limits(p);
        CHECK(lim.r_res <= lim.r_max);
        CHECK(lim.v_res <= 2 * lim.v_max);
    }
}

TEST_CASE("noiseless CV propagation") {
    TruthTarget t;
    t.x << 0.0, 1.0, 0.0, 2.0;
    Rng rng(1);
    const auto out = propagate_targets({t}, cv_transition(0.1), cv_noise_gain(0.1),
                                       Eigen::Matrix2d::Zero(), rng);
    CHECK(out[0].x[0] == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(out[0].x[1] == doctest::Approx(1.0));
    CHECK(out[0].x[2] == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(out[0].x[3] == doctest::Approx(2.0));

    TruthTarget still;
    still.x << 3.0, 0.0, 4.0, 0.0;
    const auto out2 = propagate_targets({still}, cv_transition(0.1), cv_noise_gain(0.1),
                                        Eigen::Matrix2d::Zero(), rng);
    CHECK((out2[0].x - still.x).norm() == 0.0);
}

TEST_CASE("process noise sample covariance matches Gamma Q Gamma^T") {
    const double T = 0.1;
    const Eigen::Matrix2d Q = Eigen::Vector2d{1e-6, 1e-6}.asDiagonal();
    const auto Gamma = cv_noise_gain(T);
    const Eigen::Matrix4d target = Gamma * Q * Gamma.transpose();

    TruthTarget t;  // zero state, so the output IS the noise sample
    Rng rng(7);
    const int n = 10000;
    Eigen::Matrix4d acc = Eigen::Matrix4d::Zero();
    for (int i = 0; i < n; ++i) {
        const auto out =
            propagate_targets({t}, Eigen::Matrix4d::Identity(), Gamma, Q, rng);
        acc += out[0].x * out[0].x.transpose();
    }
    acc /= n;
    // compare the nonzero entries within 10%
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            if (target(i, j) != 0.0)
                CHECK(acc(i, j) == doctest::Approx(target(i, j)).epsilon(0.10));
}

TEST_CASE("synthesize_frame basics") {
    const RadarParams p = sim_params();
    Rng rng(3);

    SUBCASE("no targets, no noise: all zero") {
        const BasebandCube cube = synthesize_frame(p, {}, 0.0, rng);
        double e = 0.0;
        for (const cd& v : cube.data) e += std::norm(v);
        CHECK(e == 0.0);
    }
    SUBCASE("one unit target: unit modulus everywhere, energy NML") {
        PointEcho e{10.0, 1.0, 0.3, cd{1.0, 0.0}};
        const BasebandCube cube = synthesize_frame(p, {e}, 0.0, rng);
        double energy = 0.0;
        for (const cd& v : cube.data) {
            CHECK(std::abs(v) == doctest::Approx(1.0).epsilon(1e-12));
            energy += std::norm(v);
        }
        CHECK(energy == doctest::Approx(128.0 * 64 * 8).epsilon(1e-12));
    }
    SUBCASE("rejects bad inputs") {
        CHECK_THROWS_AS(synthesize_frame(p, {}, -1.0, rng), std::invalid_argument);
        PointEcho bad{10.0, 0.0, 0.0, cd{std::nan(""), 0.0}};
        CHECK_THROWS_AS(synthesize_frame(p, {bad}, 0.0, rng), std::invalid_argument);
    }
}

TEST_CASE("on-grid target concentrates in a single DFT bin") {
    RadarParams p = sim_params();
    p.n_fast = 16;
    p.n_slow = 8;
    p.n_rx = 2;
    p.T_s = p.T_ramp / p.n_fast;
    p.mu = kSpeedOfLight / (2.0 * 100.0 * p.T_s);
    const RadarLimits lim = compute_limits(p);
    // bin (3, 2): r = 3/16 r_max, wy = 2*pi*2/8
    const double r = 3.0 / 16.0 * lim.r_max;
    const double v = wrap_pi(2.0 * kPi * 2.0 / 8.0) * lim.v_max / kPi;
    Rng rng(1);
    const BasebandCube cube = synthesize_frame(p, {{r, v, 0.0, cd{1.0, 0.0}}}, 0.0, rng);

    Fft2D fft(p.n_fast, p.n_slow);
    std::vector<cd> F(static_cast<std::size_t>(p.n_fast) * p.n_slow);
    for (int l = 0; l < p.n_rx; ++l) {
        fft.forward(cube.snapshot(l).data(), F.data());
        int nonzero = 0;
        for (int i = 0; i < p.n_fast; ++i)
            for (int j = 0; j < p.n_slow; ++j) {
                const double mag = std::abs(F[static_cast<std::size_t>(i) * p.n_slow + j]);
                if (mag > 1e-9) {
                    ++nonzero;
                    CHECK(i == 3);
                    CHECK(j == 2);
                    CHECK(mag == doctest::Approx(16.0 * 8).epsilon(1e-12));
                }
            }
        CHECK(nonzero == 1);
    }
}

TEST_CASE("frequency map round-trips through freq_to_state") {
    const RadarLimits lim = compute_limits(sim_params());
    Rng rng(11);
    std::uniform_real_distribution<double> ur(0.0, lim.r_max * 0.999);
    std::uniform_real_distribution<double> uv(-lim.v_max * 0.999, lim.v_max * 0.999);
    std::uniform_real_distribution<double> uth(-kPi / 2 * 0.999, kPi / 2 * 0.999);
    for (int i = 0; i < 200; ++i) {
        const double r = ur(rng), v = uv(rng), th = uth(rng);
        Eigen::Vector3d w = state_to_freq(r, v, th, lim);
        const PolarState st = freq_to_state(w, lim);
        CHECK(st.r == doctest::Approx(r).epsilon(1e-12));
        CHECK(st.v == doctest::Approx(v).epsilon(1e-12));
        CHECK(st.theta == doctest::Approx(th).epsilon(1e-12));
    }
}

TEST_CASE("synthesize_frame is linear in the target list") {
    RadarParams p = sim_params();
    p.n_fast = 16;
    p.n_slow = 8;
    p.n_rx = 2;
    Rng rng(5);
    const std::vector<PointEcho> A = {{12.0, 1.0, 0.2, cd{1.0, 0.5}},
                                      {40.0, -2.0, -0.4, cd{0.3, -0.7}}};
    const std::vector<PointEcho> B = {{77.0, 3.0, 0.9, cd{-0.2, 0.1}}};
    std::vector<PointEcho> AB = A;
    AB.insert(AB.end(), B.begin(), B.end());
    const BasebandCube ca = synthesize_frame(p, A, 0.0, rng);
    const BasebandCube cb = synthesize_frame(p, B, 0.0, rng);
    const BasebandCube cab = synthesize_frame(p, AB, 0.0, rng);
    for (std::size_t i = 0; i < cab.data.size(); ++i)
        CHECK(std::abs(cab.data[i] - ca.data[i] - cb.data[i]) < 1e-12);
}

TEST_CASE("noise-only periodogram has unit mean") {
    const RadarParams p = sim_params();
    const double sigma2 = 2.3;
    Rng rng(17);
    const BasebandCube cube = synthesize_frame(p, {}, sigma2, rng);
    Fft2D fft(p.n_fast, p.n_slow);
    std::vector<cd> F(static_cast<std::size_t>(p.n_fast) * p.n_slow);
    double acc = 0.0;
    for (int l = 0; l < p.n_rx; ++l) {
        fft.forward(cube.snapshot(l).data(), F.data());
        for (const cd& v : F) acc += std::norm(v);
    }
    const double nm = static_cast<double>(p.n_fast) * p.n_slow;
    const double mean = acc / (nm * nm * p.n_rx * sigma2);
    CHECK(std::abs(mean - 1.0) < 3.0 / std::sqrt(nm));
}

TEST_CASE("generate_scenario honors the clutter model and determinism") {
    ScenarioConfig cfg;
    cfg.n_targets = 3;
    cfg.n_frames = 40;

    SUBCASE("zero clutter mean means no clutter") {
        cfg.clutter_mean = 0.0;
        Rng rng(9);
        const Scenario sc = generate_scenario(cfg, rng);
        for (const auto& frame : sc.clutter) CHECK(frame.empty());
    }
    SUBCASE("empirical clutter mean approaches mu_c") {
        cfg.clutter_mean = 4.0;
        cfg.n_frames = 10000;
        cfg.n_targets = 0;
        Rng rng(10);
        const Scenario sc = generate_scenario(cfg, rng);
        double total = 0.0;
        for (const auto& frame : sc.clutter) total += frame.size();
        CHECK(total / cfg.n_frames == doctest::Approx(4.0).epsilon(0.025));
    }
    SUBCASE("same seed, same scenario") {
        Rng a(42), b(42);
        const Scenario s1 = generate_scenario(cfg, a);
        const Scenario s2 = generate_scenario(cfg, b);
        REQUIRE(s1.truth.size() == s2.truth.size());
        for (std::size_t t = 0; t < s1.truth.size(); ++t) {
            REQUIRE(s1.truth[t].size() == s2.truth[t].size());
            for (std::size_t k = 0; k < s1.truth[t].size(); ++k)
                CHECK((s1.truth[t][k].x - s2.truth[t][k].x).norm() == 0.0);
            REQUIRE(s1.clutter[t].size() == s2.clutter[t].size());
        }
    }
    SUBCASE("labels unique and positions inside the init box") {
        Rng rng(13);
        const Scenario sc = generate_scenario(cfg, rng);
        std::vector<std::int64_t> labels;
        for (const TruthTarget& t : sc.truth[0]) {
            labels.push_back(t.label);
            CHECK(t.x[0] >= cfg.init_pos_x_min);
            CHECK(t.x[0] <= cfg.init_pos_x_max);
            CHECK(t.x[2] >= cfg.init_pos_y_min);
            CHECK(t.x[2] <= cfg.init_pos_y_max);
        }
        std::sort(labels.begin(), labels.end());
        CHECK(std::adjacent_find(labels.begin(), labels.end()) == labels.end());
    }
}

TEST_CASE("identical seeds give bit-identical cubes") {
    const RadarParams p = sim_params();
    Rng a(123), b(123);
    const BasebandCube c1 = synthesize_frame(p, {{20.0, 1.0, 0.1, cd{0.1, 0.0}}}, 1.0, a);
    const BasebandCube c2 = synthesize_frame(p, {{20.0, 1.0, 0.1, cd{0.1, 0.0}}}, 1.0, b);
    CHECK(std::memcmp(c1.data.data(), c2.data.data(),
                      c1.data.size() * sizeof(cd)) == 0);
}
