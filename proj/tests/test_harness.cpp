#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "mmwave/harness.hpp"

using namespace mmwave;

namespace {

const char* kSmallConfig = R"json({
  "radar": {"f_c": 77.0e9, "mu": 1.6e13, "T_s": 9.375e-7, "T_r": 160e-6,
            "T_ramp": 30e-6, "T_idle": 130e-6, "N": 32, "M": 16, "L": 2,
            "T_frame": 0.1},
  "scenario": {"roi": [-30, 30, 0, 60], "n_targets": 1,
               "init_position": [-5, 5, 8, 20], "init_velocity": [-2, 2, -1, 2],
               "n_frames": 4, "process_noise": [1e-6, 1e-6],
               "clutter_mean": 1.0, "snr_db": 25.0},
  "cfar": {"p_fa": 0.01, "train_band": [4, 3], "guard_band": [2, 2],
           "K_max": 10, "K_invalid": 2, "oversample": 4},
  "assoc": {"p_d": 0.9, "p_g": 0.95, "n_iter": 10, "gate": "3d"},
  "tracker": {"n_ext": 2},
  "metric": {"p": 1.0, "c": 10.0},
  "kappa": 1.2,
  "seed": 7
})json";

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("mmwtest_" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

int cli(std::initializer_list<std::string> args) {
    std::vector<const char*> argv{"mmwtrack"};
    for (const std::string& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config parsing") {
    SUBCASE("valid config loads with derived fields") {
        const RunConfig cfg = parse_config(kSmallConfig);
        CHECK(cfg.radar.n_fast == 32);
        CHECK(cfg.scenario.T_frame == doctest::Approx(0.1));
        CHECK(cfg.tracker.T_frame == doctest::Approx(0.1));
        CHECK(cfg.assoc.mu_c == doctest::Approx(1.0));
        CHECK(cfg.assoc.f_c == doctest::Approx(1.0 / 3600.0));
        CHECK(cfg.seed == 7);
        CHECK(cfg.kappa == doctest::Approx(1.2));
    }
    SUBCASE("unknown keys are rejected") {
        std::string bad = kSmallConfig;
        bad.replace(bad.find("\"kappa\""), 7, "\"kapa\"");
        CHECK_THROWS_AS(parse_config(bad), ConfigError);
    }
    SUBCASE("unknown nested keys are rejected") {
        std::string bad = kSmallConfig;
        bad.replace(bad.find("\"p_fa\""), 6, "\"pfa\"");
        CHECK_THROWS_AS(parse_config(bad), ConfigError);
    }
    SUBCASE("missing sections are rejected") {
        CHECK_THROWS_AS(parse_config("{}"), ConfigError);
    }
    SUBCASE("malformed JSON is rejected") {
        CHECK_THROWS_AS(parse_config("{nope"), ConfigError);
    }
}

TEST_CASE("cube file round trip") {
    TempDir dir;
    const RunConfig cfg = parse_config(kSmallConfig);
    Rng rng(3);
    std::vector<BasebandCube> frames;
    for (int t = 0; t < 3; ++t)
        frames.push_back(
            synthesize_frame(cfg.radar, {{10.0, 1.0, 0.2, cd{0.5, 0.1}}}, 1.0, rng));
    const std::string path = dir.file("cubes.mmwc");
    write_cube_file(path, cfg.radar, frames);

    SUBCASE("header and payload parse back") {
        const CubeFile file = read_cube_file(path);
        CHECK(file.n_fast == 32);
        CHECK(file.n_slow == 16);
        CHECK(file.n_rx == 2);
        CHECK(file.frames.size() == 3);
        CHECK(file.f_c == doctest::Approx(77.0e9));
        // payload survives the f32 round trip exactly
        for (int t = 0; t < 3; ++t)
            for (int l = 0; l < 2; ++l)
                for (int m = 0; m < 16; ++m)
                    for (int n = 0; n < 32; ++n) {
                        const cd orig = frames[t].at(n, m, l);
                        const cd back = file.frames[t].at(n, m, l);
                        CHECK(static_cast<float>(orig.real()) ==
                              doctest::Approx(back.real()));
                        CHECK(static_cast<float>(orig.imag()) ==
                              doctest::Approx(back.imag()));
                    }
    }
    SUBCASE("write-read-write is byte identical") {
        const CubeFile file = read_cube_file(path);
        RadarParams p2 = cfg.radar;
        const std::string path2 = dir.file("cubes2.mmwc");
        write_cube_file(path2, p2, file.frames);
        CHECK(slurp(path) == slurp(path2));
    }
    SUBCASE("truncated payload is reported as such") {
        const std::string data = slurp(path);
        const std::string cut = dir.file("cut.mmwc");
        std::ofstream(cut, std::ios::binary) << data.substr(0, data.size() - 5);
        try {
            read_cube_file(cut);
            FAIL("expected IoError");
        } catch (const IoError& e) {
            CHECK(e.code() == IoErrorCode::kTruncated);
        }
    }
    SUBCASE("bad magic is its own error") {
        const std::string bad = dir.file("bad.mmwc");
        std::ofstream(bad, std::ios::binary) << "NOPE" << slurp(path).substr(4);
        try {
            read_cube_file(bad);
            FAIL("expected IoError");
        } catch (const IoError& e) {
            CHECK(e.code() == IoErrorCode::kBadMagic);
        }
    }
    SUBCASE("trailing bytes are rejected") {
        const std::string fat = dir.file("fat.mmwc");
        std::ofstream(fat, std::ios::binary) << slurp(path) << "xx";
        CHECK_THROWS_AS(read_cube_file(fat), IoError);
    }
}

TEST_CASE("cube file byte layout is pinned") {
    // 2x2x1 single frame; payload order is l, then m, with n fastest
    TempDir dir;
    RadarParams p;
    p.f_c = 77.0e9;
    p.mu = 3.2e12;
    p.T_s = 4.6875e-7;
    p.T_r = 160e-6;
    p.T_ramp = 60e-6;
    p.T_idle = 100e-6;
    p.n_fast = 2;
    p.n_slow = 2;
    p.n_rx = 1;
    p.T_frame = 0.1;
    BasebandCube cube(2, 2, 1);
    cube.at(0, 0, 0) = {1.0, 0.0};
    cube.at(1, 0, 0) = {0.0, -1.0};
    cube.at(0, 1, 0) = {0.5, 0.25};
    cube.at(1, 1, 0) = {-2.0, 3.0};
    const std::string path = dir.file("tiny.mmwc");
    write_cube_file(path, p, {cube});

    std::string expect;
    expect += "MMWC";
    auto u32 = [&](std::uint32_t v) { expect.append(reinterpret_cast<char*>(&v), 4); };
    auto f64 = [&](double v) { expect.append(reinterpret_cast<char*>(&v), 8); };
    auto f32 = [&](float v) { expect.append(reinterpret_cast<char*>(&v), 4); };
    u32(1);
    u32(2);
    u32(2);
    u32(1);
    u32(1);
    f64(p.f_c);
    f64(p.mu);
    f64(p.T_s);
    f64(p.T_r);
    f64(p.T_frame);
    // (n=0,m=0), (n=1,m=0), (n=0,m=1), (n=1,m=1)
    f32(1.0f);
    f32(0.0f);
    f32(0.0f);
    f32(-1.0f);
    f32(0.5f);
    f32(0.25f);
    f32(-2.0f);
    f32(3.0f);
    CHECK(slurp(path) == expect);

    const CubeFile back = read_cube_file(path);
    REQUIRE(back.frames.size() == 1);
    CHECK(back.frames[0].at(1, 0, 0) == cd{0.0, -1.0});
    CHECK(back.frames[0].at(0, 1, 0) == cd{0.5, 0.25});
}

TEST_CASE("tracks CSV") {
    TempDir dir;
    const std::string path = dir.file("tracks.csv");

    SUBCASE("no tracks: header only") {
        write_tracks_csv(path, {});
        CHECK(slurp(path) == "frame,track_id,status,px,py,vx,vy,var_px,var_py,cov_pxpy\n");
    }
    SUBCASE("rows ordered by frame and label, values survive to 1e-9") {
        Track t1;
        t1.label = 2;
        t1.x_hat << 1.234567890123, -0.5, 10.0, 0.25;
        t1.sigma = Eigen::Matrix4d::Identity() * 0.01;
        t1.status = TrackStatus::kActive;
        Track t2 = t1;
        t2.label = 1;
        t2.x_hat[0] = -7.5;
        FrameResult f0;
        f0.frame = 0;
        f0.tracks = {t1, t2};  // deliberately out of order
        FrameResult f1;
        f1.frame = 1;
        f1.tracks = {t1};
        write_tracks_csv(path, {f0, f1});

        const auto sets = read_tracks_csv(path);
        REQUIRE(sets.size() == 2);
        REQUIRE(sets.at(0).items.size() == 2);
        CHECK(sets.at(0).items[0].first == 1);  // sorted by label
        CHECK(sets.at(0).items[1].first == 2);
        CHECK(sets.at(0).items[1].second[0] ==
              doctest::Approx(1.234567890123).epsilon(1e-9));
        CHECK(sets.at(1).items.size() == 1);
    }
}

TEST_CASE("measurements CSV round trip") {
    TempDir dir;
    const std::string path = dir.file("meas.csv");
    Measurement m;
    m.z << -2.83, 7.51;
    m.v_r = 1.75;
    m.r = 8.02;
    m.theta = -0.361;
    m.R << 1.2e-3, -3.4e-5, -3.4e-5, 5.6e-4;
    m.var_v = 7.8e-5;
    m.snr_db = 18.7;
    write_measurements_csv(path, {{m}, {}});
    const auto frames = read_measurements_csv(path);
    REQUIRE(frames.size() == 1);  // trailing empty frame has no rows
    REQUIRE(frames[0].size() == 1);
    const Measurement& b = frames[0][0];
    CHECK(b.z[0] == doctest::Approx(m.z[0]).epsilon(1e-9));
    CHECK(b.R(0, 1) == doctest::Approx(m.R(0, 1)).epsilon(1e-9));
    CHECK(b.R(1, 0) == doctest::Approx(m.R(0, 1)).epsilon(1e-9));
    CHECK(b.var_v == doctest::Approx(m.var_v).epsilon(1e-9));
    CHECK(b.snr_db == doctest::Approx(m.snr_db).epsilon(1e-9));
}

TEST_CASE("cli pipeline end to end") {
    TempDir dir;
    const std::string cfg_path = dir.file("run.json");
    std::ofstream(cfg_path) << kSmallConfig;

    SUBCASE("simulate, detect, track, eval, crb") {
        CHECK(cli({"simulate", "--config", cfg_path, "--out", dir.file("c.mmwc"),
                   "--truth", dir.file("truth.csv")}) == 0);
        CHECK(std::filesystem::exists(dir.file("c.mmwc")));
        CHECK(cli({"detect", "--config", cfg_path, "--in", dir.file("c.mmwc"),
                   "--out", dir.file("meas.csv")}) == 0);
        CHECK(cli({"track", "--config", cfg_path, "--in", dir.file("c.mmwc"),
                   "--out", dir.file("tracks.csv"), "--gate", "3d"}) == 0);
        CHECK(cli({"track", "--config", cfg_path, "--in", dir.file("meas.csv"),
                   "--out", dir.file("tracks2.csv"), "--gate", "2d"}) == 0);
        CHECK(cli({"eval", "--truth", dir.file("truth.csv"), "--tracks",
                   dir.file("tracks.csv"), "--out", dir.file("report.csv")}) == 0);
        CHECK(cli({"crb", "--config", cfg_path, "--out", dir.file("crb.csv")}) == 0);
        CHECK(slurp(dir.file("report.csv")).rfind("frame,ospa,n_truth,n_est", 0) == 0);
    }
    SUBCASE("identical seeds give byte-identical outputs") {
        CHECK(cli({"simulate", "--config", cfg_path, "--out", dir.file("a.mmwc"),
                   "--truth", dir.file("ta.csv")}) == 0);
        CHECK(cli({"simulate", "--config", cfg_path, "--out", dir.file("b.mmwc"),
                   "--truth", dir.file("tb.csv")}) == 0);
        CHECK(slurp(dir.file("a.mmwc")) == slurp(dir.file("b.mmwc")));
        CHECK(slurp(dir.file("ta.csv")) == slurp(dir.file("tb.csv")));
    }
    SUBCASE("missing config exits 2") {
        CHECK(cli({"simulate", "--config", dir.file("nope.json"), "--out",
                   dir.file("x.mmwc"), "--truth", dir.file("t.csv")}) == 2);
    }
    SUBCASE("unknown flag exits 2") {
        CHECK(cli({"simulate", "--config", cfg_path, "--bogus", "1"}) == 2);
    }
    SUBCASE("missing cube file exits 3") {
        CHECK(cli({"detect", "--config", cfg_path, "--in", dir.file("nope.mmwc"),
                   "--out", dir.file("m.csv")}) == 3);
    }
    SUBCASE("no partial outputs on failure") {
        // config with a cube whose dimensions disagree triggers the
        // failure after the input is opened but before any write
        CHECK(cli({"simulate", "--config", cfg_path, "--out", dir.file("c.mmwc"),
                   "--truth", dir.file("t.csv")}) == 0);
        std::string other = kSmallConfig;
        const auto pos = other.find("\"N\": 32");
        other.replace(pos, 7, "\"N\": 16");
        const std::string cfg2 = dir.file("run2.json");
        std::ofstream(cfg2) << other;
        CHECK(cli({"detect", "--config", cfg2, "--in", dir.file("c.mmwc"), "--out",
                   dir.file("meas2.csv")}) == 2);
        CHECK(!std::filesystem::exists(dir.file("meas2.csv")));
        CHECK(!std::filesystem::exists(dir.file("meas2.csv.tmp")));
    }
}
