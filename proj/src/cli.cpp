#include <cmath>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmwave/crb.hpp"
#include "mmwave/harness.hpp"

namespace mmwave {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void check_cube_matches(const CubeFile& cube, const RadarParams& radar) {
    if (static_cast<int>(cube.n_fast) != radar.n_fast ||
        static_cast<int>(cube.n_slow) != radar.n_slow ||
        static_cast<int>(cube.n_rx) != radar.n_rx)
        throw ConfigError("cube dimensions do not match the configured radar");
}

int cmd_simulate(const std::string& config_path, const std::string& out_path,
                 const std::string& truth_path) {
    const RunConfig cfg = load_config(config_path);
    Rng rng(cfg.seed);
    const Scenario scenario = generate_scenario(cfg.scenario, rng);
    const std::vector<BasebandCube> frames =
        synthesize_scenario_frames(scenario, cfg.radar, cfg.scenario.snr_db, rng);
    write_cube_file(out_path, cfg.radar, frames);
    write_truth_csv(truth_path, scenario);
    return 0;
}

int cmd_detect(const std::string& config_path, const std::string& in_path,
               const std::string& out_path, const std::string& detector) {
    const RunConfig cfg = load_config(config_path);
    const CubeFile cube = read_cube_file(in_path);
    check_cube_matches(cube, cfg.radar);
    MnompDetector det(cfg.radar, cfg.cfar);
    std::vector<std::vector<Measurement>> frames(cube.frames.size());
    for (std::size_t t = 0; t < cube.frames.size(); ++t) {
        const DetectionResult res = detector == "fftcfar"
                                        ? det.detect_fft_cfar(cube.frames[t])
                                        : det.detect(cube.frames[t]);
        for (const Detection& d : res.detections) {
            Measurement m = to_pseudo_measurement(d, cfg.radar, res.sigma2_hat, cfg.kappa);
            m.frame = static_cast<int>(t);
            frames[t].push_back(m);
        }
    }
    write_measurements_csv(out_path, frames);
    return 0;
}

int cmd_track(const std::string& config_path, const std::string& in_path,
              const std::string& out_path, const std::string& gate,
              const std::string& detector) {
    const RunConfig cfg = load_config(config_path);
    const GateMode mode = gate == "2d" ? GateMode::k2D
                        : gate == "3d" ? GateMode::k3D
                                       : cfg.assoc.gate_mode;
    const DetectorKind kind =
        detector == "fftcfar" ? DetectorKind::kFftCfar : DetectorKind::kMnomp;
    TrackingPipeline pipeline(cfg.pipeline(kind, mode));
    std::vector<FrameResult> snapshots;
    if (ends_with(in_path, ".mmwc")) {
        const CubeFile cube = read_cube_file(in_path);
        check_cube_matches(cube, cfg.radar);
        snapshots.reserve(cube.frames.size());
        for (const BasebandCube& frame : cube.frames)
            snapshots.push_back(pipeline.process_frame(frame));
    } else {
        const auto frames = read_measurements_csv(in_path);
        snapshots.reserve(frames.size());
        for (const std::vector<Measurement>& meas : frames)
            snapshots.push_back(pipeline.process_frame(meas));
    }
    write_tracks_csv(out_path, snapshots);
    return 0;
}

int cmd_eval(const std::string& truth_path, const std::string& tracks_path,
             const std::string& out_path, const std::string& config_path) {
    MetricConfig metric;
    if (!config_path.empty()) metric = load_config(config_path).metric;
    const auto truth = read_truth_csv(truth_path);
    // confirmed tracks only; tentative rows are reported but not scored
    const auto tracks = read_tracks_csv(tracks_path, true);
    int max_frame = -1;
    if (!truth.empty()) max_frame = std::max(max_frame, truth.rbegin()->first);
    if (!tracks.empty()) max_frame = std::max(max_frame, tracks.rbegin()->first);
    std::vector<EvalRow> rows;
    double total = 0.0;
    for (int f = 0; f <= max_frame; ++f) {
        static const LabeledSet empty;
        const LabeledSet& X = truth.count(f) ? truth.at(f) : empty;
        const LabeledSet& Y = tracks.count(f) ? tracks.at(f) : empty;
        const double d = ospa(X, Y, metric.p, metric.c);
        total += d;
        rows.push_back({f, d, static_cast<int>(X.items.size()),
                        static_cast<int>(Y.items.size())});
    }
    write_report_csv(out_path, rows);
    if (!rows.empty()) std::cout << "MOSPA " << total / rows.size() << "\n";
    return 0;
}

int cmd_crb(const std::string& config_path, const std::string& out_path) {
    const RunConfig cfg = load_config(config_path);
    const RadarLimits lim = compute_limits(cfg.radar);
    // reference target: center of the configured initial position range
    const double px =
        0.5 * (cfg.scenario.init_pos_x_min + cfg.scenario.init_pos_x_max);
    const double py =
        0.5 * (cfg.scenario.init_pos_y_min + cfg.scenario.init_pos_y_max);
    const double r = std::hypot(px, py);
    const double theta = std::atan2(px, py);
    SignalPoint sp;
    sp.sigma2 = 1.0;
    sp.n_fast = cfg.radar.n_fast;
    sp.n_slow = cfg.radar.n_slow;
    sp.n_rx = cfg.radar.n_rx;

    std::vector<CrbRow> rows;
    for (int snr = 5; snr <= 30; ++snr) {
        sp.g = std::sqrt(std::pow(10.0, snr / 10.0) /
                         (static_cast<double>(sp.n_fast) * sp.n_slow));
        const Eigen::Matrix2d C2 = crb_pxpy(sp, lim, r, theta);
        const Eigen::Matrix3d Crv = crb_rvtheta(sp, lim, theta);
        CrbRow row;
        row.snr_db = snr;
        row.crb_px = C2(0, 0);
        row.crb_py = C2(1, 1);
        row.crb_r = Crv(0, 0);
        row.crb_v = Crv(1, 1);
        row.crb_theta = Crv(2, 2);
        rows.push_back(row);
    }
    write_crb_csv(out_path, rows);
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"LFMCW mmWave multitarget detection, estimation and tracking"};
    app.require_subcommand(1);

    std::string config, in, out, truth, tracks, detector = "mnomp", gate = "config";

    CLI::App* sim = app.add_subcommand("simulate", "synthesize a scenario");
    sim->add_option("--config", config, "run config JSON")->required();
    sim->add_option("--out", out, "output cube file")->required();
    sim->add_option("--truth", truth, "output truth CSV")->required();

    CLI::App* det = app.add_subcommand("detect", "detect targets in a cube file");
    det->add_option("--config", config)->required();
    det->add_option("--in", in, "input cube file")->required();
    det->add_option("--out", out, "output measurements CSV")->required();
    det->add_option("--detector", detector)->check(CLI::IsMember({"mnomp", "fftcfar"}));

    CLI::App* trk = app.add_subcommand("track", "run the tracking pipeline");
    trk->add_option("--config", config)->required();
    trk->add_option("--in", in, "cube file (.mmwc) or measurements CSV")->required();
    trk->add_option("--out", out, "output tracks CSV")->required();
    trk->add_option("--gate", gate)->check(CLI::IsMember({"2d", "3d", "config"}));
    trk->add_option("--detector", detector)->check(CLI::IsMember({"mnomp", "fftcfar"}));

    CLI::App* ev = app.add_subcommand("eval", "score tracks against truth");
    ev->add_option("--truth", truth)->required();
    ev->add_option("--tracks", tracks)->required();
    ev->add_option("--out", out, "output report CSV")->required();
    ev->add_option("--config", config, "optional, for the OSPA parameters");

    CLI::App* crb = app.add_subcommand("crb", "tabulate bounds vs SNR");
    crb->add_option("--config", config)->required();
    crb->add_option("--out", out, "output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help() << "\n";
        return 2;
    }

    try {
        if (sim->parsed()) return cmd_simulate(config, out, truth);
        if (det->parsed()) return cmd_detect(config, in, out, detector);
        if (trk->parsed()) return cmd_track(config, in, out, gate, detector);
        if (ev->parsed()) return cmd_eval(truth, tracks, out, config);
        if (crb->parsed()) return cmd_crb(config, out);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace mmwave
