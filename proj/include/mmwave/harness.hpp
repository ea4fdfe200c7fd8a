#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mmwave/metrics.hpp"
#include "mmwave/tracker.hpp"

namespace mmwave {

struct MetricConfig {
    double p = 1.0;
    double c = 10.0;  // m
};

/// Everything one experiment needs, loaded from a single JSON file.
struct RunConfig {
    RadarParams radar;
    ScenarioConfig scenario;
    CfarConfig cfar;
    AssocConfig assoc;
    TrackerConfig tracker;
    ClusterConfig cluster;
    MetricConfig metric;
    double kappa = 1.2;
    std::uint64_t seed = 1;

    PipelineConfig pipeline(DetectorKind detector, GateMode gate) const;
    void validate() const;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class IoErrorCode {
    kOpenFailed,
    kBadMagic,
    kBadVersion,
    kTruncated,
    kDimensionOverflow,
    kParse,
    kWriteFailed,
};

class IoError : public std::runtime_error {
public:
    IoError(IoErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    IoErrorCode code() const { return code_; }

private:
    IoErrorCode code_;
};

/// Unknown keys anywhere in the document are rejected.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

/// Baseband cube container file: magic "MMWC", little-endian u32
/// version/N/M/L/frame_count, f64 f_c/mu/T_s/T_r/T_frame, then
/// frame-major f32 (re, im) pairs ordered l, then m, then n fastest.
struct CubeFile {
    std::uint32_t n_fast = 0, n_slow = 0, n_rx = 0;
    double f_c = 0.0, mu = 0.0, T_s = 0.0, T_r = 0.0, T_frame = 0.0;
    std::vector<BasebandCube> frames;
};

void write_cube_file(const std::string& path, const RadarParams& params,
                     const std::vector<BasebandCube>& frames);
CubeFile read_cube_file(const std::string& path);

/// Truth CSV: frame,label,px,py,vx,vy
void write_truth_csv(const std::string& path, const Scenario& scenario);
std::map<int, LabeledSet> read_truth_csv(const std::string& path);

/// Measurements CSV: frame,px,py,vr,r,theta,R00,R01,R11,var_v,snr_db
void write_measurements_csv(const std::string& path,
                            const std::vector<std::vector<Measurement>>& frames);
std::vector<std::vector<Measurement>> read_measurements_csv(const std::string& path);

/// Tracks CSV: frame,track_id,status,px,py,vx,vy,var_px,var_py,cov_pxpy
void write_tracks_csv(const std::string& path,
                      const std::vector<FrameResult>& snapshots);
/// active_only drops tentative rows (confirmed-track evaluation).
std::map<int, LabeledSet> read_tracks_csv(const std::string& path,
                                          bool active_only = false);

/// Eval report CSV: frame,ospa,n_truth,n_est
struct EvalRow {
    int frame;
    double ospa;
    int n_truth;
    int n_est;
};
void write_report_csv(const std::string& path, const std::vector<EvalRow>& rows);

/// CRB table CSV: snr_db,crb_px,crb_py,crb_r,crb_v,crb_theta
struct CrbRow {
    double snr_db;
    double crb_px, crb_py, crb_r, crb_v, crb_theta;
};
void write_crb_csv(const std::string& path, const std::vector<CrbRow>& rows);

/// Render a scenario into baseband frames at the configured integrated
/// SNR (sigma2 = 1, per-frame random target phases). Warns on stderr
/// when a truth radial velocity exceeds v_max.
std::vector<BasebandCube> synthesize_scenario_frames(const Scenario& scenario,
                                                     const RadarParams& params,
                                                     double snr_db, Rng& rng);

/// Measurement-level fidelity: truth plus CRB-derived noise with P_D
/// coin flips and uniform-ROI clutter. fft_emulation quantizes range
/// and velocity to the critically sampled bins and merges targets that
/// share a bin pair, which is how the FFT baseline loses close targets.
struct MeasLevelOptions {
    double p_d = 0.9;
    double kappa = 1.2;
    bool fft_emulation = false;
};

std::vector<std::vector<Measurement>> simulate_measurement_frames(
    const Scenario& scenario, const RadarParams& params, double snr_db,
    const MeasLevelOptions& opt, Rng& rng);

/// mmwtrack CLI: simulate / detect / track / eval / crb.
/// Exit codes: 0 success, 2 config or usage error, 3 IO error.
int run_cli(int argc, const char* const* argv);

}  // namespace mmwave
