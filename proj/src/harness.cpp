#include "mmwave/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "mmwave/crb.hpp"

namespace mmwave {

namespace {

using nlohmann::json;

// --- config -----------------------------------------------------------

void check_keys(const json& j, const std::string& section,
                std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError("config: '" + section + "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::none_of(allowed.begin(), allowed.end(),
                         [&](const char* a) { return it.key() == a; }))
            throw ConfigError("config: unknown key '" + section + "." + it.key() + "'");
    }
}

double get_num(const json& j, const std::string& section, const char* key,
               std::optional<double> def = {}) {
    if (!j.contains(key)) {
        if (def) return *def;
        throw ConfigError("config: missing key '" + section + "." + key + "'");
    }
    if (!j[key].is_number())
        throw ConfigError("config: '" + section + "." + key + "' must be a number");
    return j[key].get<double>();
}

int get_int(const json& j, const std::string& section, const char* key,
            std::optional<int> def = {}) {
    if (!j.contains(key) && def) return *def;
    const double v = get_num(j, section, key);
    if (v != std::floor(v))
        throw ConfigError("config: '" + section + "." + key + "' must be an integer");
    return static_cast<int>(v);
}

std::array<double, 4> get_quad(const json& j, const std::string& section,
                               const char* key) {
    if (!j.contains(key) || !j[key].is_array() || j[key].size() != 4)
        throw ConfigError("config: '" + section + "." + key +
                          "' must be an array of 4 numbers");
    std::array<double, 4> out{};
    for (int i = 0; i < 4; ++i) out[i] = j[key][i].get<double>();
    return out;
}

std::array<double, 2> get_pair(const json& j, const std::string& section,
                               const char* key) {
    if (!j.contains(key) || !j[key].is_array() || j[key].size() != 2)
        throw ConfigError("config: '" + section + "." + key +
                          "' must be an array of 2 numbers");
    return {j[key][0].get<double>(), j[key][1].get<double>()};
}

// --- little-endian binary helpers --------------------------------------

template <typename T>
void write_le(std::ostream& out, T value) {
    static_assert(std::endian::native == std::endian::little,
                  "big-endian hosts need byte swaps here");
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
bool read_le(std::istream& in, T& value) {
    static_assert(std::endian::native == std::endian::little);
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    return in.gcount() == sizeof(T);
}

// --- atomic file writes -------------------------------------------------

class AtomicWriter {
public:
    explicit AtomicWriter(const std::string& path)
        : path_(path), tmp_(path + ".tmp"), out_(tmp_, std::ios::binary) {
        if (!out_) throw IoError(IoErrorCode::kOpenFailed, "cannot open " + tmp_);
    }
    ~AtomicWriter() {
        if (!committed_) {
            out_.close();
            std::error_code ec;
            std::filesystem::remove(tmp_, ec);
        }
    }
    std::ostream& stream() { return out_; }
    void commit() {
        out_.flush();
        if (!out_) throw IoError(IoErrorCode::kWriteFailed, "write failed: " + path_);
        out_.close();
        std::error_code ec;
        std::filesystem::rename(tmp_, path_, ec);
        if (ec) throw IoError(IoErrorCode::kWriteFailed, "rename failed: " + path_);
        committed_ = true;
    }

private:
    std::string path_, tmp_;
    std::ofstream out_;
    bool committed_ = false;
};

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, const std::string& where) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw IoError(IoErrorCode::kParse, "bad number '" + s + "' in " + where);
    return v;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path,
                                               const std::string& header) {
    std::ifstream in(path);
    if (!in) throw IoError(IoErrorCode::kOpenFailed, "cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw IoError(IoErrorCode::kParse, path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != header)
        throw IoError(IoErrorCode::kParse, path + ": unexpected header '" + line + "'");
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        rows.push_back(split_csv_line(line));
    }
    return rows;
}

}  // namespace

PipelineConfig RunConfig::pipeline(DetectorKind detector, GateMode gate) const {
    PipelineConfig pc;
    pc.radar = radar;
    pc.cfar = cfar;
    pc.assoc = assoc;
    pc.assoc.gate_mode = gate;
    pc.tracker = tracker;
    pc.cluster = cluster;
    pc.kappa = kappa;
    pc.detector = detector;
    return pc;
}

void RunConfig::validate() const {
    radar.validate();
    scenario.validate();
    cfar.validate();
    assoc.validate();
    tracker.validate();
    if (kappa <= 0.0) throw ConfigError("config: kappa must be > 0");
    if (std::abs(scenario.T_frame - radar.T_frame) > 1e-12)
        throw ConfigError("config: scenario and radar frame intervals disagree");
}

RunConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    check_keys(j, "", {"radar", "scenario", "cfar", "assoc", "tracker", "cluster",
                       "metric", "kappa", "seed"});
    RunConfig cfg;

    if (!j.contains("radar")) throw ConfigError("config: missing 'radar'");
    {
        const json& r = j["radar"];
        check_keys(r, "radar",
                   {"f_c", "mu", "T_s", "T_r", "T_ramp", "T_idle", "d", "N", "M", "L",
                    "T_frame"});
        cfg.radar.f_c = get_num(r, "radar", "f_c");
        cfg.radar.mu = get_num(r, "radar", "mu");
        cfg.radar.T_s = get_num(r, "radar", "T_s");
        cfg.radar.T_r = get_num(r, "radar", "T_r");
        cfg.radar.T_ramp = get_num(r, "radar", "T_ramp");
        cfg.radar.T_idle = get_num(r, "radar", "T_idle");
        cfg.radar.d = get_num(r, "radar", "d", 0.0);
        cfg.radar.n_fast = get_int(r, "radar", "N");
        cfg.radar.n_slow = get_int(r, "radar", "M");
        cfg.radar.n_rx = get_int(r, "radar", "L");
        cfg.radar.T_frame = get_num(r, "radar", "T_frame");
    }
    if (!j.contains("scenario")) throw ConfigError("config: missing 'scenario'");
    {
        const json& s = j["scenario"];
        check_keys(s, "scenario",
                   {"roi", "n_targets", "init_position", "init_velocity", "n_frames",
                    "process_noise", "clutter_mean", "snr_db"});
        const auto roi = get_quad(s, "scenario", "roi");
        cfg.scenario.roi_x_min = roi[0];
        cfg.scenario.roi_x_max = roi[1];
        cfg.scenario.roi_y_min = roi[2];
        cfg.scenario.roi_y_max = roi[3];
        const auto ip = get_quad(s, "scenario", "init_position");
        cfg.scenario.init_pos_x_min = ip[0];
        cfg.scenario.init_pos_x_max = ip[1];
        cfg.scenario.init_pos_y_min = ip[2];
        cfg.scenario.init_pos_y_max = ip[3];
        const auto iv = get_quad(s, "scenario", "init_velocity");
        cfg.scenario.init_vel_x_min = iv[0];
        cfg.scenario.init_vel_x_max = iv[1];
        cfg.scenario.init_vel_y_min = iv[2];
        cfg.scenario.init_vel_y_max = iv[3];
        cfg.scenario.n_targets = get_int(s, "scenario", "n_targets");
        cfg.scenario.n_frames = get_int(s, "scenario", "n_frames");
        const auto q = get_pair(s, "scenario", "process_noise");
        cfg.scenario.process_noise = {q[0], q[1]};
        cfg.scenario.clutter_mean = get_num(s, "scenario", "clutter_mean");
        cfg.scenario.snr_db = get_num(s, "scenario", "snr_db");
        cfg.scenario.T_frame = cfg.radar.T_frame;
    }
    if (!j.contains("cfar")) throw ConfigError("config: missing 'cfar'");
    {
        const json& c = j["cfar"];
        check_keys(c, "cfar",
                   {"p_fa", "train_band", "guard_band", "K_max", "K_invalid",
                    "oversample", "alpha"});
        cfg.cfar.p_fa = get_num(c, "cfar", "p_fa");
        const auto tb = get_pair(c, "cfar", "train_band");
        cfg.cfar.train_x = static_cast<int>(tb[0]);
        cfg.cfar.train_y = static_cast<int>(tb[1]);
        const auto gb = get_pair(c, "cfar", "guard_band");
        cfg.cfar.guard_x = static_cast<int>(gb[0]);
        cfg.cfar.guard_y = static_cast<int>(gb[1]);
        cfg.cfar.K_max = get_int(c, "cfar", "K_max", 30);
        cfg.cfar.K_invalid = get_int(c, "cfar", "K_invalid", 3);
        cfg.cfar.oversample = get_int(c, "cfar", "oversample", 4);
        if (c.contains("alpha")) cfg.cfar.alpha = get_num(c, "cfar", "alpha");
    }
    if (!j.contains("assoc")) throw ConfigError("config: missing 'assoc'");
    {
        const json& a = j["assoc"];
        check_keys(a, "assoc", {"p_d", "p_g", "n_iter", "gate"});
        cfg.assoc.p_d = get_num(a, "assoc", "p_d", 0.9);
        cfg.assoc.p_g = get_num(a, "assoc", "p_g", 0.95);
        cfg.assoc.n_iter = get_int(a, "assoc", "n_iter", 10);
        const std::string gate = a.contains("gate") ? a["gate"].get<std::string>() : "3d";
        if (gate == "2d")
            cfg.assoc.gate_mode = GateMode::k2D;
        else if (gate == "3d")
            cfg.assoc.gate_mode = GateMode::k3D;
        else
            throw ConfigError("config: assoc.gate must be '2d' or '3d'");
        cfg.assoc.mu_c = cfg.scenario.clutter_mean;
        cfg.assoc.f_c = 1.0 / cfg.scenario.roi_area();
    }
    if (!j.contains("tracker")) throw ConfigError("config: missing 'tracker'");
    {
        const json& t = j["tracker"];
        check_keys(t, "tracker", {"n_ext", "birth_threshold", "process_noise"});
        cfg.tracker.n_ext = get_int(t, "tracker", "n_ext", 2);
        cfg.tracker.birth_threshold = get_num(t, "tracker", "birth_threshold", 0.5);
        if (t.contains("process_noise")) {
            const auto q = get_pair(t, "tracker", "process_noise");
            cfg.tracker.process_noise = {q[0], q[1]};
        } else {
            cfg.tracker.process_noise = cfg.scenario.process_noise;
        }
        cfg.tracker.T_frame = cfg.radar.T_frame;
    }
    if (j.contains("cluster")) {
        const json& c = j["cluster"];
        check_keys(c, "cluster", {"enabled", "d_pos", "d_vel"});
        if (c.contains("enabled")) {
            if (!c["enabled"].is_boolean())
                throw ConfigError("config: cluster.enabled must be a boolean");
            cfg.cluster.enabled = c["enabled"].get<bool>();
        }
        cfg.cluster.d_pos = get_num(c, "cluster", "d_pos", 1.0);
        cfg.cluster.d_vel = get_num(c, "cluster", "d_vel", 0.5);
    }
    if (j.contains("metric")) {
        const json& m = j["metric"];
        check_keys(m, "metric", {"p", "c"});
        cfg.metric.p = get_num(m, "metric", "p", 1.0);
        cfg.metric.c = get_num(m, "metric", "c", 10.0);
    }
    if (j.contains("kappa")) cfg.kappa = get_num(j, "", "kappa");
    if (j.contains("seed")) {
        const double s = get_num(j, "", "seed");
        if (s < 0 || s != std::floor(s))
            throw ConfigError("config: seed must be a nonnegative integer");
        cfg.seed = static_cast<std::uint64_t>(s);
    }
    cfg.scenario.seed = cfg.seed;

    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

// --- cube file ----------------------------------------------------------

void write_cube_file(const std::string& path, const RadarParams& params,
                     const std::vector<BasebandCube>& frames) {
    AtomicWriter w(path);
    std::ostream& out = w.stream();
    out.write("MMWC", 4);
    write_le<std::uint32_t>(out, 1);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.n_fast));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.n_slow));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.n_rx));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(frames.size()));
    write_le<double>(out, params.f_c);
    write_le<double>(out, params.mu);
    write_le<double>(out, params.T_s);
    write_le<double>(out, params.T_r);
    write_le<double>(out, params.T_frame);
    for (const BasebandCube& cube : frames) {
        if (cube.n_fast != params.n_fast || cube.n_slow != params.n_slow ||
            cube.n_rx != params.n_rx)
            throw IoError(IoErrorCode::kWriteFailed, "cube shape mismatch: " + path);
        for (int l = 0; l < cube.n_rx; ++l)
            for (int m = 0; m < cube.n_slow; ++m)
                for (int n = 0; n < cube.n_fast; ++n) {
                    const cd& v = cube.at(n, m, l);
                    write_le<float>(out, static_cast<float>(v.real()));
                    write_le<float>(out, static_cast<float>(v.imag()));
                }
    }
    w.commit();
}

CubeFile read_cube_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoErrorCode::kOpenFailed, "cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, "MMWC", 4) != 0)
        throw IoError(IoErrorCode::kBadMagic, path + ": bad magic");
    std::uint32_t version = 0, N = 0, M = 0, L = 0, n_frames = 0;
    if (!read_le(in, version) || !read_le(in, N) || !read_le(in, M) ||
        !read_le(in, L) || !read_le(in, n_frames))
        throw IoError(IoErrorCode::kTruncated, path + ": truncated header");
    if (version != 1)
        throw IoError(IoErrorCode::kBadVersion, path + ": unsupported version");
    if (N == 0 || M == 0 || L == 0 || N > (1u << 20) || M > (1u << 20) ||
        L > (1u << 16) || n_frames > (1u << 24) ||
        static_cast<std::uint64_t>(N) * M * L > (1ull << 32))
        throw IoError(IoErrorCode::kDimensionOverflow, path + ": bad dimensions");
    CubeFile file;
    file.n_fast = N;
    file.n_slow = M;
    file.n_rx = L;
    if (!read_le(in, file.f_c) || !read_le(in, file.mu) || !read_le(in, file.T_s) ||
        !read_le(in, file.T_r) || !read_le(in, file.T_frame))
        throw IoError(IoErrorCode::kTruncated, path + ": truncated header");
    file.frames.reserve(n_frames);
    for (std::uint32_t f = 0; f < n_frames; ++f) {
        BasebandCube cube(static_cast<int>(N), static_cast<int>(M), static_cast<int>(L));
        for (std::uint32_t l = 0; l < L; ++l)
            for (std::uint32_t m = 0; m < M; ++m)
                for (std::uint32_t n = 0; n < N; ++n) {
                    float re = 0.0f, im = 0.0f;
                    if (!read_le(in, re) || !read_le(in, im))
                        throw IoError(IoErrorCode::kTruncated, path + ": truncated payload");
                    cube.at(static_cast<int>(n), static_cast<int>(m),
                            static_cast<int>(l)) = cd{re, im};
                }
        file.frames.push_back(std::move(cube));
    }
    char extra = 0;
    if (in.read(&extra, 1), in.gcount() != 0)
        throw IoError(IoErrorCode::kTruncated, path + ": payload length mismatch");
    return file;
}

// --- CSV files ----------------------------------------------------------

namespace {
constexpr const char* kTruthHeader = "frame,label,px,py,vx,vy";
constexpr const char* kMeasHeader = "frame,px,py,vr,r,theta,R00,R01,R11,var_v,snr_db";
constexpr const char* kTracksHeader =
    "frame,track_id,status,px,py,vx,vy,var_px,var_py,cov_pxpy";
constexpr const char* kReportHeader = "frame,ospa,n_truth,n_est";
}  // namespace

void write_truth_csv(const std::string& path, const Scenario& scenario) {
    AtomicWriter w(path);
    std::ostream& out = w.stream();
    out << kTruthHeader << "\n";
    for (std::size_t t = 0; t < scenario.truth.size(); ++t)
        for (const TruthTarget& tt : scenario.truth[t])
            out << t << ',' << tt.label << ',' << fmt_g(tt.x[0]) << ',' << fmt_g(tt.x[2])
                << ',' << fmt_g(tt.x[1]) << ',' << fmt_g(tt.x[3]) << "\n";
    w.commit();
}

std::map<int, LabeledSet> read_truth_csv(const std::string& path) {
    std::map<int, LabeledSet> out;
    for (const auto& row : read_csv(path, kTruthHeader)) {
        if (row.size() != 6) throw IoError(IoErrorCode::kParse, path + ": bad row");
        const int frame = static_cast<int>(parse_double(row[0], path));
        Eigen::Vector4d x;
        x << parse_double(row[2], path), parse_double(row[4], path),
            parse_double(row[3], path), parse_double(row[5], path);
        out[frame].items.emplace_back(
            static_cast<std::int64_t>(parse_double(row[1], path)), x);
    }
    return out;
}

void write_measurements_csv(const std::string& path,
                            const std::vector<std::vector<Measurement>>& frames) {
    AtomicWriter w(path);
    std::ostream& out = w.stream();
    out << kMeasHeader << "\n";
    for (std::size_t t = 0; t < frames.size(); ++t)
        for (const Measurement& m : frames[t])
            out << t << ',' << fmt_g(m.z[0]) << ',' << fmt_g(m.z[1]) << ','
                << fmt_g(m.v_r) << ',' << fmt_g(m.r) << ',' << fmt_g(m.theta) << ','
                << fmt_g(m.R(0, 0)) << ',' << fmt_g(m.R(0, 1)) << ',' << fmt_g(m.R(1, 1))
                << ',' << fmt_g(m.var_v) << ',' << fmt_g(m.snr_db) << "\n";
    w.commit();
}

std::vector<std::vector<Measurement>> read_measurements_csv(const std::string& path) {
    std::vector<std::vector<Measurement>> out;
    for (const auto& row : read_csv(path, kMeasHeader)) {
        if (row.size() != 11) throw IoError(IoErrorCode::kParse, path + ": bad row");
        const int frame = static_cast<int>(parse_double(row[0], path));
        if (frame < 0) throw IoError(IoErrorCode::kParse, path + ": negative frame");
        if (static_cast<std::size_t>(frame) >= out.size()) out.resize(frame + 1);
        Measurement m;
        m.frame = frame;
        m.z << parse_double(row[1], path), parse_double(row[2], path);
        m.v_r = parse_double(row[3], path);
        m.r = parse_double(row[4], path);
        m.theta = parse_double(row[5], path);
        m.R(0, 0) = parse_double(row[6], path);
        m.R(0, 1) = m.R(1, 0) = parse_double(row[7], path);
        m.R(1, 1) = parse_double(row[8], path);
        m.var_v = parse_double(row[9], path);
        m.snr_db = parse_double(row[10], path);
        out[frame].push_back(m);
    }
    return out;
}

void write_tracks_csv(const std::string& path,
                      const std::vector<FrameResult>& snapshots) {
    AtomicWriter w(path);
    std::ostream& out = w.stream();
    out << kTracksHeader << "\n";
    for (const FrameResult& fr : snapshots) {
        std::vector<const Track*> rows;
        for (const Track& t : fr.tracks)
            if (t.status != TrackStatus::kDead) rows.push_back(&t);
        std::sort(rows.begin(), rows.end(),
                  [](const Track* a, const Track* b) { return a->label < b->label; });
        for (const Track* t : rows)
            out << fr.frame << ',' << t->label << ','
                << (t->status == TrackStatus::kActive ? "active" : "tentative") << ','
                << fmt_g(t->x_hat[0]) << ',' << fmt_g(t->x_hat[2]) << ','
                << fmt_g(t->x_hat[1]) << ',' << fmt_g(t->x_hat[3]) << ','
                << fmt_g(t->sigma(0, 0)) << ',' << fmt_g(t->sigma(2, 2)) << ','
                << fmt_g(t->sigma(0, 2)) << "\n";
    }
    w.commit();
}

std::map<int, LabeledSet> read_tracks_csv(const std::string& path,
                                          bool active_only) {
    std::map<int, LabeledSet> out;
    for (const auto& row : read_csv(path, kTracksHeader)) {
        if (row.size() != 10) throw IoError(IoErrorCode::kParse, path + ": bad row");
        if (active_only && row[2] != "active") continue;
        const int frame = static_cast<int>(parse_double(row[0], path));
        Eigen::Vector4d x;
        x << parse_double(row[3], path), parse_double(row[5], path),
            parse_double(row[4], path), parse_double(row[6], path);
        out[frame].items.emplace_back(
            static_cast<std::int64_t>(parse_double(row[1], path)), x);
    }
    return out;
}

void write_report_csv(const std::string& path, const std::vector<EvalRow>& rows) {
    AtomicWriter w(path);
    std::ostream& out = w.stream();
    out << kReportHeader << "\n";
    for (const EvalRow& r : rows)
        out << r.frame << ',' << fmt_g(r.ospa) << ',' << r.n_truth << ',' << r.n_est
            << "\n";
    w.commit();
}

void write_crb_csv(const std::string& path, const std::vector<CrbRow>& rows) {
    AtomicWriter w(path);
    std::ostream& out = w.stream();
    out << "snr_db,crb_px,crb_py,crb_r,crb_v,crb_theta\n";
    for (const CrbRow& r : rows)
        out << fmt_g(r.snr_db) << ',' << fmt_g(r.crb_px) << ',' << fmt_g(r.crb_py) << ','
            << fmt_g(r.crb_r) << ',' << fmt_g(r.crb_v) << ',' << fmt_g(r.crb_theta)
            << "\n";
    w.commit();
}

// --- simulation drivers ---------------------------------------------------

std::vector<BasebandCube> synthesize_scenario_frames(const Scenario& scenario,
                                                     const RadarParams& params,
                                                     double snr_db, Rng& rng) {
    const RadarLimits lim = compute_limits(params);
    const double g = std::sqrt(std::pow(10.0, snr_db / 10.0) /
                               (static_cast<double>(params.n_fast) * params.n_slow));
    std::uniform_real_distribution<double> uph(0.0, 2.0 * kPi);
    bool warned = false;
    std::vector<BasebandCube> frames;
    frames.reserve(scenario.truth.size());
    for (const std::vector<TruthTarget>& targets : scenario.truth) {
        std::vector<PointEcho> echoes;
        echoes.reserve(targets.size());
        for (const TruthTarget& t : targets) {
            PointEcho e;
            e.r = t.range();
            e.v = t.radial_velocity();
            e.theta = t.azimuth();
            e.gamma = std::polar(g, uph(rng));
            if (!warned && std::abs(e.v) > lim.v_max) {
                std::cerr << "warning: radial velocity " << e.v
                          << " m/s exceeds v_max " << lim.v_max << " m/s; aliasing\n";
                warned = true;
            }
            echoes.push_back(e);
        }
        frames.push_back(synthesize_frame(params, echoes, 1.0, rng));
    }
    return frames;
}

std::vector<std::vector<Measurement>> simulate_measurement_frames(
    const Scenario& scenario, const RadarParams& params, double snr_db,
    const MeasLevelOptions& opt, Rng& rng) {
    const RadarLimits lim = compute_limits(params);
    const double g = std::sqrt(std::pow(10.0, snr_db / 10.0) /
                               (static_cast<double>(params.n_fast) * params.n_slow));
    SignalPoint sp;
    sp.g = g;
    sp.sigma2 = 1.0;
    sp.n_fast = params.n_fast;
    sp.n_slow = params.n_slow;
    sp.n_rx = params.n_rx;

    std::normal_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> uvel(-lim.v_max, lim.v_max);
    std::bernoulli_distribution detected(opt.p_d);
    const double theta_cap = kPi / 2.0 - 1e-6;

    auto crb_at = [&](double r, double theta) {
        const double th = std::clamp(theta, -theta_cap, theta_cap);
        return std::pair{crb_pxpy(sp, lim, r, th), crb_pxpyv(sp, lim, r, th)(2, 2)};
    };
    auto make_meas = [&](double px, double py, double vr, int frame) {
        Measurement m;
        m.frame = frame;
        m.z << px, py;
        m.v_r = vr;
        m.r = std::hypot(px, py);
        m.theta = std::atan2(px, py);
        auto [C2, Cv] = crb_at(m.r, m.theta);
        m.R = opt.kappa * C2;
        m.var_v = opt.kappa * Cv;
        m.snr_db = snr_db;
        return m;
    };

    std::vector<std::vector<Measurement>> out(scenario.truth.size());
    for (std::size_t t = 0; t < scenario.truth.size(); ++t) {
        std::vector<Measurement>& frame = out[t];
        if (!opt.fft_emulation) {
            for (const TruthTarget& tt : scenario.truth[t]) {
                const double r = tt.range(), th = tt.azimuth(), vr = tt.radial_velocity();
                auto [C2, Cv] = crb_at(r, th);
                const Eigen::Matrix2d chol = C2.llt().matrixL();
                const Eigen::Vector2d noise = chol * Eigen::Vector2d{unit(rng), unit(rng)};
                const double vn = vr + std::sqrt(Cv) * unit(rng);
                if (!detected(rng)) continue;
                frame.push_back(
                    make_meas(tt.x[0] + noise[0], tt.x[2] + noise[1], vn, static_cast<int>(t)));
            }
        } else {
            // Bin quantization plus same-bin merging: the FFT baseline
            // reports bin centers and cannot split targets that share a
            // range-Doppler cell.
            const int N = params.n_fast, M = params.n_slow;
            std::map<std::pair<int, int>, std::vector<const TruthTarget*>> bins;
            for (const TruthTarget& tt : scenario.truth[t]) {
                const Eigen::Vector3d w =
                    state_to_freq(tt.range(), tt.radial_velocity(), tt.azimuth(), lim);
                const int bi =
                    static_cast<int>(std::lround(wrap_two_pi(w[0]) / (2.0 * kPi / N))) % N;
                const int bj =
                    static_cast<int>(std::lround(wrap_two_pi(w[1]) / (2.0 * kPi / M))) % M;
                bins[{bi, bj}].push_back(&tt);
            }
            for (const auto& [bin, members] : bins) {
                Eigen::Vector3d w{2.0 * kPi * bin.first / N, 2.0 * kPi * bin.second / M,
                                  0.0};
                const PolarState st = freq_to_state(w, lim);
                double theta = 0.0;
                for (const TruthTarget* tt : members) theta += tt->azimuth();
                theta /= members.size();
                // azimuth keeps its CRB-level error; range and velocity
                // are dominated by the bin quantization
                const double th_c = std::clamp(theta, -theta_cap, theta_cap);
                const double crb_theta = crb_rvtheta(sp, lim, th_c)(2, 2);
                theta += std::sqrt(std::min(crb_theta, 1.0)) * unit(rng);
                if (!detected(rng)) continue;
                frame.push_back(make_meas(st.r * std::sin(theta),
                                          st.r * std::cos(theta), st.v,
                                          static_cast<int>(t)));
            }
        }
        for (const Eigen::Vector2d& c : scenario.clutter[t])
            frame.push_back(make_meas(c[0], c[1], uvel(rng), static_cast<int>(t)));
    }
    return out;
}

}  // namespace mmwave
