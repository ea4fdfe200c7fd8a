#include "mmwave/tracker.hpp"

#include <cmath>
#include <stdexcept>

namespace mmwave {

namespace {

// Symmetrize and floor the eigenvalues so the covariance stays PD
// through long extrapolation runs.
Eigen::Matrix4d make_pd(const Eigen::Matrix4d& S) {
    Eigen::Matrix4d sym = 0.5 * (S + S.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(sym);
    if (eig.eigenvalues().minCoeff() >= 1e-12) return sym;
    Eigen::Vector4d ev = eig.eigenvalues().cwiseMax(1e-12);
    return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

void TrackerConfig::validate() const {
    if (T_frame <= 0.0) throw std::invalid_argument("TrackerConfig: T_frame <= 0");
    if (n_ext < 1) throw std::invalid_argument("TrackerConfig: n_ext must be >= 1");
    if (birth_threshold <= 0.0 || birth_threshold >= 1.0 || miss_threshold <= 0.0 ||
        miss_threshold >= 1.0)
        throw std::invalid_argument("TrackerConfig: thresholds must be in (0, 1)");
}

TrackPrediction predict(const Track& track, const TrackerConfig& cfg) {
    if (track.status == TrackStatus::kDead)
        throw std::invalid_argument("predict: dead track");
    const Eigen::Matrix4d A = cfg.A();
    const auto Gamma = cfg.Gamma();
    TrackPrediction pred;
    pred.x = A * track.x_hat;
    pred.sigma = make_pd(A * track.sigma * A.transpose() +
                         Gamma * cfg.Q() * Gamma.transpose());
    // The azimuth entering H' comes from the previous measurements via
    // the filter; the propagated position keeps it current with the
    // frame being gated. Falls back to the spawn azimuth while the
    // position is still at the origin degenerate case.
    const double rng2 = pred.x[0] * pred.x[0] + pred.x[2] * pred.x[2];
    pred.theta = rng2 > 1e-12 ? std::atan2(pred.x[0], pred.x[2]) : track.theta_last;
    return pred;
}

Track update_pda(const Track& track, const TrackPrediction& pred,
                 const std::vector<Measurement>& measurements,
                 const Eigen::VectorXd& beta_row) {
    const int H = static_cast<int>(measurements.size());
    if (beta_row.size() != H + 1)
        throw std::invalid_argument("update_pda: beta row size mismatch");

    Track out = track;
    const double beta_miss = beta_row[0];
    double assoc_mass = 0.0;
    for (int h = 0; h < H; ++h) assoc_mass += beta_row[h + 1];
    if (assoc_mass <= 0.0) {  // pure miss: posterior is exactly the prediction
        out.x_hat = pred.x;
        out.sigma = pred.sigma;
        return out;
    }

    const auto Hm = measurement_matrix();
    // Combined measurement covariance: beta-weighted average over the
    // associated measurements, weights renormalized over h >= 1.
    Eigen::Matrix2d Rbar = Eigen::Matrix2d::Zero();
    for (int h = 0; h < H; ++h)
        Rbar += (beta_row[h + 1] / assoc_mass) * measurements[h].R;

    const Eigen::Matrix2d S = Hm * pred.sigma * Hm.transpose() + Rbar;
    Eigen::LLT<Eigen::Matrix2d> llt(S);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("update_pda: singular innovation covariance");
    const Eigen::Matrix<double, 4, 2> K = pred.sigma * Hm.transpose() * llt.solve(
        Eigen::Matrix2d::Identity());

    Eigen::Vector2d dbar = Eigen::Vector2d::Zero();
    Eigen::Matrix2d spread = Eigen::Matrix2d::Zero();
    for (int h = 0; h < H; ++h) {
        const Eigen::Vector2d e = measurements[h].z - Hm * pred.x;
        dbar += beta_row[h + 1] * e;
        spread += beta_row[h + 1] * e * e.transpose();
    }
    out.x_hat = pred.x + K * dbar;
    const Eigen::Matrix4d spread_term =
        K * (spread - dbar * dbar.transpose()) * K.transpose();
    out.sigma = make_pd(pred.sigma -
                        (1.0 - beta_miss) * K * Hm * pred.sigma + spread_term);
    out.theta_last = std::atan2(out.x_hat[0], out.x_hat[2]);
    return out;
}

Track spawn_track(const Measurement& meas, const RadarLimits& lim,
                  std::int64_t label) {
    Track t;
    t.label = label;
    const double s = std::sin(meas.theta), c = std::cos(meas.theta);
    t.x_hat << meas.r * s, meas.v_r * s, meas.r * c, meas.v_r * c;
    const double vel_var = (lim.v_max / 3.0) * (lim.v_max / 3.0);
    t.sigma.setZero();
    t.sigma(0, 0) = meas.R(0, 0);
    t.sigma(0, 2) = meas.R(0, 1);
    t.sigma(2, 0) = meas.R(1, 0);
    t.sigma(2, 2) = meas.R(1, 1);
    t.sigma(1, 1) = vel_var;
    t.sigma(3, 3) = vel_var;
    t.status = TrackStatus::kTentative;
    t.miss_count = 0;
    t.theta_last = meas.theta;
    return t;
}

std::vector<TrackEvent> lifecycle_step(std::vector<Track>& tracks,
                                       const std::vector<TrackPrediction>& preds,
                                       const AssocResult& assoc,
                                       const std::vector<Measurement>& measurements,
                                       const TrackerConfig& cfg,
                                       const RadarLimits& lim,
                                       std::int64_t& next_label) {
    cfg.validate();
    if (tracks.size() != preds.size() ||
        static_cast<int>(tracks.size()) != assoc.beta.rows())
        throw std::invalid_argument("lifecycle_step: inconsistent sizes");

    std::vector<TrackEvent> events;
    for (std::size_t k = 0; k < tracks.size(); ++k) {
        Track& t = tracks[k];
        if (assoc.beta(k, 0) > cfg.miss_threshold) {
            t.x_hat = preds[k].x;  // extrapolate
            t.sigma = preds[k].sigma;
            ++t.miss_count;
            if (t.miss_count >= cfg.n_ext) {
                t.status = TrackStatus::kDead;
                events.push_back({TrackEventKind::kDeath, t.label});
            } else {
                events.push_back({TrackEventKind::kExtrapolation, t.label});
            }
        } else {
            t = update_pda(t, preds[k], measurements, assoc.beta.row(k).transpose());
            t.miss_count = 0;
            if (t.status == TrackStatus::kTentative) t.status = TrackStatus::kActive;
        }
    }
    std::erase_if(tracks, [](const Track& t) { return t.status == TrackStatus::kDead; });

    for (std::size_t h = 0; h < measurements.size(); ++h) {
        if (assoc.xi(h, 0) > cfg.birth_threshold) {
            tracks.push_back(spawn_track(measurements[h], lim, next_label++));
            events.push_back({TrackEventKind::kBirth, tracks.back().label});
        }
    }
    return events;
}

TrackingPipeline::TrackingPipeline(const PipelineConfig& cfg)
    : cfg_(cfg), lim_(compute_limits(cfg.radar)), detector_(cfg.radar, cfg.cfar) {
    cfg_.assoc.validate();
    cfg_.tracker.validate();
}

FrameResult TrackingPipeline::process_frame(const BasebandCube& cube) {
    DetectionResult det = cfg_.detector == DetectorKind::kMnomp
                              ? detector_.detect(cube)
                              : detector_.detect_fft_cfar(cube);
    std::vector<Measurement> meas;
    meas.reserve(det.detections.size());
    for (const Detection& d : det.detections) {
        Measurement m = to_pseudo_measurement(d, cfg_.radar, det.sigma2_hat, cfg_.kappa);
        m.frame = frame_;
        meas.push_back(m);
    }
    return process_frame(std::move(meas));
}

FrameResult TrackingPipeline::process_frame(std::vector<Measurement> measurements) {
    if (cfg_.cluster.enabled)
        measurements =
            cluster_measurements(measurements, cfg_.cluster.d_pos, cfg_.cluster.d_vel);
    for (Measurement& m : measurements) m.frame = frame_;

    std::vector<TrackPrediction> preds;
    preds.reserve(tracks_.size());
    for (const Track& t : tracks_) preds.push_back(predict(t, cfg_.tracker));

    const AssocResult assoc = associate(preds, measurements, cfg_.assoc);

    FrameResult out;
    out.frame = frame_;
    out.events = lifecycle_step(tracks_, preds, assoc, measurements, cfg_.tracker,
                                lim_, next_label_);
    out.measurements = std::move(measurements);
    out.tracks = tracks_;
    ++frame_;
    return out;
}

}  // namespace mmwave
