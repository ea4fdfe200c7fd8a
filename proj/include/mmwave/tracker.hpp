#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mmwave/assoc.hpp"
#include "mmwave/detector.hpp"
#include "mmwave/signal.hpp"

namespace mmwave {

enum class TrackStatus { kTentative, kActive, kDead };

struct Track {
    std::int64_t label = 0;
    Eigen::Vector4d x_hat = Eigen::Vector4d::Zero();   // [px, vx, py, vy]
    Eigen::Matrix4d sigma = Eigen::Matrix4d::Identity();
    int miss_count = 0;
    TrackStatus status = TrackStatus::kTentative;
    double theta_last = 0.0;  // azimuth used by the 3D gate
};

struct TrackerConfig {
    double T_frame = 0.1;
    Eigen::Vector2d process_noise{1e-6, 1e-6};  // diagonal of Q
    int n_ext = 2;                 // extrapolations before death
    double birth_threshold = 0.5;  // on xi(h -> 0)
    double miss_threshold = 0.5;   // on beta(k -> 0)

    Eigen::Matrix4d A() const { return cv_transition(T_frame); }
    Eigen::Matrix<double, 4, 2> Gamma() const { return cv_noise_gain(T_frame); }
    Eigen::Matrix2d Q() const { return process_noise.asDiagonal(); }
    void validate() const;
};

/// x(t|t-1) = A x(t-1), Sigma(t|t-1) = A Sigma A^T + Gamma Q Gamma^T.
/// The azimuth for the 3D gate falls back to the predicted position
/// when the track has not been updated yet.
TrackPrediction predict(const Track& track, const TrackerConfig& cfg);

/// PDA-weighted Kalman correction. beta_row is the track's row of the
/// association matrix (column 0 = miss); the gain uses the
/// beta-weighted average R over the associated measurements. A pure
/// miss returns the prediction unchanged.
Track update_pda(const Track& track, const TrackPrediction& pred,
                 const std::vector<Measurement>& measurements,
                 const Eigen::VectorXd& beta_row);

/// New tentative track from an unassociated measurement:
/// x = [r sin(theta), v sin(theta), r cos(theta), v cos(theta)].
Track spawn_track(const Measurement& meas, const RadarLimits& lim,
                  std::int64_t label);

enum class TrackEventKind { kBirth, kDeath, kExtrapolation };

struct TrackEvent {
    TrackEventKind kind;
    std::int64_t label;
};

/// One full correction + lifecycle sweep: tracks with beta(k->0) above
/// the miss threshold extrapolate and age; others get the PDA update.
/// Tracks die after n_ext consecutive misses; measurements with
/// xi(h->0) above the birth threshold spawn tentative tracks that join
/// association at the next frame.
std::vector<TrackEvent> lifecycle_step(std::vector<Track>& tracks,
                                       const std::vector<TrackPrediction>& preds,
                                       const AssocResult& assoc,
                                       const std::vector<Measurement>& measurements,
                                       const TrackerConfig& cfg,
                                       const RadarLimits& lim,
                                       std::int64_t& next_label);

struct ClusterConfig {
    bool enabled = false;
    double d_pos = 1.0;  // m
    double d_vel = 0.5;  // m/s
};

enum class DetectorKind { kMnomp, kFftCfar };

struct PipelineConfig {
    RadarParams radar;
    CfarConfig cfar;
    AssocConfig assoc;
    TrackerConfig tracker;
    ClusterConfig cluster;
    double kappa = 1.2;
    DetectorKind detector = DetectorKind::kMnomp;
};

struct FrameResult {
    int frame = 0;
    std::vector<Measurement> measurements;  // post-clustering
    std::vector<Track> tracks;              // live tracks after lifecycle
    std::vector<TrackEvent> events;
};

/// Detect -> cluster -> gate -> SPA -> PDA-KF -> lifecycle, stateful
/// across frames. Labels are never reused.
class TrackingPipeline {
public:
    explicit TrackingPipeline(const PipelineConfig& cfg);

    FrameResult process_frame(const BasebandCube& cube);
    FrameResult process_frame(std::vector<Measurement> measurements);

    const std::vector<Track>& tracks() const { return tracks_; }
    const PipelineConfig& config() const { return cfg_; }

private:
    PipelineConfig cfg_;
    RadarLimits lim_;
    MnompDetector detector_;
    std::vector<Track> tracks_;
    std::int64_t next_label_ = 1;
    int frame_ = 0;
};

}  // namespace mmwave
