#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace mmwave {

/// Labeled state set at one frame; states are [px, vx, py, vy].
struct LabeledSet {
    std::vector<std::pair<std::int64_t, Eigen::Vector4d>> items;
};

/// Minimum-cost assignment on a square cost matrix; returns the column
/// assigned to each row.
std::vector<int> hungarian(const Eigen::MatrixXd& cost);

/// OSPA distance with order p and cutoff c. The base distance is the
/// Euclidean position distance (labels and velocities ignored). Both
/// sets empty gives 0.
double ospa(const LabeledSet& X, const LabeledSet& Y, double p, double c);

/// Arithmetic mean of per-frame OSPA over a series of (truth, estimate)
/// pairs.
double mospa(const std::vector<std::pair<LabeledSet, LabeledSet>>& series, double p,
             double c);

}  // namespace mmwave
