#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "bevcast/grid.hpp"
#include "bevcast/scene.hpp"

namespace bevcast {

// Constant-velocity filter over [x, y, v_x, v_y] with identity observation.
struct KfState {
  Eigen::Vector4d x = Eigen::Vector4d::Zero();
  Eigen::Matrix4d P = Eigen::Matrix4d::Identity();
  Eigen::Matrix4d Q = Eigen::Vector4d(1e-2, 1e-2, 1e-1, 1e-1).asDiagonal();
  Eigen::Matrix4d R = Eigen::Vector4d(1e-2, 1e-2, 1e-1, 1e-1).asDiagonal();
  double dt = 0.25;
};

struct KfNoise {
  Eigen::Matrix4d Q = Eigen::Vector4d(1e-2, 1e-2, 1e-1, 1e-1).asDiagonal();
  Eigen::Matrix4d R = Eigen::Vector4d(1e-2, 1e-2, 1e-1, 1e-1).asDiagonal();
};

Eigen::Matrix4d transition_matrix(double dt);

// Predict with the constant-velocity transition, then correct when an
// observation is given. P is re-symmetrized after each stage. Throws
// std::invalid_argument on a non-finite observation and std::runtime_error
// if P stops being positive semi-definite.
KfState kf_step(const KfState& s, const std::optional<Eigen::Vector4d>& obs);

// Warm-up over the track (velocity observed by backward differences), then
// `steps` open-loop predictions. Throws std::invalid_argument for tracks
// shorter than two samples.
std::vector<Point2> predict_horizon(const VehicleTrack& track, int steps, const KfNoise& noise = {});

}  // namespace bevcast
