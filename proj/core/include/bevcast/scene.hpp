#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "bevcast/grid.hpp"

namespace bevcast {

// Opaque track identifier. Datasets use numeric or textual ids; both are
// carried verbatim.
class TrackId {
 public:
  TrackId() = default;
  explicit TrackId(std::string value) : value_(std::move(value)) {}
  explicit TrackId(long long value) : value_(std::to_string(value)) {}

  const std::string& str() const { return value_; }

  friend auto operator<=>(const TrackId&, const TrackId&) = default;
  friend bool operator==(const TrackId&, const TrackId&) = default;

 private:
  std::string value_;
};

struct VehicleState {
  TrackId id;
  double x_m = 0.0;
  double y_m = 0.0;
  double t_s = 0.0;

  Point2 position() const { return {x_m, y_m}; }
};

// Uniformly sampled history of one vehicle.
class VehicleTrack {
 public:
  // Throws std::invalid_argument when ids differ, timestamps do not strictly
  // increase, or the spacing deviates from dt by 1e-6 s or more.
  VehicleTrack(TrackId id, std::vector<VehicleState> samples, double dt);

  const TrackId& id() const { return id_; }
  const std::vector<VehicleState>& samples() const { return samples_; }
  double dt() const { return dt_; }
  std::size_t size() const { return samples_.size(); }

 private:
  TrackId id_;
  std::vector<VehicleState> samples_;
  double dt_;
};

using Frame = std::vector<VehicleState>;
using Polyline = std::vector<Point2>;

// Aligned past/future slices of a multi-vehicle scene.
class SceneWindow {
 public:
  // Throws std::invalid_argument if either side is empty or an output frame
  // references a vehicle absent from the latest input frame.
  SceneWindow(std::vector<Frame> input_frames, std::vector<Frame> output_frames,
              std::vector<Polyline> lanes, double anchor_time);

  const std::vector<Frame>& input_frames() const { return input_; }
  const std::vector<Frame>& output_frames() const { return output_; }
  const std::vector<Polyline>& lanes() const { return lanes_; }
  double anchor_time() const { return anchor_time_; }

  std::size_t input_length() const { return input_.size(); }
  std::size_t output_length() const { return output_.size(); }
  const Frame& latest_input() const { return input_.back(); }

 private:
  std::vector<Frame> input_;
  std::vector<Frame> output_;
  std::vector<Polyline> lanes_;
  double anchor_time_;
};

enum class VehicleShape { gaussian, rectangle };
enum class MergeMode { max, add };

struct RenderOptions {
  VehicleShape shape = VehicleShape::gaussian;
  MergeMode merge = MergeMode::max;
  double vehicle_value = 1.0;
  double lane_value = 1.0;
  double rect_w_m = 1.8;  // lateral footprint
  double rect_h_m = 5.0;  // longitudinal footprint
  double sigma_x_m = 2.5;  // longitudinal spread, half of rect_h_m
  double sigma_y_m = 0.9;  // lateral spread, half of rect_w_m

  // Defaults for a shape: Gaussians peak at 1.0, rectangles are filled at 128/255.
  static RenderOptions for_shape(VehicleShape shape);

  // Sets the footprint and resets the Gaussian spread to half of it.
  RenderOptions& set_footprint(double width_m, double length_m);

  void validate() const;
};

std::string to_string(VehicleShape shape);
VehicleShape parse_shape(const std::string& text);
std::string to_string(MergeMode mode);
MergeMode parse_merge(const std::string& text);

}  // namespace bevcast

template <>
struct std::hash<bevcast::TrackId> {
  std::size_t operator()(const bevcast::TrackId& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};
