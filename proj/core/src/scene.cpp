#include "bevcast/scene.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace bevcast {

VehicleTrack::VehicleTrack(TrackId id, std::vector<VehicleState> samples, double dt)
    : id_(std::move(id)), samples_(std::move(samples)), dt_(dt) {
  if (!(dt_ > 0.0)) throw std::invalid_argument("track: dt must be positive");
  for (std::size_t k = 0; k < samples_.size(); ++k) {
    if (samples_[k].id != id_) {
      throw std::invalid_argument("track " + id_.str() + ": sample carries id " +
                                  samples_[k].id.str());
    }
    if (k == 0) continue;
    const double step = samples_[k].t_s - samples_[k - 1].t_s;
    if (!(step > 0.0)) {
      throw std::invalid_argument("track " + id_.str() + ": timestamps must increase");
    }
    if (std::abs(step - dt_) >= 1e-6) {
      throw std::invalid_argument("track " + id_.str() + ": non-uniform sampling");
    }
  }
}

SceneWindow::SceneWindow(std::vector<Frame> input_frames, std::vector<Frame> output_frames,
                         std::vector<Polyline> lanes, double anchor_time)
    : input_(std::move(input_frames)),
      output_(std::move(output_frames)),
      lanes_(std::move(lanes)),
      anchor_time_(anchor_time) {
  if (input_.empty() || output_.empty()) {
    throw std::invalid_argument("window: input and output must each hold a frame");
  }
  std::unordered_set<TrackId> latest;
  for (const auto& v : input_.back()) latest.insert(v.id);
  for (std::size_t k = 0; k < output_.size(); ++k) {
    for (const auto& v : output_[k]) {
      if (!latest.contains(v.id)) {
        throw std::invalid_argument("window: output frame " + std::to_string(k) +
                                    " holds vehicle " + v.id.str() +
                                    " absent from the latest input frame");
      }
    }
  }
}

RenderOptions RenderOptions::for_shape(VehicleShape shape) {
  RenderOptions o;
  o.shape = shape;
  o.vehicle_value = shape == VehicleShape::rectangle ? 128.0 / 255.0 : 1.0;
  return o;
}

RenderOptions& RenderOptions::set_footprint(double width_m, double length_m) {
  rect_w_m = width_m;
  rect_h_m = length_m;
  sigma_x_m = length_m / 2.0;
  sigma_y_m = width_m / 2.0;
  return *this;
}

void RenderOptions::validate() const {
  if (!(vehicle_value > 0.0 && vehicle_value <= 1.0)) {
    throw std::invalid_argument("render: vehicle value must lie in (0, 1]");
  }
  if (!(lane_value >= 0.0 && lane_value <= 1.0)) {
    throw std::invalid_argument("render: lane value must lie in [0, 1]");
  }
  if (!(rect_w_m > 0.0 && rect_h_m > 0.0 && sigma_x_m > 0.0 && sigma_y_m > 0.0)) {
    throw std::invalid_argument("render: footprint and spread must be positive");
  }
}

std::string to_string(VehicleShape shape) {
  return shape == VehicleShape::gaussian ? "gaussian" : "rect";
}

VehicleShape parse_shape(const std::string& text) {
  if (text == "gaussian") return VehicleShape::gaussian;
  if (text == "rect" || text == "rectangle") return VehicleShape::rectangle;
  throw std::invalid_argument("unknown vehicle shape '" + text + "'");
}

std::string to_string(MergeMode mode) { return mode == MergeMode::max ? "max" : "add"; }

MergeMode parse_merge(const std::string& text) {
  if (text == "max") return MergeMode::max;
  if (text == "add") return MergeMode::add;
  throw std::invalid_argument("unknown merge mode '" + text + "'");
}

}  // namespace bevcast
