#pragma once

#include <cstdint>
#include <string>

#include "bevcast/dataio.hpp"
#include "bevcast/grid.hpp"

namespace bevcast {

enum class Scenario { constant_velocity, lane_change, cut_in, mixed };

std::string to_string(Scenario s);
Scenario parse_scenario(const std::string& text);

// Ego-relative highway traffic. x runs ahead of the ego vehicle, y across the
// road with lane centers placed symmetrically about y = 0. Vehicles move
// through [x_min_m, x_max_m]; one leaving the segment is replaced by a new
// vehicle (new id) entering from the opposite end.
struct SynthSpec {
  Scenario scenario = Scenario::mixed;
  int n_vehicles = 4;
  double duration_s = 60.0;
  double frame_rate_hz = 4.0;
  double speed_min_mps = -3.0;  // relative to ego
  double speed_max_mps = 3.0;
  int n_lanes = 3;
  double lane_width_m = 3.5;
  double x_min_m = -10.0;
  double x_max_m = 110.0;
  double change_min_s = 2.0;  // lane-change duration range
  double change_max_s = 4.0;
  double dwell_min_s = 1.0;  // straight driving between lane changes
  double dwell_max_s = 4.0;
  double noise_std_m = 0.0;
  std::uint64_t seed = 0;

  // Lanes and segment sized so the road fills the grid laterally and
  // extends a quarter of its length beyond both ends.
  static SynthSpec for_grid(const GridSpec& g, Scenario scenario);

  double lane_center(int lane) const;
  void validate() const;
};

// Smooth 0 -> 1 ramp with zero velocity and acceleration at both ends.
double lane_change_profile(double tau);

// Deterministic given spec.seed. Lane boundaries are attached as polylines.
TrajectoryTable synthesize(const SynthSpec& spec);

}  // namespace bevcast
