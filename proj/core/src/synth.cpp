#include "bevcast/synth.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "bevcast/random.hpp"

namespace bevcast {

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::constant_velocity: return "constant_velocity";
    case Scenario::lane_change: return "lane_change";
    case Scenario::cut_in: return "cut_in";
    case Scenario::mixed: return "mixed";
  }
  return "mixed";
}

Scenario parse_scenario(const std::string& text) {
  if (text == "constant_velocity" || text == "cv") return Scenario::constant_velocity;
  if (text == "lane_change") return Scenario::lane_change;
  if (text == "cut_in") return Scenario::cut_in;
  if (text == "mixed") return Scenario::mixed;
  throw std::invalid_argument("unknown scenario '" + text + "'");
}

SynthSpec SynthSpec::for_grid(const GridSpec& g, Scenario scenario) {
  SynthSpec s;
  s.scenario = scenario;
  const double width = 2.0 * g.y_half_range_m();
  s.n_lanes = std::max(2, static_cast<int>(std::floor(width / 3.5)));
  s.lane_width_m = std::min(3.5, width / s.n_lanes);
  s.x_min_m = -0.25 * g.x_range_m();
  s.x_max_m = 1.25 * g.x_range_m();
  return s;
}

double SynthSpec::lane_center(int lane) const {
  return (lane - 0.5 * (n_lanes - 1)) * lane_width_m;
}

void SynthSpec::validate() const {
  if (n_vehicles < 1) throw std::invalid_argument("synth: n_vehicles must be >= 1");
  if (!(duration_s > 0.0 && frame_rate_hz > 0.0)) {
    throw std::invalid_argument("synth: duration and frame rate must be positive");
  }
  if (!(speed_min_mps <= speed_max_mps)) throw std::invalid_argument("synth: empty speed range");
  if (n_lanes < 1 || !(lane_width_m > 0.0)) throw std::invalid_argument("synth: invalid lanes");
  if (!(x_min_m < x_max_m)) throw std::invalid_argument("synth: empty road segment");
  if (!(change_min_s > 0.0 && change_min_s <= change_max_s)) {
    throw std::invalid_argument("synth: invalid lane-change duration range");
  }
  if (!(dwell_min_s >= 0.0 && dwell_min_s <= dwell_max_s)) {
    throw std::invalid_argument("synth: invalid dwell range");
  }
  if (!(noise_std_m >= 0.0)) throw std::invalid_argument("synth: negative noise");
  if (scenario != Scenario::constant_velocity && n_lanes < 2) {
    throw std::invalid_argument("synth: lane changes need at least two lanes");
  }
}

double lane_change_profile(double tau) {
  const double t = std::clamp(tau, 0.0, 1.0);
  return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

namespace {

enum class Behavior { straight, weave, cut_in };

struct Vehicle {
  long long id = 0;
  double x = 0.0;
  double v = 0.0;
  int lane = 0;
  int target = 0;
  Behavior behavior = Behavior::straight;
  double change_start = 0.0;  // absolute time of the next or current change
  double change_dur = 0.0;
  bool changing = false;
};

class Generator {
 public:
  explicit Generator(const SynthSpec& s) : s_(s), rng_(s.seed) {
    ego_lane_ = 0;
    for (int l = 1; l < s_.n_lanes; ++l) {
      if (std::abs(s_.lane_center(l)) < std::abs(s_.lane_center(ego_lane_))) ego_lane_ = l;
    }
  }

  TrajectoryTable run() {
    TrajectoryTable t;
    t.frame_rate_hz = s_.frame_rate_hz;
    const double dt = 1.0 / s_.frame_rate_hz;
    const auto n_frames = static_cast<std::int64_t>(std::floor(s_.duration_s * s_.frame_rate_hz));

    std::vector<Vehicle> fleet;
    for (int i = 0; i < s_.n_vehicles; ++i) {
      fleet.push_back(spawn(0.0, fleet, std::nullopt));
    }
    for (std::int64_t f = 0; f < n_frames; ++f) {
      const double time = static_cast<double>(f) * dt;
      for (auto& veh : fleet) {
        if (veh.x < s_.x_min_m || veh.x > s_.x_max_m) {
          veh = spawn(time, fleet, veh.v >= 0.0 ? s_.x_min_m : s_.x_max_m);
        }
        advance_lane(veh, time);
        TrajectoryRow row;
        row.frame = f;
        row.id = TrackId(veh.id);
        row.x_m = veh.x;
        row.y_m = lateral(veh, time);
        if (s_.noise_std_m > 0.0) {
          row.x_m += s_.noise_std_m * rng_.normal();
          row.y_m += s_.noise_std_m * rng_.normal();
        }
        row.lane = veh.changing ? veh.target : veh.lane;
        t.rows.push_back(std::move(row));
      }
      for (auto& veh : fleet) veh.x += veh.v * dt;
    }
    std::sort(t.rows.begin(), t.rows.end(), [](const auto& a, const auto& b) {
      return a.frame != b.frame ? a.frame < b.frame : std::stoll(a.id.str()) < std::stoll(b.id.str());
    });

    const double half = 0.5 * s_.n_lanes * s_.lane_width_m;
    for (int b = 0; b <= s_.n_lanes; ++b) {
      const double y = -half + b * s_.lane_width_m;
      t.lanes.push_back({{s_.x_min_m, y}, {s_.x_max_m, y}});
    }
    return t;
  }

 private:
  Behavior pick_behavior() {
    switch (s_.scenario) {
      case Scenario::constant_velocity: return Behavior::straight;
      case Scenario::lane_change: return Behavior::weave;
      case Scenario::cut_in: return Behavior::cut_in;
      case Scenario::mixed: {
        const double u = rng_.uniform();
        return u < 0.4 ? Behavior::straight : (u < 0.8 ? Behavior::weave : Behavior::cut_in);
      }
    }
    return Behavior::straight;
  }

  // Starts a vehicle at `entry` (or anywhere on the segment), preferring a
  // lane without a neighbor within 8 m.
  Vehicle spawn(double time, const std::vector<Vehicle>& others, std::optional<double> entry) {
    Vehicle veh;
    veh.id = next_id_++;
    veh.behavior = pick_behavior();
    veh.v = rng_.uniform(s_.speed_min_mps, s_.speed_max_mps);
    if (entry) {
      // Entering vehicles must move into the segment.
      if (*entry <= s_.x_min_m && veh.v < 0.0) veh.v = -veh.v;
      if (*entry >= s_.x_max_m && veh.v > 0.0) veh.v = -veh.v;
    }
    for (int attempt = 0; attempt < 10; ++attempt) {
      veh.x = entry ? *entry : rng_.uniform(s_.x_min_m, s_.x_max_m);
      veh.lane = static_cast<int>(rng_.uniform_int(0, s_.n_lanes - 1));
      if (veh.behavior == Behavior::cut_in && s_.n_lanes > 1) {
        while (veh.lane == ego_lane_) veh.lane = static_cast<int>(rng_.uniform_int(0, s_.n_lanes - 1));
      }
      const bool clear = std::none_of(others.begin(), others.end(), [&](const Vehicle& o) {
        return o.id != veh.id && o.lane == veh.lane && std::abs(o.x - veh.x) < 8.0;
      });
      if (clear) break;
    }
    veh.target = veh.lane;
    schedule(veh, time);
    return veh;
  }

  void schedule(Vehicle& veh, double after) {
    veh.changing = false;
    if (veh.behavior == Behavior::straight) return;
    if (veh.behavior == Behavior::cut_in && veh.lane == ego_lane_) {
      veh.behavior = Behavior::straight;
      return;
    }
    veh.change_start = after + rng_.uniform(s_.dwell_min_s, s_.dwell_max_s);
    veh.change_dur = rng_.uniform(s_.change_min_s, s_.change_max_s);
    if (veh.behavior == Behavior::cut_in) {
      veh.target = veh.lane + (ego_lane_ > veh.lane ? 1 : -1);
    } else if (veh.lane == 0) {
      veh.target = 1;
    } else if (veh.lane == s_.n_lanes - 1) {
      veh.target = veh.lane - 1;
    } else {
      veh.target = veh.lane + (rng_.uniform() < 0.5 ? -1 : 1);
    }
  }

  void advance_lane(Vehicle& veh, double time) {
    if (veh.behavior == Behavior::straight) return;
    if (time >= veh.change_start + veh.change_dur) {
      veh.lane = veh.target;
      schedule(veh, veh.change_start + veh.change_dur);
    }
    veh.changing = veh.behavior != Behavior::straight && time > veh.change_start;
  }

  double lateral(const Vehicle& veh, double time) const {
    if (!veh.changing) return s_.lane_center(veh.lane);
    const double tau = (time - veh.change_start) / veh.change_dur;
    const double a = s_.lane_center(veh.lane);
    const double b = s_.lane_center(veh.target);
    return a + (b - a) * lane_change_profile(tau);
  }

  const SynthSpec& s_;
  Rng rng_;
  int ego_lane_ = 0;
  long long next_id_ = 1;
};

}  // namespace

TrajectoryTable synthesize(const SynthSpec& spec) {
  spec.validate();
  return Generator(spec).run();
}

}  // namespace bevcast
