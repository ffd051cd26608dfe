#include <cmath>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "bevcast/synth.hpp"

using namespace bevcast;

namespace {

std::map<TrackId, std::vector<TrajectoryRow>> by_track(const TrajectoryTable& t) {
  std::map<TrackId, std::vector<TrajectoryRow>> out;
  for (const auto& r : t.rows) out[r.id].push_back(r);
  return out;
}

bool is_center(const SynthSpec& s, double y) {
  for (int l = 0; l < s.n_lanes; ++l) {
    if (std::abs(y - s.lane_center(l)) < 1e-12) return true;
  }
  return false;
}

}  // namespace

TEST(Synth, ProfileIsSmoothRamp) {
  EXPECT_DOUBLE_EQ(lane_change_profile(0.0), 0.0);
  EXPECT_DOUBLE_EQ(lane_change_profile(1.0), 1.0);
  EXPECT_DOUBLE_EQ(lane_change_profile(0.5), 0.5);
  EXPECT_DOUBLE_EQ(lane_change_profile(-1.0), 0.0);
  const double h = 1e-5;
  EXPECT_NEAR((lane_change_profile(h) - lane_change_profile(0.0)) / h, 0.0, 1e-8);
}

TEST(Synth, ConstantVelocityIsLinearInTime) {
  auto spec = SynthSpec::for_grid(GridSpec::desk(), Scenario::constant_velocity);
  spec.duration_s = 30.0;
  spec.seed = 3;
  const auto t = synthesize(spec);
  for (const auto& [id, rows] : by_track(t)) {
    for (std::size_t k = 2; k < rows.size(); ++k) {
      EXPECT_EQ(rows[k].frame, rows[k - 1].frame + 1);
      const double d1 = rows[k].x_m - rows[k - 1].x_m;
      const double d0 = rows[k - 1].x_m - rows[k - 2].x_m;
      EXPECT_NEAR(d1, d0, 1e-12);
      EXPECT_EQ(rows[k].y_m, rows[0].y_m);
    }
  }
}

TEST(Synth, LaneChangesConnectAdjacentCenters) {
  auto spec = SynthSpec::for_grid(GridSpec::preset("tiny"), Scenario::lane_change);
  spec.duration_s = 60.0;
  spec.seed = 4;
  const auto t = synthesize(spec);
  int changes = 0;
  for (const auto& [id, rows] : by_track(t)) {
    EXPECT_TRUE(is_center(spec, rows.front().y_m));
    double held = rows.front().y_m;
    for (const auto& r : rows) {
      if (!is_center(spec, r.y_m)) continue;
      if (r.y_m != held) {
        EXPECT_NEAR(std::abs(r.y_m - held), spec.lane_width_m, 1e-12);
        held = r.y_m;
        ++changes;
      }
    }
  }
  EXPECT_GT(changes, 5);
}

TEST(Synth, SameSeedSameTable) {
  auto spec = SynthSpec::for_grid(GridSpec::desk(), Scenario::mixed);
  spec.noise_std_m = 0.05;
  spec.seed = 11;
  std::ostringstream a, b, c;
  write_csv(a, synthesize(spec));
  write_csv(b, synthesize(spec));
  spec.seed = 12;
  write_csv(c, synthesize(spec));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_NE(a.str(), c.str());
}

TEST(Synth, TableIsValidAndHasLanes) {
  auto spec = SynthSpec::for_grid(GridSpec::desk(), Scenario::cut_in);
  spec.seed = 2;
  const auto t = synthesize(spec);
  EXPECT_NO_THROW(t.validate());
  EXPECT_EQ(t.lanes.size(), static_cast<std::size_t>(spec.n_lanes + 1));
  EXPECT_DOUBLE_EQ(t.frame_rate_hz, 4.0);
  EXPECT_EQ(t.rows.size(), static_cast<std::size_t>(spec.n_vehicles * 240));
}

TEST(Synth, ValidatesSpec) {
  SynthSpec s;
  s.n_vehicles = 0;
  EXPECT_THROW(synthesize(s), std::invalid_argument);
  s = {};
  s.n_lanes = 1;
  s.scenario = Scenario::lane_change;
  EXPECT_THROW(synthesize(s), std::invalid_argument);
  EXPECT_EQ(parse_scenario("cut_in"), Scenario::cut_in);
  EXPECT_THROW(parse_scenario("rally"), std::invalid_argument);
}
