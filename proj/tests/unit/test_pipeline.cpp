#include <atomic>
#include <cmath>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "bevcast/pipeline.hpp"
#include "bevcast/synth.hpp"

using namespace bevcast;

namespace {

std::vector<SceneWindow> cv_windows(const GridSpec& g, std::uint64_t seed) {
  auto spec = SynthSpec::for_grid(g, Scenario::constant_velocity);
  spec.duration_s = 20.0;
  spec.seed = seed;
  return slice_windows(synthesize(spec), g, 8, 8, 4);
}

}  // namespace

TEST(Manifest, ParseWriteRoundTrip) {
  RunManifest m;
  m.set("b.key", "2");
  m.set("a", "x y");
  std::ostringstream os;
  m.write(os);
  EXPECT_EQ(os.str(), "a=x y\nb.key=2\n");
  std::istringstream is("# comment\n\n a = x y \nb.key=2\n");
  const auto back = RunManifest::parse(is, "m");
  EXPECT_EQ(back.entries(), m.entries());
  EXPECT_THROW(back.require("missing"), std::runtime_error);
  std::istringstream bad("novalue\n");
  EXPECT_THROW(RunManifest::parse(bad, "m"), std::runtime_error);
}

TEST(Settings, ManifestRoundTrip) {
  auto s = PipelineSettings::make(GridSpec::preset("tiny"),
                                  RenderOptions::for_shape(VehicleShape::rectangle), true);
  s.association.max_distance = 4.5;
  RunManifest m;
  s.to_manifest(m);
  const auto back = PipelineSettings::from_manifest(m);
  EXPECT_EQ(back.grid, s.grid);
  EXPECT_EQ(back.render.shape, VehicleShape::rectangle);
  EXPECT_DOUBLE_EQ(back.render.vehicle_value, s.render.vehicle_value);
  EXPECT_TRUE(back.with_lanes);
  EXPECT_EQ(back.extraction.win_h, s.extraction.win_h);
  EXPECT_DOUBLE_EQ(back.extraction.p_min, s.extraction.p_min);
  EXPECT_EQ(back.association.max_distance, 4.5);
}

TEST(Parallel, CoversEveryIndexOnceAndRethrows) {
  for (int jobs : {1, 3, 8}) {
    std::vector<int> hits(100, 0);
    parallel_for(hits.size(), jobs, [&](std::size_t i) { hits[i] += 1; });
    EXPECT_EQ(std::count(hits.begin(), hits.end(), 1), 100);
  }
  EXPECT_THROW(parallel_for(10, 4,
                            [](std::size_t i) {
                              if (i == 5) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}

TEST(Forecast, KalmanExactOnConstantVelocity) {
  const auto g = GridSpec::desk();
  const auto windows = cv_windows(g, 1);
  ASSERT_FALSE(windows.empty());
  const auto s = PipelineSettings::make(g, RenderOptions{}, false);
  std::vector<WindowForecast> f;
  for (const auto& w : windows) f.push_back(forecast_kf(w, s));
  const auto rep = evaluate_forecasts(windows, f);
  // Vehicles that entered at the latest input frame have no velocity and
  // count as missed.
  EXPECT_GT(rep.n_missed, 0u);
  EXPECT_LT(rep.ade_x, 1e-6);
  EXPECT_LT(rep.ade_y, 1e-6);
  EXPECT_GT(rep.n_trajectories, 0u);
}

TEST(Forecast, DecodingRenderedTargetsRecoversTruth) {
  const auto g = GridSpec::full();
  const auto windows = cv_windows(g, 2);
  const auto s = PipelineSettings::make(g, RenderOptions::for_shape(VehicleShape::gaussian), false);
  // Centroid windows clipped by the border are biased; score vehicles whose
  // window and neighbours stay clear of the border and of each other.
  const double mx = 4.0 * s.render.sigma_x_m;
  const double my = 4.0 * s.render.sigma_y_m;
  auto clear = [&](const Point2& p, const Frame& frame) {
    if (p.x < mx || p.x > g.x_range_m() - mx || std::abs(p.y) > g.y_half_range_m() - my) return false;
    int near = 0;
    for (const auto& v : frame) {
      near += std::abs(v.x_m - p.x) < 2.0 * mx && std::abs(v.y_m - p.y) < 2.0 * my;
    }
    return near == 1;
  };
  double worst_x = 0.0, worst_y = 0.0;
  std::size_t scored = 0;
  for (const auto& w : windows) {
    const auto enc = encode_window(w, s.render, s.grid, false);
    const auto f = decode_heatmaps(to_tensor<float>(enc.target), w, s);
    const auto recs = score_window(w, f);
    for (const auto& r : recs) {
      for (std::size_t k = 0; k < r.truth.size(); ++k) {
        if (!r.truth[k] || !clear(*r.truth[k], w.output_frames()[k])) continue;
        ASSERT_TRUE(r.predicted[k].has_value());
        worst_x = std::max(worst_x, std::abs(r.predicted[k]->x - r.truth[k]->x));
        worst_y = std::max(worst_y, std::abs(r.predicted[k]->y - r.truth[k]->y));
        ++scored;
      }
    }
  }
  EXPECT_GT(scored, 50u);
  // The 3 sigma window truncates an off-center Gaussian asymmetrically.
  EXPECT_LT(worst_x, 5e-3);
  EXPECT_LT(worst_y, 5e-3);
}

TEST(Forecast, NetworkPathRespectsCoexistence) {
  const auto g = GridSpec::preset("tiny");
  auto spec = SynthSpec::for_grid(g, Scenario::mixed);
  spec.duration_s = 15.0;
  spec.n_vehicles = 6;
  const auto windows = slice_windows(synthesize(spec), g, 8, 8, 3);
  ASSERT_FALSE(windows.empty());
  const auto s = PipelineSettings::make(g, RenderOptions{}, false);
  UNetConfig cfg;
  cfg.depth_levels = 2;
  cfg.base_features = 2;
  const auto model = UNetModel<float>::build(cfg, 1);
  for (const auto& w : windows) {
    const auto f = forecast_unet(model, w, s);
    ASSERT_EQ(f.ids.size(), w.latest_input().size());
    for (std::size_t v = 0; v < f.ids.size(); ++v) EXPECT_EQ(f.ids[v], w.latest_input()[v].id);
  }
}

TEST(Predictions, CsvRoundTrip) {
  const auto g = GridSpec::desk();
  const auto windows = cv_windows(g, 3);
  const auto s = PipelineSettings::make(g, RenderOptions{}, false);
  std::vector<PredictionRow> rows;
  std::vector<WindowForecast> f;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    f.push_back(forecast_kf(windows[i], s));
    const auto r = to_rows(i, windows[i], f.back());
    rows.insert(rows.end(), r.begin(), r.end());
  }
  const auto path = std::filesystem::temp_directory_path() / "bevcast_preds.csv";
  write_predictions_csv(path, rows);
  const auto back = load_predictions_csv(path);
  ASSERT_EQ(back.size(), rows.size());
  const auto rebuilt = forecasts_from_rows(windows, back);
  const auto a = evaluate_forecasts(windows, f);
  const auto b = evaluate_forecasts(windows, rebuilt);
  EXPECT_EQ(a.mae_x, b.mae_x);
  EXPECT_EQ(a.mae_y, b.mae_y);
  std::filesystem::remove(path);
}

TEST(Training, WindowSourceMatchesEncoder) {
  const auto g = GridSpec::desk();
  const auto windows = cv_windows(g, 4);
  const auto s = PipelineSettings::make(g, RenderOptions{}, true);
  WindowSampleSource<float> src(windows, s);
  EXPECT_EQ(src.size(), windows.size());
  const auto sample = src.get(1);
  const auto enc = encode_window(windows[1], s.render, g, true);
  EXPECT_EQ(sample.input.data, to_tensor<float>(enc.input).data);
  EXPECT_EQ(sample.target.data, to_tensor<float>(enc.target).data);
}
