#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "bevcast/association.hpp"
#include "bevcast/bev_codec.hpp"
#include "bevcast/extraction.hpp"
#include "bevcast/kf_baseline.hpp"
#include "bevcast/manifest.hpp"
#include "bevcast/metrics.hpp"
#include "bevcast/trainer.hpp"
#include "bevcast/unet.hpp"

namespace bevcast {

struct PipelineSettings {
  GridSpec grid = GridSpec::desk();
  RenderOptions render;
  bool with_lanes = false;
  int input_len = 8;
  int output_len = 8;
  double dt = 0.25;
  ExtractionParams extraction;
  AssociationOptions association;

  // Extraction matched to the render settings.
  static PipelineSettings make(const GridSpec& grid, const RenderOptions& render, bool with_lanes);

  void to_manifest(RunManifest& m) const;
  static PipelineSettings from_manifest(const RunManifest& m);
};

// Runs fn(i) for i in [0, n) on `jobs` threads. Callers write results by
// index so output order does not depend on scheduling. The first exception
// thrown is rethrown after all workers finish.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

// Training pairs rendered on demand from windows.
template <typename T>
class WindowSampleSource final : public SampleSource<T> {
 public:
  WindowSampleSource(std::span<const SceneWindow> windows, PipelineSettings settings)
      : windows_(windows), settings_(std::move(settings)) {}

  std::size_t size() const override { return windows_.size(); }
  Sample<T> get(std::size_t index) const override;

 private:
  std::span<const SceneWindow> windows_;
  PipelineSettings settings_;
};

// Future positions of every vehicle in a window's latest input frame.
struct WindowForecast {
  std::vector<TrackId> ids;
  std::vector<std::vector<std::optional<Point2>>> positions;  // [vehicle][step]
  std::vector<std::vector<double>> scores;                     // NaN where missing
};

// Network output is decoded frame by frame and each frame
// is associated against the latest input positions.
WindowForecast forecast_unet(const UNetModel<float>& model, const SceneWindow& w,
                             const PipelineSettings& s, Tensor<float>* heat = nullptr);

// Constant-velocity filter over each vehicle's trailing run of consecutive
// input samples. A vehicle seen only in the latest input frame gets no
// forecast.
WindowForecast forecast_kf(const SceneWindow& w, const PipelineSettings& s,
                           const KfNoise& noise = {});

WindowForecast decode_heatmaps(const Tensor<float>& heat, const SceneWindow& w,
                               const PipelineSettings& s);

struct PredictionRow {
  std::size_t window = 0;
  double anchor_time = 0.0;
  int step = 0;  // 1-based
  TrackId id;
  Point2 position;
  double score = 0.0;
};

std::vector<PredictionRow> to_rows(std::size_t window, const SceneWindow& w,
                                   const WindowForecast& f);
// window,anchor_time,step,id,x,y,score
void write_predictions_csv(std::ostream& os, std::span<const PredictionRow> rows);
void write_predictions_csv(const std::filesystem::path& path, std::span<const PredictionRow> rows);
std::vector<PredictionRow> load_predictions_csv(const std::filesystem::path& path);

// Per-vehicle records of one window. Truth comes from the window's output
// frames; a vehicle absent from an output frame is not evaluated there.
std::vector<TrajectoryRecord> score_window(const SceneWindow& w, const WindowForecast& f);

// Rebuilds forecasts of `windows` from prediction rows.
std::vector<WindowForecast> forecasts_from_rows(std::span<const SceneWindow> windows,
                                                std::span<const PredictionRow> rows);

EvalReport evaluate_forecasts(std::span<const SceneWindow> windows,
                              std::span<const WindowForecast> forecasts);

}  // namespace bevcast
