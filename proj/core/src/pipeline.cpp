#include "bevcast/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "bevcast/dataio.hpp"

namespace bevcast {

namespace {

std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double to_double(const RunManifest& m, const std::string& key) {
  const std::string& text = m.require(key);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::runtime_error("manifest: '" + key + "' is not a number: " + text);
  }
  return v;
}

int to_int(const RunManifest& m, const std::string& key) {
  const double v = to_double(m, key);
  if (v != std::floor(v)) throw std::runtime_error("manifest: '" + key + "' is not an integer");
  return static_cast<int>(v);
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

PipelineSettings PipelineSettings::make(const GridSpec& grid, const RenderOptions& render,
                                        bool with_lanes) {
  PipelineSettings s;
  s.grid = grid;
  s.render = render;
  s.with_lanes = with_lanes;
  s.extraction = ExtractionParams::for_render(render, grid);
  return s;
}

void PipelineSettings::to_manifest(RunManifest& m) const {
  m.set("grid.ppm_x", num(grid.ppm_x()));
  m.set("grid.ppm_y", num(grid.ppm_y()));
  m.set("grid.x_range_m", num(grid.x_range_m()));
  m.set("grid.y_half_range_m", num(grid.y_half_range_m()));
  m.set("grid.height_px", std::to_string(grid.height_px()));
  m.set("grid.width_px", std::to_string(grid.width_px()));
  m.set("render.shape", to_string(render.shape));
  m.set("render.merge", to_string(render.merge));
  m.set("render.vehicle_value", num(render.vehicle_value));
  m.set("render.lane_value", num(render.lane_value));
  m.set("render.rect_w_m", num(render.rect_w_m));
  m.set("render.rect_h_m", num(render.rect_h_m));
  m.set("render.sigma_x_m", num(render.sigma_x_m));
  m.set("render.sigma_y_m", num(render.sigma_y_m));
  m.set("render.lanes", with_lanes ? "1" : "0");
  m.set("window.input", std::to_string(input_len));
  m.set("window.output", std::to_string(output_len));
  m.set("window.dt_s", num(dt));
  m.set("extract.p_min", num(extraction.p_min));
  m.set("extract.win_h", std::to_string(extraction.win_h));
  m.set("extract.win_w", std::to_string(extraction.win_w));
  m.set("extract.mode", to_string(extraction.mode));
  if (association.max_distance) m.set("assoc.max_distance_m", num(*association.max_distance));
}

PipelineSettings PipelineSettings::from_manifest(const RunManifest& m) {
  PipelineSettings s;
  s.grid = GridSpec::from_extent(to_double(m, "grid.ppm_x"), to_double(m, "grid.ppm_y"),
                                 to_double(m, "grid.x_range_m"),
                                 to_double(m, "grid.y_half_range_m"));
  s.render.shape = parse_shape(m.require("render.shape"));
  s.render.merge = parse_merge(m.require("render.merge"));
  s.render.vehicle_value = to_double(m, "render.vehicle_value");
  s.render.lane_value = to_double(m, "render.lane_value");
  s.render.rect_w_m = to_double(m, "render.rect_w_m");
  s.render.rect_h_m = to_double(m, "render.rect_h_m");
  s.render.sigma_x_m = to_double(m, "render.sigma_x_m");
  s.render.sigma_y_m = to_double(m, "render.sigma_y_m");
  s.render.validate();
  s.with_lanes = to_int(m, "render.lanes") != 0;
  s.input_len = to_int(m, "window.input");
  s.output_len = to_int(m, "window.output");
  s.dt = to_double(m, "window.dt_s");
  s.extraction.p_min = to_double(m, "extract.p_min");
  s.extraction.win_h = to_int(m, "extract.win_h");
  s.extraction.win_w = to_int(m, "extract.win_w");
  s.extraction.mode = parse_centroid_mode(m.require("extract.mode"));
  s.extraction.validate();
  if (m.contains("assoc.max_distance_m")) {
    s.association.max_distance = to_double(m, "assoc.max_distance_m");
  }
  return s;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

template <typename T>
Sample<T> WindowSampleSource<T>::get(std::size_t index) const {
  const auto enc = encode_window(windows_[index], settings_.render, settings_.grid,
                                 settings_.with_lanes);
  return {to_tensor<T>(enc.input), to_tensor<T>(enc.target)};
}

template class WindowSampleSource<float>;
template class WindowSampleSource<double>;

namespace {

std::vector<Anchor> anchors_of(const SceneWindow& w) {
  std::vector<Anchor> anchors;
  for (const auto& v : w.latest_input()) anchors.push_back({v.id, v.position()});
  return anchors;
}

WindowForecast empty_forecast(const SceneWindow& w, std::size_t steps) {
  WindowForecast f;
  for (const auto& v : w.latest_input()) {
    f.ids.push_back(v.id);
    f.positions.emplace_back(steps);
    f.scores.emplace_back(steps, kNaN);
  }
  return f;
}

}  // namespace

WindowForecast decode_heatmaps(const Tensor<float>& heat, const SceneWindow& w,
                               const PipelineSettings& s) {
  const auto steps = static_cast<std::size_t>(heat.channels);
  WindowForecast f = empty_forecast(w, steps);
  const auto anchors = anchors_of(w);
  for (std::size_t k = 0; k < steps; ++k) {
    const float* src = heat.channel(static_cast<int>(k));
    std::vector<double> px(heat.plane());
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<double>(src[i]);
    const BevImage frame(s.grid, std::move(px));
    const auto detections = extract_positions(frame, s.extraction);
    std::vector<Point2> world;
    world.reserve(detections.size());
    for (const auto& d : detections) world.push_back(pixel_to_world({d.row, d.col}, s.grid));
    const auto result = associate(world, anchors, s.association);
    for (const auto& m : result.matches) {
      const auto it = std::find(f.ids.begin(), f.ids.end(), m.id);
      const auto v = static_cast<std::size_t>(it - f.ids.begin());
      f.positions[v][k] = m.position;
      f.scores[v][k] = detections[m.extracted_index].score;
    }
  }
  return f;
}

WindowForecast forecast_unet(const UNetModel<float>& model, const SceneWindow& w,
                             const PipelineSettings& s, Tensor<float>* heat) {
  const auto enc = encode_window(w, s.render, s.grid, s.with_lanes);
  Tensor<float> out = model.forward(to_tensor<float>(enc.input));
  WindowForecast f = decode_heatmaps(out, w, s);
  if (heat) *heat = std::move(out);
  return f;
}

WindowForecast forecast_kf(const SceneWindow& w, const PipelineSettings& s, const KfNoise& noise) {
  const auto steps = static_cast<std::size_t>(s.output_len);
  WindowForecast f = empty_forecast(w, steps);
  const auto& frames = w.input_frames();
  for (std::size_t v = 0; v < f.ids.size(); ++v) {
    std::vector<VehicleState> run;
    for (auto k = frames.size(); k-- > 0;) {
      const auto it = std::find_if(frames[k].begin(), frames[k].end(),
                                   [&](const VehicleState& s2) { return s2.id == f.ids[v]; });
      if (it == frames[k].end()) break;
      run.push_back(*it);
    }
    std::reverse(run.begin(), run.end());
    // One sample carries no velocity; the vehicle is reported as missed.
    if (run.size() < 2) continue;
    const VehicleTrack track(f.ids[v], std::move(run), s.dt);
    const auto pred = predict_horizon(track, static_cast<int>(steps), noise);
    for (std::size_t k = 0; k < steps; ++k) f.positions[v][k] = pred[k];
  }
  return f;
}

std::vector<PredictionRow> to_rows(std::size_t window, const SceneWindow& w,
                                   const WindowForecast& f) {
  std::vector<PredictionRow> rows;
  const std::size_t steps = f.positions.empty() ? 0 : f.positions.front().size();
  for (std::size_t k = 0; k < steps; ++k) {
    for (std::size_t v = 0; v < f.ids.size(); ++v) {
      if (!f.positions[v][k]) continue;
      rows.push_back({window, w.anchor_time(), static_cast<int>(k + 1), f.ids[v],
                      *f.positions[v][k], f.scores[v][k]});
    }
  }
  return rows;
}

void write_predictions_csv(std::ostream& os, std::span<const PredictionRow> rows) {
  os << "window,anchor_time,step,id,x,y,score\n";
  for (const auto& r : rows) {
    os << r.window << ',' << num(r.anchor_time) << ',' << r.step << ',' << r.id.str() << ','
       << num(r.position.x) << ',' << num(r.position.y) << ','
       << (std::isnan(r.score) ? std::string() : num(r.score)) << '\n';
  }
}

void write_predictions_csv(const std::filesystem::path& path, std::span<const PredictionRow> rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot write");
  write_predictions_csv(out, rows);
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

std::vector<PredictionRow> load_predictions_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open");
  std::string line;
  std::size_t line_no = 0;
  std::vector<PredictionRow> rows;
  auto fail = [&](const std::string& msg) {
    throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != "window,anchor_time,step,id,x,y,score") fail("unexpected header");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 7) fail("expected 7 fields");
    PredictionRow r;
    try {
      std::size_t used = 0;
      r.window = std::stoull(f[0], &used);
      r.anchor_time = std::stod(f[1]);
      r.step = std::stoi(f[2]);
      r.id = TrackId(f[3]);
      r.position = {std::stod(f[4]), std::stod(f[5])};
      r.score = f[6].empty() ? kNaN : std::stod(f[6]);
    } catch (const std::exception&) {
      fail("malformed field");
    }
    if (r.step < 1) fail("step must be >= 1");
    rows.push_back(std::move(r));
  }
  if (line_no == 0) fail("missing header");
  return rows;
}

std::vector<TrajectoryRecord> score_window(const SceneWindow& w, const WindowForecast& f) {
  std::vector<TrajectoryRecord> records;
  const auto& out = w.output_frames();
  for (std::size_t v = 0; v < f.ids.size(); ++v) {
    TrajectoryRecord r;
    r.predicted = f.positions[v];
    r.predicted.resize(out.size());
    r.truth.resize(out.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
      for (const auto& veh : out[k]) {
        if (veh.id == f.ids[v]) r.truth[k] = veh.position();
      }
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<WindowForecast> forecasts_from_rows(std::span<const SceneWindow> windows,
                                                std::span<const PredictionRow> rows) {
  std::vector<WindowForecast> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(empty_forecast(w, w.output_length()));
  for (const auto& r : rows) {
    if (r.window >= windows.size()) {
      throw DataError("predictions: window " + std::to_string(r.window) + " is not in the data");
    }
    auto& f = out[r.window];
    const auto it = std::find(f.ids.begin(), f.ids.end(), r.id);
    if (it == f.ids.end()) {
      throw DataError("predictions: vehicle " + r.id.str() + " is not in window " +
                      std::to_string(r.window));
    }
    const auto k = static_cast<std::size_t>(r.step - 1);
    if (k >= windows[r.window].output_length()) throw DataError("predictions: step beyond horizon");
    const auto v = static_cast<std::size_t>(it - f.ids.begin());
    f.positions[v][k] = r.position;
    f.scores[v][k] = r.score;
  }
  return out;
}

EvalReport evaluate_forecasts(std::span<const SceneWindow> windows,
                              std::span<const WindowForecast> forecasts) {
  if (windows.size() != forecasts.size()) {
    throw std::invalid_argument("evaluate: windows and forecasts differ in count");
  }
  std::vector<TrajectoryRecord> records;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    auto r = score_window(windows[i], forecasts[i]);
    records.insert(records.end(), std::make_move_iterator(r.begin()),
                   std::make_move_iterator(r.end()));
  }
  return evaluate(records);
}

}  // namespace bevcast
