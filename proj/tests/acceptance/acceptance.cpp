// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Pass --only N[,N...] to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bevcast/pipeline.hpp"
#include "bevcast/synth.hpp"
#include "oracles.hpp"

using namespace bevcast;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

// 1. Render and extract a Gaussian vehicle at random sub-pixel positions on the
// desk grid. Positions are drawn where the centroid window lies inside the
// grid.
Outcome codec_round_trip() {
  const auto g = GridSpec::desk();
  const auto opts = RenderOptions::for_shape(VehicleShape::gaussian);
  const auto params = ExtractionParams::for_render(opts, g);
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<int> ur(params.win_h, g.height_px() - 1 - params.win_h);
  std::uniform_int_distribution<int> uc(params.win_w, g.width_px() - 1 - params.win_w);
  std::uniform_real_distribution<double> frac(-0.5, 0.5);
  double worst_x = 0.0, worst_y = 0.0;
  int missing = 0;
  for (int i = 0; i < 500; ++i) {
    const PixelCoord px{ur(gen) + frac(gen), uc(gen) + frac(gen)};
    const Point2 truth = pixel_to_world(px, g);
    const auto img = render_vehicle_gaussian({TrackId("v"), truth.x, truth.y, 0.0}, opts, g);
    const auto dets = extract_positions(img, params);
    if (dets.size() != 1) {
      ++missing;
      continue;
    }
    const Point2 got = pixel_to_world({dets[0].row, dets[0].col}, g);
    worst_x = std::max(worst_x, std::abs(got.x - truth.x));
    worst_y = std::max(worst_y, std::abs(got.y - truth.y));
  }
  const double lim_x = 0.1 / g.ppm_x(), lim_y = 0.1 / g.ppm_y();
  return {missing == 0 && worst_x < lim_x && worst_y < lim_y,
          "worst error " + fmt("%.4f", worst_x) + " / " + fmt("%.4f", worst_y) + " m, limit " +
              fmt("%.2f", lim_x) + " / " + fmt("%.2f", lim_y) + " m, " + std::to_string(missing) +
              " missed of 500"};
}

// 2. Reference vehicle at (6.63, 3.21) m on a 1 px/m grid.
Outcome reference_vehicle() {
  const auto g = GridSpec::from_extent(1.0, 1.0, 16.0, 8.0);
  const auto opts = RenderOptions::for_shape(VehicleShape::gaussian);
  // Lateral offset measured from the grid's left edge.
  const double x = 6.63, y = 3.21;
  const auto img = render_vehicle_gaussian({TrackId("v"), x, y - g.y_half_range_m(), 0.0}, opts, g);
  const auto pixels = img.pixels();
  const auto best = std::max_element(pixels.begin(), pixels.end()) - pixels.begin();
  const int row = static_cast<int>(best / g.width_px());
  const int col = static_cast<int>(best % g.width_px());
  const double disc_x = std::abs(row - x), disc_y = std::abs(col - y);
  const auto dets = extract_positions(img, ExtractionParams::for_render(opts, g));
  const bool one = dets.size() == 1;
  const double sub_x = one ? std::abs(dets[0].row - x) : INFINITY;
  const double sub_y = one ? std::abs(dets[0].col - y) : INFINITY;
  const bool pass = row == 7 && col == 3 && std::abs(disc_x - 0.37) < 1e-12 &&
                    std::abs(disc_y - 0.21) < 1e-12 && sub_x <= 0.05 && sub_y <= 0.05;
  return {pass, "discrete max (" + std::to_string(row) + "," + std::to_string(col) + "), errors " +
                    fmt("%.2f", disc_x) + " / " + fmt("%.2f", disc_y) + " m; sub-pixel " +
                    fmt("%.4f", sub_x) + " / " + fmt("%.4f", sub_y) + " m"};
}

// 3. Reported radius, minimum input gate, and exact locality of the empirical
// receptive field at depth 4.
Outcome receptive_field() {
  const bool radius = receptive_radius(4) == 76 && receptive_radius(5) == 156;
  bool gate = true;
  for (int n = 2; n <= 6; ++n) {
    UNetConfig cfg;
    cfg.depth_levels = n;
    const int s = 1 << n;
    try {
      cfg.check_input_size(s - 1, s - 1);
      gate = false;
    } catch (const std::invalid_argument&) {
    }
    try {
      cfg.check_input_size(s, s);
    } catch (const std::invalid_argument&) {
      gate = false;
    }
  }

  UNetConfig cfg;
  cfg.depth_levels = 4;
  cfg.base_features = 2;
  cfg.in_channels = 1;
  cfg.out_channels = 1;
  const auto model = UNetModel<double>::build(cfg, 41);
  const int rows = 192, cols = 192, r = 96, c = 96;
  const auto box = empirical_receptive_field(model, rows, cols, r, c);
  const auto structural = structural_receptive_box(cfg, rows, cols, r, c);

  // Impulses off the probed row and column: the ring just outside the box
  // and random pixels elsewhere, all on the probe's zero background.
  Tensor<double> zero(1, rows, cols);
  const double base = model.forward(zero).at(0, r, c);
  std::vector<std::pair<int, int>> outside;
  for (int pr = box.row_min - 1; pr <= box.row_max + 1; ++pr) {
    outside.emplace_back(pr, box.col_min - 1);
    outside.emplace_back(pr, box.col_max + 1);
  }
  for (int pc = box.col_min; pc <= box.col_max; ++pc) {
    outside.emplace_back(box.row_min - 1, pc);
    outside.emplace_back(box.row_max + 1, pc);
  }
  std::mt19937_64 gen(43);
  std::uniform_int_distribution<int> ui(0, rows - 1);
  while (outside.size() < 900) {
    const int pr = ui(gen), pc = ui(gen);
    if (!box.contains(pr, pc)) outside.emplace_back(pr, pc);
  }
  std::size_t leaks = 0, tested = 0;
  for (const auto& [pr, pc] : outside) {
    if (pr < 0 || pr >= rows || pc < 0 || pc >= cols) continue;
    for (const double amp : {1.0, -1.0}) {
      zero.at(0, pr, pc) = amp;
      leaks += model.forward(zero).at(0, r, c) != base;
      zero.at(0, pr, pc) = 0.0;
    }
    ++tested;
  }
  const bool inside = structural.contains(box.row_min, box.col_min) &&
                      structural.contains(box.row_max, box.col_max);
  const int half = std::max(r - box.row_min, box.row_max - r);
  return {radius && gate && leaks == 0 && inside,
          std::string("radius(4)=") + std::to_string(receptive_radius(4)) + ", radius(5)=" +
              std::to_string(receptive_radius(5)) + ", gate " + (gate ? "ok" : "wrong") +
              "; empirical half-extent " + std::to_string(half) + " px, structural " +
              std::to_string(r - structural.row_min) + " px; " + std::to_string(leaks) +
              " nonzero responses from " + std::to_string(tested) + " outside pixels"};
}

// 4. Central differences against back-propagation in 64-bit arithmetic.
Outcome gradient_check() {
  double worst = 0.0;
  for (const Terminal term : {Terminal::linear, Terminal::tanh, Terminal::clipped_relu}) {
    UNetConfig cfg;
    cfg.depth_levels = 2;
    cfg.base_features = 2;
    cfg.in_channels = 2;
    cfg.out_channels = 2;
    cfg.terminal = term;
    auto model = UNetModel<double>::build(cfg, 61);
    // Nonzero biases keep pre-activations off the ReLU kink at exactly zero.
    std::mt19937_64 gen(62);
    std::uniform_real_distribution<double> ub(-0.1, 0.1), u01(0.0, 1.0);
    auto p = model.parameters();
    const auto mask = model.weight_mask();
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!mask[i]) p[i] = ub(gen);
    }
    Tensor<double> x(2, 16, 16), target(2, 16, 16);
    for (auto& v : x.data) v = u01(gen);
    for (auto& v : target.data) v = u01(gen);
    const double n = static_cast<double>(target.size());
    auto loss = [&] {
      const auto y = model.forward(x);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += (y.data[i] - target.data[i]) * (y.data[i] - target.data[i]);
      return 0.5 * s / n;
    };
    std::vector<double> grad(model.parameter_count(), 0.0);
    model.forward_backward(
        x,
        [&](const Tensor<double>& y) {
          Tensor<double> d = y;
          for (std::size_t i = 0; i < d.size(); ++i) d.data[i] = (y.data[i] - target.data[i]) / n;
          return d;
        },
        grad);
    const double h = 1e-5;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double keep = p[i];
      p[i] = keep + h;
      const double up = loss();
      p[i] = keep - h;
      const double down = loss();
      p[i] = keep;
      const double fd = (up - down) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-6}));
    }
  }
  return {worst < 1e-4, "max relative error " + fmt("%.2e", worst) +
                            " over all parameters and three terminals, limit 1e-4"};
}

std::vector<SceneWindow> synth_windows(Scenario scenario, std::uint64_t first_seed, std::size_t want,
                                       int stride, const GridSpec& g) {
  std::vector<SceneWindow> out;
  for (std::uint64_t seed = first_seed; out.size() < want; ++seed) {
    auto spec = SynthSpec::for_grid(g, scenario);
    spec.seed = seed;
    auto windows = slice_windows(synthesize(spec), g, 8, 8, stride);
    for (auto& w : windows) {
      if (out.size() < want) out.push_back(std::move(w));
    }
  }
  return out;
}

PipelineSettings tiny_settings() {
  return PipelineSettings::make(GridSpec::preset("tiny"), RenderOptions::for_shape(VehicleShape::gaussian),
                                false);
}

// 5. Training defaults on one window of the tiny grid.
Outcome overfit_one_sample() {
  const auto s = tiny_settings();
  const auto windows = synth_windows(Scenario::mixed, 0, 1, 1, s.grid);
  const WindowSampleSource<float> src(windows, s);
  const Sample<float> batch[] = {src.get(0)};
  auto model = UNetModel<float>::build(UNetConfig{}, 0);
  const TrainConfig cfg;
  AdamState<float> state(model.parameter_count());
  double first = 0.0, last = 0.0;
  for (int i = 0; i <= 200; ++i) {
    const double loss = train_step<float>(model, batch, cfg, state).loss;
    if (i == 0) first = loss;
    last = loss;
  }
  const double reduction = 1.0 - last / first;
  return {reduction >= 0.9, "loss " + fmt("%.4f", first) + " -> " + fmt("%.4f", last) +
                                " after 200 steps, reduction " + fmt("%.1f", 100.0 * reduction) +
                                "%, need 90%"};
}

// 6. Network vs constant-velocity filter on held-out lane changes, plus the
// filter's floor on constant-velocity traffic.
Outcome desk_scale_learning() {
  const auto s = tiny_settings();
  const auto train = synth_windows(Scenario::mixed, 100, 2000, 1, s.grid);
  const auto test = synth_windows(Scenario::lane_change, 900, 300, 4, s.grid);
  const WindowSampleSource<float> src(train, s);
  auto model = UNetModel<float>::build(UNetConfig{}, 0);
  TrainConfig cfg;
  cfg.epochs = 8;
  fit<float>(model, src, cfg);

  std::vector<WindowForecast> net(test.size()), kf(test.size());
  parallel_for(test.size(), 1, [&](std::size_t i) {
    net[i] = forecast_unet(model, test[i], s);
    kf[i] = forecast_kf(test[i], s);
  });
  // Score the filter on the pairs the network predicted.
  auto kf_common = kf;
  for (std::size_t i = 0; i < test.size(); ++i) {
    for (std::size_t v = 0; v < net[i].ids.size(); ++v) {
      for (std::size_t k = 0; k < net[i].positions[v].size(); ++k) {
        if (!net[i].positions[v][k]) kf_common[i].positions[v][k].reset();
      }
    }
  }
  const auto rn = evaluate_forecasts(test, net);
  const auto rk = evaluate_forecasts(test, kf_common);
  const auto rk_all = evaluate_forecasts(test, kf);

  const auto cv = synth_windows(Scenario::constant_velocity, 500, 200, 4, s.grid);
  std::vector<WindowForecast> fcv;
  for (const auto& w : cv) fcv.push_back(forecast_kf(w, s));
  const auto rcv = evaluate_forecasts(cv, fcv);
  const bool floor_ok = rcv.ade_x <= 1e-3 && rcv.ade_y <= 1e-3;

  std::size_t pairs = 0;
  for (auto c : rn.count) pairs += c;
  return {rn.ade_y < rk.ade_y && floor_ok,
          "lateral ADE network " + fmt("%.3f", rn.ade_y) + " m vs filter " + fmt("%.3f", rk.ade_y) +
              " m on " + std::to_string(pairs) + " shared pairs (filter on all its pairs " +
              fmt("%.3f", rk_all.ade_y) +
              " m, network missed " + std::to_string(rn.n_missed) + "); longitudinal " +
              fmt("%.3f", rn.ade_x) + " vs " + fmt("%.3f", rk.ade_x) + " m; constant-velocity floor " +
              fmt("%.1e", std::max(rcv.ade_x, rcv.ade_y)) + " m (" + std::to_string(rcv.n_missed) +
              " pairs without a velocity estimate)"};
}

// 7. Assignment against exhaustive search. Costs are multiples of 1/1024 so
// every sum is exact and equality is well defined.
Outcome hungarian_optimality() {
  std::mt19937_64 gen(70);
  std::uniform_int_distribution<int> size(1, 6), cost(0, 100 * 1024);
  int wrong = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t rows = static_cast<std::size_t>(size(gen));
    const std::size_t cols = static_cast<std::size_t>(size(gen));
    CostMatrix c(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = 0; k < cols; ++k) c(r, k) = cost(gen) / 1024.0;
    }
    const auto assign = solve_assignment(c);
    double total = 0.0;
    std::size_t used = 0;
    std::set<std::size_t> taken;
    for (std::size_t r = 0; r < rows; ++r) {
      if (!assign[r]) continue;
      total += c(r, *assign[r]);
      taken.insert(*assign[r]);
      ++used;
    }
    const bool valid = used == std::min(rows, cols) && taken.size() == used;
    if (!valid || total != oracle::brute_force_min_cost(c)) ++wrong;
  }
  return {wrong == 0, std::to_string(1000 - wrong) + " of 1000 instances optimal"};
}

// 8. Metrics against direct recomputation.
Outcome metrics_algebra() {
  std::mt19937_64 gen(80);
  std::normal_distribution<double> err(0.0, 1.5);
  std::uniform_int_distribution<int> un(1, 40), um(1, 12);
  double worst = 0.0;
  bool order = true, fde = true;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = static_cast<std::size_t>(un(gen));
    const std::size_t m = static_cast<std::size_t>(um(gen));
    std::vector<std::vector<Point2>> pred(n, std::vector<Point2>(m)), truth = pred;
    std::vector<std::vector<double>> px(n, std::vector<double>(m)), tx = px, py = px, ty = px;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < m; ++k) {
        truth[i][k] = {err(gen) * 10.0, err(gen)};
        pred[i][k] = {truth[i][k].x + err(gen), truth[i][k].y + err(gen) * 0.3};
        px[i][k] = pred[i][k].x;
        tx[i][k] = truth[i][k].x;
        py[i][k] = pred[i][k].y;
        ty[i][k] = truth[i][k].y;
      }
    }
    const auto ox = oracle::direct_errors(px, tx);
    const auto oy = oracle::direct_errors(py, ty);
    const auto rmse = rmse_per_step(pred, truth);
    const auto mae = mae_per_step(pred, truth);
    std::vector<TrajectoryRecord> recs(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < m; ++k) {
        recs[i].predicted.emplace_back(pred[i][k]);
        recs[i].truth.emplace_back(truth[i][k]);
      }
    }
    const auto rep = evaluate(recs);
    long double ade_x = 0.0L, ade_y = 0.0L;
    for (std::size_t k = 0; k < m; ++k) {
      ade_x += ox.mae[k];
      ade_y += oy.mae[k];
      worst = std::max({worst, std::abs(rmse.x[k] - ox.rmse[k]), std::abs(rmse.y[k] - oy.rmse[k]),
                        std::abs(mae.x[k] - ox.mae[k]), std::abs(mae.y[k] - oy.mae[k]),
                        std::abs(rep.rmse_x[k] - ox.rmse[k]), std::abs(rep.mae_y[k] - oy.mae[k])});
      order = order && rmse.x[k] >= mae.x[k] && rmse.y[k] >= mae.y[k];
    }
    worst = std::max({worst, std::abs(rep.ade_x - static_cast<double>(ade_x / m)),
                      std::abs(rep.ade_y - static_cast<double>(ade_y / m))});
    fde = fde && rep.fde_x == rep.mae_x.back() && rep.fde_y == rep.mae_y.back();
  }
  return {worst < 1e-12 && order && fde,
          "max deviation " + fmt("%.1e", worst) + " over 200 random sets, limit 1e-12; RMSE >= MAE " +
              (order ? "holds" : "violated") + "; FDE " + (fde ? "equals" : "differs from") +
              " last-step MAE"};
}

struct RunArtifacts {
  std::string loss_csv;
  std::string predictions_csv;
};

RunArtifacts pipeline_run(std::uint64_t seed, int jobs) {
  const auto s = tiny_settings();
  auto spec = SynthSpec::for_grid(s.grid, Scenario::mixed);
  spec.seed = seed;
  spec.duration_s = 40.0;
  const auto table = synthesize(spec);
  const auto windows = slice_windows(table, s.grid, s.input_len, s.output_len, 1);
  const std::size_t n_train = windows.size() * 3 / 4;
  const std::span<const SceneWindow> train(windows.data(), n_train);
  const std::span<const SceneWindow> test(windows.data() + n_train, windows.size() - n_train);
  auto model = UNetModel<float>::build(UNetConfig{}, seed);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.seed = seed;
  const auto fitted = fit<float>(model, WindowSampleSource<float>(train, s), cfg);
  std::ostringstream loss;
  write_loss_csv(loss, fitted.curve);
  std::vector<WindowForecast> f(test.size());
  parallel_for(test.size(), jobs, [&](std::size_t i) { f[i] = forecast_unet(model, test[i], s); });
  std::vector<PredictionRow> rows;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto r = to_rows(i, test[i], f[i]);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  std::ostringstream pred;
  write_predictions_csv(pred, rows);
  return {loss.str(), pred.str()};
}

// 9. Two runs with one seed; the second forecasts on three threads.
Outcome determinism() {
  const auto a = pipeline_run(11, 1);
  const auto b = pipeline_run(11, 3);
  const auto c = pipeline_run(12, 1);
  const bool same = a.loss_csv == b.loss_csv && a.predictions_csv == b.predictions_csv;
  const bool differs = a.loss_csv != c.loss_csv;
  const auto lines = std::count(a.predictions_csv.begin(), a.predictions_csv.end(), '\n');
  return {same && differs && lines > 1,
          std::string("loss and prediction CSV ") + (same ? "byte-identical" : "differ") + " across runs (" +
              std::to_string(a.loss_csv.size()) + " + " + std::to_string(a.predictions_csv.size()) +
              " bytes); another seed " + (differs ? "changes" : "does not change") + " the loss curve"};
}

// Raw positions of a table frame that fall inside the grid.
std::map<TrackId, Point2> raw_frame(const TrajectoryTable& t, std::int64_t frame, const GridSpec& g) {
  std::map<TrackId, Point2> out;
  for (const auto& r : t.rows) {
    if (r.frame == frame && g.contains({r.x_m, r.y_m})) out[r.id] = {r.x_m, r.y_m};
  }
  return out;
}

TrajectoryTable edge_case_table() {
  // 20 frames at 4 Hz on the 32 m tiny grid.
  TrajectoryTable t;
  auto add = [&](const char* id, int from, int to, double x0, double vx, double y) {
    for (int f = from; f <= to; ++f) t.rows.push_back({f, TrackId(id), x0 + vx * f * 0.25, y, std::nullopt});
  };
  add("stays", 0, 19, 10.0, 1.0, 0.0);
  add("leaves_ahead", 0, 19, 24.0, 4.0, 3.5);    // crosses x = 32 at frame 8
  add("leaves_behind", 0, 19, 3.0, -2.0, -3.5);  // crosses x = 0 at frame 6
  add("enters", 0, 19, 40.0, -4.0, 7.0);         // crosses into the grid at frame 8
  add("gap", 0, 4, 16.0, 0.0, -7.0);             // input only, gone before the latest input
  add("gap", 12, 19, 16.0, 0.0, -7.0);           // and back inside the horizon
  add("late", 7, 19, 20.0, 0.0, 5.0);            // first seen in a latest input frame
  std::sort(t.rows.begin(), t.rows.end(), [](const TrajectoryRow& a, const TrajectoryRow& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.id < b.id;
  });
  return t;
}

// 10. Coexistence: targets and predictions only for vehicles of the latest
// input frame, each scored where it is still present.
Outcome coexistence() {
  const auto s = tiny_settings();
  std::vector<TrajectoryTable> tables{edge_case_table()};
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    auto spec = SynthSpec::for_grid(s.grid, Scenario::mixed);
    spec.seed = 300 + seed;
    spec.duration_s = 20.0;
    spec.n_vehicles = 8;
    spec.speed_min_mps = -8.0;
    spec.speed_max_mps = 8.0;
    tables.push_back(synthesize(spec));
  }
  UNetConfig small;
  small.depth_levels = 2;
  small.base_features = 2;
  const auto model = UNetModel<float>::build(small, 5);

  std::size_t both = 0, leaving = 0, entering = 0, violations = 0, windows_seen = 0;
  for (const auto& table : tables) {
    const auto windows = slice_windows(table, s.grid, s.input_len, s.output_len, 1);
    for (const auto& w : windows) {
      ++windows_seen;
      const auto last = static_cast<std::int64_t>(std::llround(w.anchor_time() * table.frame_rate_hz));
      const auto latest = raw_frame(table, last, s.grid);
      std::set<TrackId> latest_ids;
      for (const auto& [id, p] : latest) latest_ids.insert(id);

      // Targets: exactly the latest-input vehicles still inside the grid.
      const auto enc = encode_window(w, s.render, s.grid, false);
      for (int k = 0; k < s.output_len; ++k) {
        const auto raw = raw_frame(table, last + 1 + k, s.grid);
        Frame expect;
        for (const auto& [id, p] : raw) {
          if (latest_ids.count(id)) {
            expect.push_back({id, p.x, p.y, 0.0});
          } else {
            ++entering;
          }
        }
        const auto ref = render_frame(expect, s.render, s.grid);
        const auto got = enc.target[static_cast<std::size_t>(k)].pixels();
        violations += !std::equal(got.begin(), got.end(), ref.pixels().begin());
        std::set<TrackId> out_ids;
        for (const auto& v : w.output_frames()[static_cast<std::size_t>(k)]) out_ids.insert(v.id);
        std::set<TrackId> expect_ids;
        for (const auto& v : expect) expect_ids.insert(v.id);
        violations += out_ids != expect_ids;
      }
      // Predictions: one track per latest-input vehicle, for both predictors.
      for (const auto& f : {forecast_kf(w, s), forecast_unet(model, w, s)}) {
        violations += std::set<TrackId>(f.ids.begin(), f.ids.end()) != latest_ids ||
                      f.ids.size() != latest_ids.size();
        for (const auto& row : to_rows(0, w, f)) violations += !latest_ids.count(row.id);
      }
      // Scoring: a vehicle counts at step k only while it is still present.
      const auto recs = score_window(w, forecast_kf(w, s));
      for (const auto& r : recs) {
        int present = 0;
        for (const auto& t : r.truth) present += t.has_value();
        if (present == s.output_len) {
          ++both;
        } else {
          ++leaving;
        }
      }
    }
  }
  return {violations == 0 && both > 0 && leaving > 0 && entering > 0,
          std::to_string(violations) + " violations over " + std::to_string(windows_seen) +
              " windows; " + std::to_string(both) + " tracks present throughout, " +
              std::to_string(leaving) + " leaving mid-horizon, " + std::to_string(entering) +
              " entering vehicle-frames excluded"};
}

struct Criterion {
  int number;
  const char* name;
  Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--only") {
      std::stringstream list(argv[i + 1]);
      for (std::string item; std::getline(list, item, ',');) only.insert(std::stoi(item));
    }
  }
  const Criterion criteria[] = {
      {1, "codec round trip", codec_round_trip},
      {2, "reference vehicle extraction", reference_vehicle},
      {3, "receptive field", receptive_field},
      {4, "gradient check", gradient_check},
      {5, "overfit one sample", overfit_one_sample},
      {6, "learning beats the filter on lane changes", desk_scale_learning},
      {7, "assignment optimality", hungarian_optimality},
      {8, "metrics algebra", metrics_algebra},
      {9, "determinism", determinism},
      {10, "coexistence", coexistence},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.number)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !out.pass;
    std::printf("%s %2d %s: %s [%.1f s]\n", out.pass ? "PASS" : "FAIL", c.number, c.name,
                out.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
