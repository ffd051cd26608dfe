#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bevcast/checkpoint.hpp"
#include "bevcast/pipeline.hpp"
#include "bevcast/synth.hpp"
#include "cli_support.hpp"

namespace fs = std::filesystem;
using namespace bevcast;
using bevcast::cli::UsageError;

namespace {

struct SceneFlags {
  std::string grid = "desk";
  std::string shape = "gaussian";
  bool lanes = false;
  int input_len = 8;
  int output_len = 8;
};

struct ModelFlags {
  int depth = 4;
  int features = 8;
  std::string terminal = "linear";
  double clip_hi = 1.0;
};

struct DataFlags {
  std::vector<std::string> files;
  int stride = 1;
  int keep_every = 1;
};

void add_scene_flags(CLI::App* app, SceneFlags& f) {
  app->add_option("--grid", f.grid, "Grid preset")
      ->check(CLI::IsMember({"desk", "full", "tiny"}))
      ->capture_default_str();
  app->add_option("--shape", f.shape, "Vehicle shape")
      ->check(CLI::IsMember({"gaussian", "rect"}))
      ->capture_default_str();
  app->add_flag("--lanes", f.lanes, "Draw lane boundaries into input frames");
  app->add_option("--input-frames", f.input_len, "Past frames per window")
      ->check(CLI::Range(1, 64))
      ->capture_default_str();
  app->add_option("--output-frames", f.output_len, "Future frames per window")
      ->check(CLI::Range(1, 64))
      ->capture_default_str();
}

void add_model_flags(CLI::App* app, ModelFlags& f) {
  app->add_option("--depth", f.depth, "Encoder/decoder levels")
      ->check(CLI::Range(2, 8))
      ->capture_default_str();
  app->add_option("--features", f.features, "Channels after pre-processing")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--terminal", f.terminal, "Terminal layer")
      ->check(CLI::IsMember({"linear", "tanh", "clippedrelu"}))
      ->capture_default_str();
  app->add_option("--clip-hi", f.clip_hi, "Upper bound of the clippedrelu terminal")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

void add_data_flags(CLI::App* app, DataFlags& f) {
  app->add_option("--data", f.files, "Trajectory CSV files")->required()->check(CLI::ExistingFile);
  app->add_option("--stride", f.stride, "Samples between window starts")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--keep-every", f.keep_every, "Keep every n-th sample before slicing")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

PipelineSettings settings_from(const SceneFlags& f) {
  auto s = PipelineSettings::make(GridSpec::preset(f.grid),
                                  RenderOptions::for_shape(parse_shape(f.shape)), f.lanes);
  s.input_len = f.input_len;
  s.output_len = f.output_len;
  return s;
}

UNetConfig model_from(const CLI::App& app, const ModelFlags& f, const PipelineSettings& s) {
  UNetConfig c;
  c.depth_levels = f.depth;
  c.base_features = f.features;
  c.in_channels = s.input_len;
  c.out_channels = s.output_len;
  c.terminal = parse_terminal(f.terminal);
  c.clip_hi = f.clip_hi;
  if (app.count("--clip-hi") > 0 && c.terminal != Terminal::clipped_relu) {
    throw UsageError("--clip-hi applies only to --terminal clippedrelu, not " + f.terminal);
  }
  c.validate();
  if (!s.grid.divisible_by(c.depth_levels)) {
    throw UsageError("grid " + std::to_string(s.grid.height_px()) + "x" +
                     std::to_string(s.grid.width_px()) + " is not divisible by 2^" +
                     std::to_string(c.depth_levels) + " (--depth)");
  }
  return c;
}

void model_to_manifest(const UNetConfig& c, RunManifest& m) {
  m.set("model.depth_levels", std::to_string(c.depth_levels));
  m.set("model.base_features", std::to_string(c.base_features));
  m.set("model.in_channels", std::to_string(c.in_channels));
  m.set("model.out_channels", std::to_string(c.out_channels));
  m.set("model.terminal", to_string(c.terminal));
  m.set("model.clip_hi", cli::format_number(c.clip_hi));
}

void data_to_manifest(const DataFlags& d, std::size_t windows, RunManifest& m) {
  std::string joined;
  for (const auto& f : d.files) joined += (joined.empty() ? "" : ";") + f;
  m.set("data.files", joined);
  m.set("data.stride", std::to_string(d.stride));
  m.set("data.keep_every", std::to_string(d.keep_every));
  m.set("data.windows", std::to_string(windows));
}

void write_run_manifest(const fs::path& path, const std::string& command, const CLI::App& app,
                        RunManifest m) {
  m.set("command", command);
  cli::echo_options(app, m);
  m.save(path);
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void check_interval(double data_dt, const PipelineSettings& s) {
  if (std::abs(data_dt - s.dt) > 1e-9) {
    throw UsageError("data sample interval " + cli::format_number(data_dt) +
                     " s differs from the checkpoint's " + cli::format_number(s.dt) + " s");
  }
}

// Flags given alongside a checkpoint must agree with what it was trained on.
void check_flags_match(const CLI::App& app, const SceneFlags& sf, const ModelFlags& mf,
                       const PipelineSettings& s, const UNetConfig& c) {
  auto mismatch = [](const std::string& flag, const std::string& given, const std::string& stored) {
    return UsageError(flag + " " + given + " does not match the checkpoint (" + stored + ")");
  };
  if (app.count("--grid") && !(GridSpec::preset(sf.grid) == s.grid)) {
    throw mismatch("--grid", sf.grid,
                   std::to_string(s.grid.height_px()) + "x" + std::to_string(s.grid.width_px()));
  }
  if (app.count("--shape") && parse_shape(sf.shape) != s.render.shape) {
    throw mismatch("--shape", sf.shape, to_string(s.render.shape));
  }
  if (app.count("--lanes") && sf.lanes != s.with_lanes) {
    throw mismatch("--lanes", sf.lanes ? "on" : "off", s.with_lanes ? "on" : "off");
  }
  if (app.count("--input-frames") && sf.input_len != s.input_len) {
    throw mismatch("--input-frames", std::to_string(sf.input_len), std::to_string(s.input_len));
  }
  if (app.count("--output-frames") && sf.output_len != s.output_len) {
    throw mismatch("--output-frames", std::to_string(sf.output_len), std::to_string(s.output_len));
  }
  if (app.count("--depth") && mf.depth != c.depth_levels) {
    throw mismatch("--depth", std::to_string(mf.depth), std::to_string(c.depth_levels));
  }
  if (app.count("--features") && mf.features != c.base_features) {
    throw mismatch("--features", std::to_string(mf.features), std::to_string(c.base_features));
  }
  if (app.count("--terminal") && parse_terminal(mf.terminal) != c.terminal) {
    throw mismatch("--terminal", mf.terminal, to_string(c.terminal));
  }
  if (app.count("--clip-hi") && mf.clip_hi != c.clip_hi) {
    throw mismatch("--clip-hi", cli::format_number(mf.clip_hi), cli::format_number(c.clip_hi));
  }
}

struct LoadedModel {
  RunManifest manifest;
  PipelineSettings settings;
  UNetModel<float> model;
};

// Reads the checkpoint and its manifest and cross-checks the two.
LoadedModel load_model(const fs::path& ckpt) {
  const auto manifest_path = cli::sibling(ckpt, ".manifest");
  if (!fs::exists(manifest_path)) {
    throw UsageError(ckpt.string() + ": manifest " + manifest_path.string() + " not found");
  }
  auto manifest = RunManifest::load(manifest_path);
  auto settings = PipelineSettings::from_manifest(manifest);
  auto model = load_checkpoint(ckpt);
  RunManifest expect;
  model_to_manifest(model.config(), expect);
  for (const auto& [key, value] : expect.entries()) {
    if (manifest.require(key) != value) {
      throw UsageError(ckpt.string() + ": " + key + " is " + value + " but the manifest says " +
                       manifest.require(key));
    }
  }
  if (model.config().in_channels != settings.input_len ||
      model.config().out_channels != settings.output_len) {
    throw UsageError(ckpt.string() + ": channel counts disagree with the window lengths");
  }
  return {std::move(manifest), std::move(settings), std::move(model)};
}

void write_image(const fs::path& path, const GrayImage& img) {
  if (path.extension() == ".pgm") {
    write_pgm(path, img);
  } else {
    write_png(path, img);
  }
}

std::string window_name(std::size_t i, const std::string& ext) {
  std::ostringstream os;
  os << "window_";
  os.width(5);
  os.fill('0');
  os << i << ext;
  return os.str();
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string scenario = "mixed";
  int vehicles = 4;
  double duration = 60.0;
  double rate = 4.0;
  double noise = 0.0;
  std::string grid = "desk";
  std::uint64_t seed = 0;
  std::string out;
};

void run_synth(const CLI::App& app, const SynthArgs& a) {
  auto spec = SynthSpec::for_grid(GridSpec::preset(a.grid), parse_scenario(a.scenario));
  spec.n_vehicles = a.vehicles;
  spec.duration_s = a.duration;
  spec.frame_rate_hz = a.rate;
  spec.noise_std_m = a.noise;
  spec.seed = a.seed;
  spec.validate();

  const fs::path out(a.out);
  ensure_parent(out);
  const auto table = synthesize(spec);
  write_csv(out, table);
  RunManifest m;
  m.set("synth.rows", std::to_string(table.rows.size()));
  write_run_manifest(cli::sibling(out, ".manifest"), "synth", app, m);
  std::cout << "wrote " << table.rows.size() << " samples to " << out.string() << "\n";
}

// ---------------------------------------------------------------- encode

struct EncodeArgs {
  SceneFlags scene;
  DataFlags data;
  std::string out;
  bool png = false;
  int png_limit = 8;
  int jobs = 1;
};

void run_encode(const CLI::App& app, const EncodeArgs& a) {
  auto s = settings_from(a.scene);
  const auto data = cli::load_windows(a.data.files, a.data.keep_every, s.grid, s.input_len,
                                      s.output_len, a.data.stride);
  s.dt = data.dt;
  const fs::path dir(a.out);
  fs::create_directories(dir);
  parallel_for(data.windows.size(), a.jobs, [&](std::size_t i) {
    const auto& w = data.windows[i];
    const auto enc = encode_window(w, s.render, s.grid, s.with_lanes);
    cli::write_block_file(dir / window_name(i, ".bevb"), enc, w.anchor_time());
    if (a.png && i < static_cast<std::size_t>(a.png_limit)) {
      write_png(dir / window_name(i, ".png"), cli::contact_sheet(enc.input, enc.target));
    }
  });
  RunManifest m;
  s.to_manifest(m);
  data_to_manifest(a.data, data.windows.size(), m);
  write_run_manifest(dir / "run.manifest", "encode", app, m);
  std::cout << "encoded " << data.windows.size() << " windows into " << dir.string() << "\n";
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  SceneFlags scene;
  ModelFlags model;
  DataFlags data;
  std::string checkpoint;
  std::string loss_csv;
  int epochs = 4;
  double lr = 1e-3;
  double l2 = 1e-4;
  int batch = 1;
  double clip = 1.0;
  std::string clip_mode = "global_norm";
  std::uint64_t seed = 0;
  bool quiet = false;
};

void run_train(const CLI::App& app, const TrainArgs& a) {
  auto s = settings_from(a.scene);
  const auto config = model_from(app, a.model, s);
  TrainConfig tc;
  tc.epochs = a.epochs;
  tc.lr = a.lr;
  tc.l2 = a.l2;
  tc.batch_size = a.batch;
  tc.grad_clip = a.clip;
  tc.clip_mode = parse_clip_mode(a.clip_mode);
  tc.seed = a.seed;
  tc.validate();

  const auto data = cli::load_windows(a.data.files, a.data.keep_every, s.grid, s.input_len,
                                      s.output_len, a.data.stride);
  s.dt = data.dt;
  auto model = UNetModel<float>::build(config, a.seed);
  WindowSampleSource<float> source(data.windows, s);

  int epoch = 0;
  double sum = 0.0;
  std::int64_t n = 0;
  auto report = [&]() {
    if (!a.quiet && n > 0) {
      std::cerr << "epoch " << epoch + 1 << "/" << tc.epochs << " mean loss " << sum / double(n)
                << "\n";
    }
  };
  const auto result = fit(model, source, tc, [&](const LossRecord& r) {
    if (r.epoch != epoch) {
      report();
      epoch = r.epoch;
      sum = 0.0;
      n = 0;
    }
    sum += r.loss;
    ++n;
  });
  report();

  const fs::path ckpt(a.checkpoint);
  ensure_parent(ckpt);
  save_checkpoint(ckpt, model);
  const fs::path loss = a.loss_csv.empty() ? cli::sibling(ckpt, ".loss.csv") : fs::path(a.loss_csv);
  ensure_parent(loss);
  write_loss_csv(loss, result.curve);

  RunManifest m;
  s.to_manifest(m);
  model_to_manifest(config, m);
  m.set("train.epochs", std::to_string(tc.epochs));
  m.set("train.lr", cli::format_number(tc.lr));
  m.set("train.l2", cli::format_number(tc.l2));
  m.set("train.batch_size", std::to_string(tc.batch_size));
  m.set("train.grad_clip", cli::format_number(tc.grad_clip));
  m.set("train.clip_mode", to_string(tc.clip_mode));
  m.set("train.seed", std::to_string(tc.seed));
  m.set("train.steps", std::to_string(result.curve.size()));
  data_to_manifest(a.data, data.windows.size(), m);
  write_run_manifest(cli::sibling(ckpt, ".manifest"), "train", app, m);
  std::cout << "trained " << result.curve.size() << " steps on " << data.windows.size()
            << " windows; final loss " << (result.curve.empty() ? 0.0 : result.curve.back().loss)
            << "\n";
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
  SceneFlags scene;
  ModelFlags model;
  DataFlags data;
  std::string checkpoint;
  std::string out = "predictions.csv";
  std::string heatmaps;
  int heatmap_limit = 16;
  int jobs = 1;
};

std::vector<WindowForecast> unet_forecasts(const LoadedModel& lm,
                                           const std::vector<SceneWindow>& windows, int jobs,
                                           const fs::path& heat_dir, int heat_limit) {
  std::vector<WindowForecast> out(windows.size());
  parallel_for(windows.size(), jobs, [&](std::size_t i) {
    const bool keep = !heat_dir.empty() && i < static_cast<std::size_t>(heat_limit);
    Tensor<float> heat;
    out[i] = forecast_unet(lm.model, windows[i], lm.settings, keep ? &heat : nullptr);
    if (keep) {
      const auto enc = encode_window(windows[i], lm.settings.render, lm.settings.grid,
                                     lm.settings.with_lanes);
      write_png(heat_dir / window_name(i, ".png"),
                cli::contact_sheet(enc.input, to_block(heat, lm.settings.grid)));
    }
  });
  return out;
}

void run_predict(const CLI::App& app, const PredictArgs& a) {
  const auto lm = load_model(a.checkpoint);
  check_flags_match(app, a.scene, a.model, lm.settings, lm.model.config());
  const auto data = cli::load_windows(a.data.files, a.data.keep_every, lm.settings.grid,
                                      lm.settings.input_len, lm.settings.output_len, a.data.stride);
  check_interval(data.dt, lm.settings);

  const fs::path heat_dir(a.heatmaps);
  if (!heat_dir.empty()) fs::create_directories(heat_dir);
  const auto forecasts = unet_forecasts(lm, data.windows, a.jobs, heat_dir, a.heatmap_limit);
  std::vector<PredictionRow> rows;
  for (std::size_t i = 0; i < data.windows.size(); ++i) {
    auto r = to_rows(i, data.windows[i], forecasts[i]);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  const fs::path out(a.out);
  ensure_parent(out);
  write_predictions_csv(out, rows);

  RunManifest m = lm.manifest;
  m.set("predict.checkpoint", a.checkpoint);
  m.set("predict.rows", std::to_string(rows.size()));
  data_to_manifest(a.data, data.windows.size(), m);
  write_run_manifest(cli::sibling(out, ".manifest"), "predict", app, m);
  std::cout << "wrote " << rows.size() << " predictions for " << data.windows.size()
            << " windows to " << out.string() << "\n";
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  SceneFlags scene;
  ModelFlags model;
  DataFlags data;
  std::string predictor = "unet";
  std::string checkpoint;
  std::string predictions;
  std::string out = "eval";
  std::string title;
  int jobs = 1;
};

void check_data_flag(const CLI::App& app, const char* flag, int given, const RunManifest& m,
                     const std::string& key) {
  const int stored = std::stoi(m.require(key));
  if (app.count(flag) && given != stored) {
    throw UsageError(std::string(flag) + " " + std::to_string(given) +
                     " does not match the predictions (" + std::to_string(stored) + ")");
  }
}

void run_eval(const CLI::App& app, EvalArgs a) {
  const bool from_file = !a.predictions.empty();
  if (from_file && app.count("--predictor")) {
    throw UsageError("--predictions and --predictor are mutually exclusive");
  }
  if (!from_file && a.predictor == "unet" && a.checkpoint.empty()) {
    throw UsageError("--predictor unet needs --checkpoint");
  }
  if (!from_file && a.predictor == "kf" && !a.checkpoint.empty()) {
    throw UsageError("--checkpoint is not used by --predictor kf");
  }

  RunManifest m;
  PipelineSettings s;
  std::vector<WindowForecast> forecasts;
  cli::LoadedData data;
  std::string label;
  if (from_file) {
    const auto pm_path = cli::sibling(a.predictions, ".manifest");
    if (!fs::exists(pm_path)) throw UsageError(a.predictions + ": manifest not found");
    m = RunManifest::load(pm_path);
    s = PipelineSettings::from_manifest(m);
    check_data_flag(app, "--stride", a.data.stride, m, "data.stride");
    check_data_flag(app, "--keep-every", a.data.keep_every, m, "data.keep_every");
    a.data.stride = std::stoi(m.require("data.stride"));
    a.data.keep_every = std::stoi(m.require("data.keep_every"));
    data = cli::load_windows(a.data.files, a.data.keep_every, s.grid, s.input_len, s.output_len,
                             a.data.stride);
    check_interval(data.dt, s);
    const auto rows = load_predictions_csv(a.predictions);
    for (const auto& r : rows) {
      if (r.window < data.windows.size() &&
          std::abs(r.anchor_time - data.windows[r.window].anchor_time()) > 1e-6) {
        throw UsageError(a.predictions + ": window " + std::to_string(r.window) +
                         " anchor time differs from the data");
      }
    }
    forecasts = forecasts_from_rows(data.windows, rows);
    label = "predictions " + a.predictions;
  } else if (a.predictor == "unet") {
    const auto lm = load_model(a.checkpoint);
    check_flags_match(app, a.scene, a.model, lm.settings, lm.model.config());
    m = lm.manifest;
    s = lm.settings;
    data = cli::load_windows(a.data.files, a.data.keep_every, s.grid, s.input_len, s.output_len,
                             a.data.stride);
    check_interval(data.dt, s);
    forecasts = unet_forecasts(lm, data.windows, a.jobs, {}, 0);
    label = "U-Net " + a.checkpoint;
  } else {
    s = settings_from(a.scene);
    data = cli::load_windows(a.data.files, a.data.keep_every, s.grid, s.input_len, s.output_len,
                             a.data.stride);
    s.dt = data.dt;
    s.to_manifest(m);
    forecasts.resize(data.windows.size());
    parallel_for(data.windows.size(), a.jobs,
                 [&](std::size_t i) { forecasts[i] = forecast_kf(data.windows[i], s); });
    label = "Kalman filter";
  }

  const auto report = evaluate_forecasts(data.windows, forecasts);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "report.csv");
    write_report_csv(os, report, s.dt);
  }
  {
    std::ofstream os(dir / "summary.csv");
    write_summary_csv(os, report);
  }
  const std::string title = a.title.empty() ? label : a.title;
  {
    std::ofstream os(dir / "report.txt");
    write_report_table(os, report, s.dt, title);
  }
  write_report_table(std::cout, report, s.dt, title);

  m.set("eval.source", label);
  m.set("eval.trajectories", std::to_string(report.n_trajectories));
  m.set("eval.missed", std::to_string(report.n_missed));
  data_to_manifest(a.data, data.windows.size(), m);
  write_run_manifest(dir / "run.manifest", "eval", app, m);
}

// ---------------------------------------------------------------- render

struct RenderArgs {
  SceneFlags scene;
  ModelFlags model;
  DataFlags data;
  std::size_t window = 0;
  std::string checkpoint;
  std::string out;
};

void run_render(const CLI::App& app, const RenderArgs& a) {
  std::optional<LoadedModel> lm;
  PipelineSettings s;
  if (!a.checkpoint.empty()) {
    lm = load_model(a.checkpoint);
    check_flags_match(app, a.scene, a.model, lm->settings, lm->model.config());
    s = lm->settings;
  } else {
    s = settings_from(a.scene);
  }
  const auto data = cli::load_windows(a.data.files, a.data.keep_every, s.grid, s.input_len,
                                      s.output_len, a.data.stride);
  if (lm) check_interval(data.dt, s);
  if (a.window >= data.windows.size()) {
    throw UsageError("--window " + std::to_string(a.window) + " out of range (data has " +
                     std::to_string(data.windows.size()) + " windows)");
  }
  const auto& w = data.windows[a.window];
  const auto enc = encode_window(w, s.render, s.grid, s.with_lanes);
  std::vector<GrayImage> rows{cli::contact_sheet(enc.input, enc.target)};
  if (lm) {
    const auto heat = lm->model.forward(to_tensor<float>(enc.input));
    rows.push_back(cli::contact_sheet(enc.input, to_block(heat, s.grid)));
  }
  const fs::path out(a.out);
  ensure_parent(out);
  write_image(out, stack_vertical(rows));

  RunManifest m;
  s.to_manifest(m);
  data_to_manifest(a.data, data.windows.size(), m);
  write_run_manifest(cli::sibling(out, ".manifest"), "render", app, m);
  std::cout << "wrote " << out.string() << "\n";
}

std::string one_line(std::string text) {
  std::replace(text.begin(), text.end(), '\n', ' ');
  while (!text.empty() && text.back() == ' ') text.pop_back();
  return text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bird's-eye-view trajectory prediction with a U-Net", "bevcast"};
  app.require_subcommand(1, 1);
  app.set_config("--config", "", "Read options from a TOML or INI file")->envname("BEVCAST_CONFIG");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate synthetic highway trajectories");
  c_synth->add_option("--scenario", synth.scenario, "Traffic scenario")
      ->check(CLI::IsMember({"constant_velocity", "cv", "lane_change", "cut_in", "mixed"}))
      ->capture_default_str();
  c_synth->add_option("--vehicles", synth.vehicles, "Vehicles on the road at any time")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_synth->add_option("--duration", synth.duration, "Seconds of traffic")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_synth->add_option("--rate", synth.rate, "Samples per second")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_synth->add_option("--noise", synth.noise, "Position noise standard deviation, metres")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  c_synth->add_option("--grid", synth.grid, "Grid preset the road is sized for")
      ->check(CLI::IsMember({"desk", "full", "tiny"}))
      ->capture_default_str();
  c_synth->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  c_synth->add_option("--out", synth.out, "Output CSV")->required();

  EncodeArgs encode;
  auto* c_encode = app.add_subcommand("encode", "Rasterize windows into block files");
  add_data_flags(c_encode, encode.data);
  add_scene_flags(c_encode, encode.scene);
  c_encode->add_option("--out", encode.out, "Output directory")->required();
  c_encode->add_flag("--png", encode.png, "Also write contact sheets");
  c_encode->add_option("--png-limit", encode.png_limit, "Contact sheets to write")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  c_encode->add_option("--jobs", encode.jobs, "Worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train a U-Net on trajectory windows");
  add_data_flags(c_train, train.data);
  add_scene_flags(c_train, train.scene);
  add_model_flags(c_train, train.model);
  c_train->add_option("--checkpoint", train.checkpoint, "Checkpoint to write")->required();
  c_train->add_option("--loss-csv", train.loss_csv, "Loss curve (default <checkpoint>.loss.csv)");
  c_train->add_option("--epochs", train.epochs, "Passes over the data")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_train->add_option("--lr", train.lr, "Adam learning rate")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  c_train->add_option("--l2", train.l2, "L2 weight penalty")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  c_train->add_option("--batch", train.batch, "Mini-batch size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_train->add_option("--clip", train.clip, "Gradient threshold")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_train->add_option("--clip-mode", train.clip_mode, "Gradient clipping rule")
      ->check(CLI::IsMember({"global_norm", "per_element"}))
      ->capture_default_str();
  c_train->add_option("--seed", train.seed, "Initialization and shuffling seed")
      ->capture_default_str();
  c_train->add_flag("--quiet", train.quiet, "No per-epoch progress on stderr");

  PredictArgs predict;
  auto* c_predict = app.add_subcommand("predict", "Forecast positions with a trained checkpoint");
  add_data_flags(c_predict, predict.data);
  add_scene_flags(c_predict, predict.scene);
  add_model_flags(c_predict, predict.model);
  c_predict->add_option("--checkpoint", predict.checkpoint, "Trained checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  c_predict->add_option("--out", predict.out, "Predictions CSV")->capture_default_str();
  c_predict->add_option("--heatmaps", predict.heatmaps, "Directory for heat-map sheets");
  c_predict->add_option("--heatmap-limit", predict.heatmap_limit, "Heat-map sheets to write")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  c_predict->add_option("--jobs", predict.jobs, "Worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Score forecasts against ground truth");
  add_data_flags(c_eval, eval.data);
  add_scene_flags(c_eval, eval.scene);
  add_model_flags(c_eval, eval.model);
  c_eval->add_option("--predictor", eval.predictor, "Forecaster to run")
      ->check(CLI::IsMember({"unet", "kf"}))
      ->capture_default_str();
  c_eval->add_option("--checkpoint", eval.checkpoint, "Checkpoint for --predictor unet")
      ->check(CLI::ExistingFile);
  c_eval->add_option("--predictions", eval.predictions, "Score a predictions CSV instead")
      ->check(CLI::ExistingFile);
  c_eval->add_option("--out", eval.out, "Report directory")->capture_default_str();
  c_eval->add_option("--title", eval.title, "Report title");
  c_eval->add_option("--jobs", eval.jobs, "Worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  RenderArgs render;
  auto* c_render = app.add_subcommand("render", "Draw one window as an image");
  add_data_flags(c_render, render.data);
  add_scene_flags(c_render, render.scene);
  add_model_flags(c_render, render.model);
  c_render->add_option("--window", render.window, "Window index")->capture_default_str();
  c_render->add_option("--checkpoint", render.checkpoint, "Add a row of network output")
      ->check(CLI::ExistingFile);
  c_render->add_option("--out", render.out, "Output .png or .pgm")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "bevcast: " << one_line(e.what()) << "\n";
    return e.get_exit_code();
  }

  try {
    if (*c_synth) run_synth(*c_synth, synth);
    if (*c_encode) run_encode(*c_encode, encode);
    if (*c_train) run_train(*c_train, train);
    if (*c_predict) run_predict(*c_predict, predict);
    if (*c_eval) run_eval(*c_eval, eval);
    if (*c_render) run_render(*c_render, render);
  } catch (const std::exception& e) {
    std::cerr << "bevcast: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 0;
}
