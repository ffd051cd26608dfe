#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bevcast/bev_codec.hpp"
#include "bevcast/dataio.hpp"
#include "bevcast/image_io.hpp"
#include "bevcast/manifest.hpp"

namespace bevcast::cli {

// Invalid flags, combinations or inputs detected by the front end.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string format_number(double v);

// Records every option of `app` as cli.<name>: the parsed value when the
// option was given on the command line or in a config file, its default
// otherwise. The config file path, when one was read, goes under `config`.
void echo_options(const CLI::App& app, RunManifest& m);

struct LoadedData {
  std::vector<SceneWindow> windows;
  double dt = 0.25;
};

// Loads each CSV, keeps every keep_every-th sample and slices windows.
// All files must share one sample interval.
LoadedData load_windows(const std::vector<std::string>& files, int keep_every,
                        const GridSpec& grid, int input_len, int output_len, int stride);

// Block file layout (native little-endian):
//   "BEVB" | u32 version | u32 input frames | u32 target frames | i32 rows |
//   i32 cols | f64 ppm_x | f64 ppm_y | f64 x_range_m | f64 y_half_range_m |
//   f64 anchor_time | rows x cols x f32 per frame, input frames first
inline constexpr std::uint32_t kBlockVersion = 1;

void write_block_file(const std::filesystem::path& path, const EncodedWindow& enc,
                      double anchor_time);
EncodedWindow read_block_file(const std::filesystem::path& path, double* anchor_time = nullptr);

// Input frames followed by target frames, left to right.
GrayImage contact_sheet(const BevBlock& input, const BevBlock& target);

std::filesystem::path sibling(const std::filesystem::path& path, const std::string& suffix);

}  // namespace bevcast::cli
