#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bevcast/grid.hpp"
#include "bevcast/scene.hpp"

namespace bevcast {

// Malformed input, reported as "<source>:<line>: <message>".
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrajectoryRow {
  std::int64_t frame = 0;
  TrackId id;
  double x_m = 0.0;
  double y_m = 0.0;
  std::optional<int> lane;
};

// Multi-vehicle trajectories on a shared frame clock. Frame labels keep their
// original numbering after resampling; consecutive samples are frame_stride
// labels apart and frame_rate_hz is the rate of those samples, so frame f
// happens at f / (frame_rate_hz * frame_stride) seconds.
struct TrajectoryTable {
  std::vector<TrajectoryRow> rows;
  double frame_rate_hz = 4.0;
  std::int64_t frame_stride = 1;
  std::vector<Polyline> lanes;

  double time_of(std::int64_t frame) const {
    return static_cast<double>(frame) / (frame_rate_hz * static_cast<double>(frame_stride));
  }
  double dt() const { return 1.0 / frame_rate_hz; }

  // Throws DataError on duplicate (frame, id), negative frames or a
  // non-positive rate or stride.
  void validate() const;
};

// Header `frame,id,x,y` with an optional `lane` column, in any order; other
// columns are ignored. Comment lines start with '#'; a `# frame_rate_hz=R`
// or `# frame_stride=S` comment overrides the defaults.
TrajectoryTable parse_csv(std::istream& in, const std::string& source,
                          double default_rate_hz = 4.0);
// Also reads the lane sidecar `<stem>.lanes` next to the file when present.
TrajectoryTable load_csv(const std::filesystem::path& path, double default_rate_hz = 4.0);

void write_csv(std::ostream& out, const TrajectoryTable& table);
// Writes the lane sidecar as well when the table carries lanes.
void write_csv(const std::filesystem::path& path, const TrajectoryTable& table);

// One polyline per line as `x0 y0 x1 y1 ...`.
std::vector<Polyline> parse_lanes(std::istream& in, const std::string& source);
void write_lanes(std::ostream& out, const std::vector<Polyline>& lanes);
std::filesystem::path lanes_sidecar(const std::filesystem::path& csv_path);

// Keeps every keep_every-th sample. Throws std::invalid_argument for
// keep_every < 1.
TrajectoryTable resample(const TrajectoryTable& t, int keep_every);

// Sliding windows of D + M consecutive samples. Vehicles outside the grid are
// dropped per frame; output frames keep only vehicles present in the latest
// input frame. Gaps in the frame clock break windows.
std::vector<SceneWindow> slice_windows(const TrajectoryTable& t, const GridSpec& grid,
                                       int input_len, int output_len, int stride = 1);

}  // namespace bevcast
