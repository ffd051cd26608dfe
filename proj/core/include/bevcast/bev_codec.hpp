#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bevcast/grid.hpp"
#include "bevcast/scene.hpp"

namespace bevcast {

// Single-channel raster with intensities normalized to [0, 1] (sums may
// exceed 1 under additive merging).
class BevImage {
 public:
  explicit BevImage(const GridSpec& grid);
  BevImage(const GridSpec& grid, std::vector<double> pixels);

  const GridSpec& grid() const { return grid_; }
  int rows() const { return grid_.height_px(); }
  int cols() const { return grid_.width_px(); }

  double at(int r, int c) const { return pixels_[index(r, c)]; }
  double& at(int r, int c) { return pixels_[index(r, c)]; }

  std::span<const double> pixels() const { return pixels_; }
  std::span<double> pixels() { return pixels_; }

  double max_value() const;

 private:
  std::size_t index(int r, int c) const {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) +
           static_cast<std::size_t>(c);
  }

  GridSpec grid_;
  std::vector<double> pixels_;
};

// Time-ordered stack of frames sharing one grid.
class BevBlock {
 public:
  BevBlock() = default;
  explicit BevBlock(std::vector<BevImage> frames);

  const std::vector<BevImage>& frames() const { return frames_; }
  std::size_t size() const { return frames_.size(); }
  const BevImage& operator[](std::size_t k) const { return frames_[k]; }

 private:
  std::vector<BevImage> frames_;
};

struct EncodedWindow {
  BevBlock input;
  BevBlock target;
};

BevImage render_vehicle_gaussian(const VehicleState& v, const RenderOptions& opts,
                                 const GridSpec& g);
BevImage render_vehicle_rect(const VehicleState& v, const RenderOptions& opts,
                             const GridSpec& g);
// Dispatches on opts.shape.
BevImage render_vehicle(const VehicleState& v, const RenderOptions& opts, const GridSpec& g);

// Pixel-wise maximum or unclamped sum. Throws std::invalid_argument on an
// empty list or images on different grids.
BevImage merge(std::span<const BevImage> images, MergeMode mode);

// One-pixel-wide polylines at opts.lane_value, clipped to the grid.
BevImage render_lanes(std::span<const Polyline> lanes, const RenderOptions& opts,
                      const GridSpec& g);

// All vehicles of one frame merged per opts.merge.
BevImage render_frame(std::span<const VehicleState> vehicles, const RenderOptions& opts,
                      const GridSpec& g);

// Input frames carry vehicles (plus lanes when requested); target frames carry
// only vehicles present in the latest input frame and never lanes.
EncodedWindow encode_window(const SceneWindow& w, const RenderOptions& opts,
                            const GridSpec& g, bool with_lanes);

}  // namespace bevcast
