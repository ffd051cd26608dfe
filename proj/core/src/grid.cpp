#include "bevcast/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace bevcast {

GridSpec GridSpec::from_extent(double ppm_x, double ppm_y, double x_range_m,
                               double y_half_range_m) {
  if (!(ppm_x > 0.0) || !(ppm_y > 0.0)) {
    throw std::invalid_argument("grid: pixels-per-meter factors must be positive");
  }
  if (!(x_range_m > 0.0) || !(y_half_range_m > 0.0)) {
    throw std::invalid_argument("grid: metric extent must be positive");
  }
  const auto h = static_cast<int>(std::lround(ppm_x * x_range_m));
  const auto w = static_cast<int>(std::lround(ppm_y * 2.0 * y_half_range_m));
  if (h < 1 || w < 1) {
    throw std::invalid_argument("grid: extent rounds to an empty raster");
  }
  return GridSpec(h, w, ppm_x, ppm_y, x_range_m, y_half_range_m);
}

GridSpec GridSpec::desk() { return from_extent(5.0, 10.0, 25.6, 3.2); }

GridSpec GridSpec::full() { return from_extent(5.0, 10.0, 102.4, 12.8); }

GridSpec GridSpec::preset(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "full") return full();
  if (name == "tiny") return from_extent(2.0, 4.0, 32.0, 8.0);
  throw std::invalid_argument("grid: unknown preset '" + name + "'");
}

bool GridSpec::divisible_by(int depth_levels) const {
  if (depth_levels < 0 || depth_levels > 30) return false;
  const int step = 1 << depth_levels;
  return height_px_ % step == 0 && width_px_ % step == 0;
}

void GridSpec::require_divisible(int depth_levels) const {
  if (!divisible_by(depth_levels)) {
    throw std::invalid_argument("grid: " + std::to_string(height_px_) + "x" +
                                std::to_string(width_px_) +
                                " is not divisible by 2^" +
                                std::to_string(depth_levels));
  }
}

bool GridSpec::contains(const Point2& p) const {
  return p.x >= 0.0 && p.x <= x_range_m_ && std::abs(p.y) <= y_half_range_m_;
}

PixelCoord world_to_pixel(const Point2& p, const GridSpec& g) {
  return {p.x * g.ppm_x(), (p.y + g.y_half_range_m()) * g.ppm_y()};
}

Point2 pixel_to_world(const PixelCoord& px, const GridSpec& g) {
  return {px.row / g.ppm_x(), px.col / g.ppm_y() - g.y_half_range_m()};
}

}  // namespace bevcast
