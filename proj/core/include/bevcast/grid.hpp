#pragma once

#include <string>

namespace bevcast {

struct Point2 {
  double x = 0.0;  // longitudinal, meters
  double y = 0.0;  // lateral, meters (signed about road center)

  friend bool operator==(const Point2&, const Point2&) = default;
};

// Continuous pixel coordinates. Integer values sit on pixel centers.
struct PixelCoord {
  double row = 0.0;
  double col = 0.0;
};

// World <-> pixel mapping for a bird's-eye-view raster.
//
// Rows follow the longitudinal axis starting at x = 0; columns follow the
// lateral axis with y = 0 on the center column. Pixel (r, c) is sampled at
// its center, which maps to world (r / ppm_x, c / ppm_y - y_half_range_m).
class GridSpec {
 public:
  // Derives height/width from the metric extent: H = round(ppm_x * x_range),
  // W = round(ppm_y * 2 * y_half_range). Throws std::invalid_argument on
  // non-positive factors or an empty grid.
  static GridSpec from_extent(double ppm_x, double ppm_y, double x_range_m,
                              double y_half_range_m);

  // 128 x 64 px, 25.6 m x +-3.2 m at ppm (5, 10).
  static GridSpec desk();
  // 512 x 256 px, 102.4 m x +-12.8 m at ppm (5, 10).
  static GridSpec full();
  // Looks up "desk", "full" or "tiny" (64 x 64 px, ppm (2, 4)).
  static GridSpec preset(const std::string& name);

  int height_px() const { return height_px_; }
  int width_px() const { return width_px_; }
  double ppm_x() const { return ppm_x_; }
  double ppm_y() const { return ppm_y_; }
  double x_range_m() const { return x_range_m_; }
  double y_half_range_m() const { return y_half_range_m_; }

  // Throws std::invalid_argument unless both dimensions are multiples of 2^depth.
  void require_divisible(int depth_levels) const;
  bool divisible_by(int depth_levels) const;

  // True when the world position lies inside the rasterized area.
  bool contains(const Point2& p) const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;

 private:
  GridSpec(int h, int w, double ppm_x, double ppm_y, double x_range, double y_half)
      : height_px_(h), width_px_(w), ppm_x_(ppm_x), ppm_y_(ppm_y),
        x_range_m_(x_range), y_half_range_m_(y_half) {}

  int height_px_;
  int width_px_;
  double ppm_x_;
  double ppm_y_;
  double x_range_m_;
  double y_half_range_m_;
};

PixelCoord world_to_pixel(const Point2& p, const GridSpec& g);
Point2 pixel_to_world(const PixelCoord& px, const GridSpec& g);

}  // namespace bevcast
