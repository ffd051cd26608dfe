#pragma once

#include <vector>

#include "bevcast/bev_codec.hpp"

namespace bevcast {

enum class CentroidMode {
  // Intensity-weighted centroid over the window.
  mass_normalized,
  // Weighted coordinate sums divided by the window extent (2h, 2w). Kept for
  // comparison only; it does not yield pixel coordinates.
  window_divisor,
};

struct ExtractionParams {
  double p_min = 0.5;
  int win_h = 8;  // half-window, rows
  int win_w = 4;  // half-window, cols
  CentroidMode mode = CentroidMode::mass_normalized;

  // Half-windows matched to the rendered vehicle: 3 sigma for Gaussians, the
  // full footprint for rectangles (whose discrete peak is a corner).
  static ExtractionParams for_render(const RenderOptions& opts, const GridSpec& g);

  void validate() const;
};

struct Detection {
  double row = 0.0;
  double col = 0.0;
  double score = 0.0;  // peak value
};

// Repeatedly takes the global maximum above p_min (ties: smallest row, then
// column), refines it inside the window, and clears the window on a working
// copy. Negative intensities are treated as zero.
std::vector<Detection> extract_positions(const BevImage& frame, const ExtractionParams& params);

// Sub-pixel refinement around the discrete peak (row, col). The window is
// clipped at the frame border. Returns the discrete peak if the window holds
// no positive mass.
PixelCoord subpx_location(const BevImage& frame, int row, int col,
                          const ExtractionParams& params);

std::string to_string(CentroidMode mode);
CentroidMode parse_centroid_mode(const std::string& text);

}  // namespace bevcast
