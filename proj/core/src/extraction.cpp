#include "bevcast/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bevcast {

ExtractionParams ExtractionParams::for_render(const RenderOptions& opts, const GridSpec& g) {
  ExtractionParams p;
  if (opts.shape == VehicleShape::gaussian) {
    p.win_h = static_cast<int>(std::ceil(3.0 * opts.sigma_x_m * g.ppm_x()));
    p.win_w = static_cast<int>(std::ceil(3.0 * opts.sigma_y_m * g.ppm_y()));
  } else {
    p.win_h = static_cast<int>(std::lround(opts.rect_h_m * g.ppm_x()));
    p.win_w = static_cast<int>(std::lround(opts.rect_w_m * g.ppm_y()));
    p.p_min = opts.vehicle_value / 2.0;
  }
  p.win_h = std::max(p.win_h, 1);
  p.win_w = std::max(p.win_w, 1);
  return p;
}

void ExtractionParams::validate() const {
  if (!(p_min > 0.0 && p_min < 1.0)) {
    throw std::invalid_argument("extraction: p_min must lie in (0, 1)");
  }
  if (win_h < 1 || win_w < 1) {
    throw std::invalid_argument("extraction: half-windows must be at least 1");
  }
}

namespace {

PixelCoord centroid(const std::vector<double>& px, int rows, int cols, int row, int col,
                    const ExtractionParams& params) {
  const int r0 = std::max(0, row - params.win_h);
  const int r1 = std::min(rows - 1, row + params.win_h);
  const int c0 = std::max(0, col - params.win_w);
  const int c1 = std::min(cols - 1, col + params.win_w);
  double mass = 0.0;
  double sum_r = 0.0;
  double sum_c = 0.0;
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const double p = std::max(0.0, px[static_cast<std::size_t>(r) * cols + c]);
      mass += p;
      sum_r += p * r;
      sum_c += p * c;
    }
  }
  if (params.mode == CentroidMode::window_divisor) {
    return {sum_r / (2.0 * params.win_h), sum_c / (2.0 * params.win_w)};
  }
  if (!(mass > 0.0)) return {static_cast<double>(row), static_cast<double>(col)};
  return {sum_r / mass, sum_c / mass};
}

}  // namespace

PixelCoord subpx_location(const BevImage& frame, int row, int col,
                          const ExtractionParams& params) {
  params.validate();
  if (row < 0 || row >= frame.rows() || col < 0 || col >= frame.cols()) {
    throw std::out_of_range("extraction: peak outside the frame");
  }
  const auto px = frame.pixels();
  return centroid(std::vector<double>(px.begin(), px.end()), frame.rows(), frame.cols(), row,
                  col, params);
}

std::vector<Detection> extract_positions(const BevImage& frame, const ExtractionParams& params) {
  params.validate();
  const int rows = frame.rows();
  const int cols = frame.cols();
  std::vector<double> work(frame.pixels().begin(), frame.pixels().end());
  for (double& v : work) v = std::max(v, 0.0);

  std::vector<Detection> found;
  while (true) {
    // First occurrence of the maximum in row-major order breaks ties toward
    // the smallest row, then column.
    const auto it = std::max_element(work.begin(), work.end());
    if (it == work.end() || !(*it > params.p_min)) break;
    const auto flat = static_cast<std::size_t>(it - work.begin());
    const int row = static_cast<int>(flat / static_cast<std::size_t>(cols));
    const int col = static_cast<int>(flat % static_cast<std::size_t>(cols));
    const double score = *it;
    const PixelCoord p = centroid(work, rows, cols, row, col, params);
    found.push_back({p.row, p.col, score});

    const int r0 = std::max(0, row - params.win_h);
    const int r1 = std::min(rows - 1, row + params.win_h);
    const int c0 = std::max(0, col - params.win_w);
    const int c1 = std::min(cols - 1, col + params.win_w);
    for (int r = r0; r <= r1; ++r) {
      std::fill(work.begin() + static_cast<std::ptrdiff_t>(r) * cols + c0,
                work.begin() + static_cast<std::ptrdiff_t>(r) * cols + c1 + 1, 0.0);
    }
  }
  return found;
}

std::string to_string(CentroidMode mode) {
  return mode == CentroidMode::mass_normalized ? "mass_normalized" : "window_divisor";
}

CentroidMode parse_centroid_mode(const std::string& text) {
  if (text == "mass_normalized") return CentroidMode::mass_normalized;
  if (text == "window_divisor") return CentroidMode::window_divisor;
  throw std::invalid_argument("unknown centroid mode '" + text + "'");
}

}  // namespace bevcast
