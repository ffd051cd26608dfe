#include "bevcast/bev_codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <unordered_set>

namespace bevcast {

namespace {

constexpr double kGaussianSupportSigmas = 4.0;

}  // namespace

BevImage::BevImage(const GridSpec& grid)
    : grid_(grid),
      pixels_(static_cast<std::size_t>(grid.height_px()) *
                  static_cast<std::size_t>(grid.width_px()),
              0.0) {}

BevImage::BevImage(const GridSpec& grid, std::vector<double> pixels)
    : grid_(grid), pixels_(std::move(pixels)) {
  if (pixels_.size() != static_cast<std::size_t>(grid.height_px()) *
                            static_cast<std::size_t>(grid.width_px())) {
    throw std::invalid_argument("image: pixel count does not match the grid");
  }
}

double BevImage::max_value() const {
  return pixels_.empty() ? 0.0 : *std::max_element(pixels_.begin(), pixels_.end());
}

BevBlock::BevBlock(std::vector<BevImage> frames) : frames_(std::move(frames)) {
  for (const auto& f : frames_) {
    if (!(f.grid() == frames_.front().grid())) {
      throw std::invalid_argument("block: frames must share one grid");
    }
  }
}

BevImage render_vehicle_gaussian(const VehicleState& v, const RenderOptions& opts,
                                 const GridSpec& g) {
  BevImage img(g);
  const PixelCoord mu = world_to_pixel(v.position(), g);
  const double reach_r = kGaussianSupportSigmas * opts.sigma_x_m * g.ppm_x();
  const double reach_c = kGaussianSupportSigmas * opts.sigma_y_m * g.ppm_y();
  const int r0 = std::max(0, static_cast<int>(std::ceil(mu.row - reach_r)));
  const int r1 = std::min(g.height_px() - 1, static_cast<int>(std::floor(mu.row + reach_r)));
  const int c0 = std::max(0, static_cast<int>(std::ceil(mu.col - reach_c)));
  const int c1 = std::min(g.width_px() - 1, static_cast<int>(std::floor(mu.col + reach_c)));
  if (r0 > r1 || c0 > c1) return img;

  const double kx = std::sqrt(2.0) * opts.sigma_x_m;
  const double ky = std::sqrt(2.0) * opts.sigma_y_m;
  std::vector<double> col_term(static_cast<std::size_t>(c1 - c0 + 1));
  for (int c = c0; c <= c1; ++c) {
    const double y = pixel_to_world({0.0, static_cast<double>(c)}, g).y;
    const double u = (y - v.y_m) / ky;
    col_term[static_cast<std::size_t>(c - c0)] = u * u;
  }
  for (int r = r0; r <= r1; ++r) {
    const double x = pixel_to_world({static_cast<double>(r), 0.0}, g).x;
    const double u = (x - v.x_m) / kx;
    const double row_term = u * u;
    for (int c = c0; c <= c1; ++c) {
      img.at(r, c) =
          opts.vehicle_value * std::exp(-(row_term + col_term[static_cast<std::size_t>(c - c0)]));
    }
  }
  return img;
}

BevImage render_vehicle_rect(const VehicleState& v, const RenderOptions& opts,
                             const GridSpec& g) {
  BevImage img(g);
  const PixelCoord center = world_to_pixel(v.position(), g);
  // The box spans round(length * ppm) pixel centers on each axis.
  const double n_rows = std::round(opts.rect_h_m * g.ppm_x());
  const double n_cols = std::round(opts.rect_w_m * g.ppm_y());
  const int first_r = static_cast<int>(std::ceil(center.row - n_rows / 2.0));
  const int first_c = static_cast<int>(std::ceil(center.col - n_cols / 2.0));
  const int r0 = std::max(0, first_r);
  const int r1 = std::min(g.height_px() - 1, first_r + static_cast<int>(n_rows) - 1);
  const int c0 = std::max(0, first_c);
  const int c1 = std::min(g.width_px() - 1, first_c + static_cast<int>(n_cols) - 1);
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) img.at(r, c) = opts.vehicle_value;
  }
  return img;
}

BevImage render_vehicle(const VehicleState& v, const RenderOptions& opts, const GridSpec& g) {
  return opts.shape == VehicleShape::gaussian ? render_vehicle_gaussian(v, opts, g)
                                              : render_vehicle_rect(v, opts, g);
}

BevImage merge(std::span<const BevImage> images, MergeMode mode) {
  if (images.empty()) throw std::invalid_argument("merge: no images");
  BevImage out = images.front();
  for (std::size_t i = 1; i < images.size(); ++i) {
    if (!(images[i].grid() == out.grid())) {
      throw std::invalid_argument("merge: images are on different grids");
    }
    auto dst = out.pixels();
    auto src = images[i].pixels();
    if (mode == MergeMode::max) {
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = std::max(dst[k], src[k]);
    } else {
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
  return out;
}

BevImage render_lanes(std::span<const Polyline> lanes, const RenderOptions& opts,
                      const GridSpec& g) {
  BevImage img(g);
  auto plot = [&](long r, long c) {
    if (r >= 0 && r < g.height_px() && c >= 0 && c < g.width_px()) {
      img.at(static_cast<int>(r), static_cast<int>(c)) = opts.lane_value;
    }
  };
  for (const auto& line : lanes) {
    if (line.size() == 1) {
      const PixelCoord p = world_to_pixel(line.front(), g);
      plot(std::lround(p.row), std::lround(p.col));
    }
    for (std::size_t i = 1; i < line.size(); ++i) {
      const PixelCoord a = world_to_pixel(line[i - 1], g);
      const PixelCoord b = world_to_pixel(line[i], g);
      long r = std::lround(a.row);
      long c = std::lround(a.col);
      const long r_end = std::lround(b.row);
      const long c_end = std::lround(b.col);
      const long dr = std::labs(r_end - r);
      const long dc = -std::labs(c_end - c);
      const long sr = r < r_end ? 1 : -1;
      const long sc = c < c_end ? 1 : -1;
      long err = dr + dc;
      // Bresenham; polylines far outside the grid simply plot nothing.
      while (true) {
        plot(r, c);
        if (r == r_end && c == c_end) break;
        const long e2 = 2 * err;
        if (e2 >= dc) {
          err += dc;
          r += sr;
        }
        if (e2 <= dr) {
          err += dr;
          c += sc;
        }
      }
    }
  }
  return img;
}

BevImage render_frame(std::span<const VehicleState> vehicles, const RenderOptions& opts,
                      const GridSpec& g) {
  if (vehicles.empty()) return BevImage(g);
  std::vector<BevImage> renders;
  renders.reserve(vehicles.size());
  for (const auto& v : vehicles) renders.push_back(render_vehicle(v, opts, g));
  return merge(renders, opts.merge);
}

EncodedWindow encode_window(const SceneWindow& w, const RenderOptions& opts,
                            const GridSpec& g, bool with_lanes) {
  std::vector<BevImage> inputs;
  inputs.reserve(w.input_length());
  const BevImage lanes = with_lanes ? render_lanes(w.lanes(), opts, g) : BevImage(g);
  for (const auto& frame : w.input_frames()) {
    BevImage img = render_frame(frame, opts, g);
    if (with_lanes) {
      const BevImage pair[] = {img, lanes};
      img = merge(pair, MergeMode::max);
    }
    inputs.push_back(std::move(img));
  }

  std::unordered_set<TrackId> latest;
  for (const auto& v : w.latest_input()) latest.insert(v.id);
  std::vector<BevImage> targets;
  targets.reserve(w.output_length());
  for (const auto& frame : w.output_frames()) {
    Frame kept;
    for (const auto& v : frame) {
      if (latest.contains(v.id)) kept.push_back(v);
    }
    targets.push_back(render_frame(kept, opts, g));
  }
  return {BevBlock(std::move(inputs)), BevBlock(std::move(targets))};
}

}  // namespace bevcast
