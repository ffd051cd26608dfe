#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bevcast/bev_codec.hpp"

namespace bevcast {

// 8-bit grayscale raster used for file export.
struct GrayImage {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> data;  // row-major

  GrayImage() = default;
  GrayImage(int r, int c, std::uint8_t fill = 0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}

  std::uint8_t& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::uint8_t at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

// byte = round(255 * pixel), clamped to [0, 255].
GrayImage to_gray(const BevImage& img);
BevImage from_gray(const GrayImage& gray, const GridSpec& grid);

// Lays images out left to right separated by `gap` columns of `gap_value`.
GrayImage tile_horizontal(std::span<const GrayImage> images, int gap = 2,
                          std::uint8_t gap_value = 64);
// Stacks images top to bottom without separators.
GrayImage stack_vertical(std::span<const GrayImage> images);

// Binary PGM (P5), maxval 255. Throws std::runtime_error on I/O or format errors.
void write_pgm(const std::filesystem::path& path, const GrayImage& img);
GrayImage read_pgm(const std::filesystem::path& path);

// 8-bit grayscale PNG via libpng.
void write_png(const std::filesystem::path& path, const GrayImage& img);
GrayImage read_png(const std::filesystem::path& path);

}  // namespace bevcast
