#include "bevcast/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>

namespace bevcast {

GrayImage to_gray(const BevImage& img) {
  GrayImage out(img.rows(), img.cols());
  auto src = img.pixels();
  for (std::size_t k = 0; k < src.size(); ++k) {
    const double v = std::round(255.0 * src[k]);
    out.data[k] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
  }
  return out;
}

BevImage from_gray(const GrayImage& gray, const GridSpec& grid) {
  if (gray.rows != grid.height_px() || gray.cols != grid.width_px()) {
    throw std::invalid_argument("image: size does not match the grid");
  }
  std::vector<double> px(gray.data.size());
  for (std::size_t k = 0; k < px.size(); ++k) px[k] = gray.data[k] / 255.0;
  return BevImage(grid, std::move(px));
}

GrayImage tile_horizontal(std::span<const GrayImage> images, int gap, std::uint8_t gap_value) {
  if (images.empty()) return {};
  int rows = 0;
  int cols = 0;
  for (const auto& im : images) {
    rows = std::max(rows, im.rows);
    cols += im.cols;
  }
  cols += gap * static_cast<int>(images.size() - 1);
  GrayImage out(rows, cols, gap_value);
  int offset = 0;
  for (const auto& im : images) {
    for (int r = 0; r < im.rows; ++r) {
      std::copy_n(&im.data[static_cast<std::size_t>(r) * im.cols], im.cols, &out.at(r, offset));
    }
    offset += im.cols + gap;
  }
  return out;
}

GrayImage stack_vertical(std::span<const GrayImage> images) {
  if (images.empty()) return {};
  GrayImage out;
  out.cols = images.front().cols;
  for (const auto& im : images) {
    if (im.cols != out.cols) throw std::invalid_argument("stack: column counts differ");
    out.rows += im.rows;
    out.data.insert(out.data.end(), im.data.begin(), im.data.end());
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << "P5\n" << img.cols << ' ' << img.rows << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.data.data()),
           static_cast<std::streamsize>(img.data.size()));
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& is) {
  std::string tok;
  int ch;
  while ((ch = is.get()) != EOF) {
    if (ch == '#') {
      while ((ch = is.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  if (next_token(is) != "P5") throw std::runtime_error(path.string() + ": not a binary PGM");
  int cols = 0;
  int rows = 0;
  int maxval = 0;
  try {
    cols = std::stoi(next_token(is));
    rows = std::stoi(next_token(is));
    maxval = std::stoi(next_token(is));
  } catch (const std::exception&) {
    throw std::runtime_error(path.string() + ": malformed PGM header");
  }
  if (cols <= 0 || rows <= 0 || maxval != 255) {
    throw std::runtime_error(path.string() + ": only 8-bit PGM is supported");
  }
  GrayImage img(rows, cols);
  is.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (is.gcount() != static_cast<std::streamsize>(img.data.size())) {
    throw std::runtime_error(path.string() + ": truncated pixel data");
  }
  return img;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png(const std::filesystem::path& path, const GrayImage& img) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png: cannot create write struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png: cannot create info struct");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("png: failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.cols), static_cast<png_uint_32>(img.rows),
               8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < img.rows; ++r) {
    png_write_row(png, const_cast<png_bytep>(&img.data[static_cast<std::size_t>(r) * img.cols]));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

GrayImage read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png: cannot create read struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("png: cannot create info struct");
  }
  GrayImage img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("png: failed reading " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  const auto depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
      color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);
  img = GrayImage(static_cast<int>(png_get_image_height(png, info)),
                  static_cast<int>(png_get_image_width(png, info)));
  for (int r = 0; r < img.rows; ++r) {
    png_read_row(png, &img.data[static_cast<std::size_t>(r) * img.cols], nullptr);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace bevcast
