#pragma once

#include <cstddef>
#include <vector>

#include "bevcast/bev_codec.hpp"

namespace bevcast {

// Channel-major (C x H x W) feature volume.
template <typename T>
struct Tensor {
  int channels = 0;
  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int c, int r, int w, T fill = T(0))
      : channels(c), rows(r), cols(w),
        data(static_cast<std::size_t>(c) * static_cast<std::size_t>(r) *
                 static_cast<std::size_t>(w),
             fill) {}

  std::size_t plane() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
  std::size_t size() const { return data.size(); }

  T* channel(int c) { return data.data() + static_cast<std::size_t>(c) * plane(); }
  const T* channel(int c) const { return data.data() + static_cast<std::size_t>(c) * plane(); }

  T& at(int c, int r, int w) { return data[static_cast<std::size_t>(c) * plane() + static_cast<std::size_t>(r) * cols + w]; }
  T at(int c, int r, int w) const { return data[static_cast<std::size_t>(c) * plane() + static_cast<std::size_t>(r) * cols + w]; }

  bool same_shape(const Tensor& o) const {
    return channels == o.channels && rows == o.rows && cols == o.cols;
  }
};

// Frames become channels in time order.
template <typename T>
Tensor<T> to_tensor(const BevBlock& block) {
  if (block.size() == 0) return {};
  const auto& g = block[0].grid();
  Tensor<T> t(static_cast<int>(block.size()), g.height_px(), g.width_px());
  for (std::size_t k = 0; k < block.size(); ++k) {
    auto px = block[k].pixels();
    T* dst = t.channel(static_cast<int>(k));
    for (std::size_t i = 0; i < px.size(); ++i) dst[i] = static_cast<T>(px[i]);
  }
  return t;
}

template <typename T>
BevBlock to_block(const Tensor<T>& t, const GridSpec& grid) {
  std::vector<BevImage> frames;
  frames.reserve(static_cast<std::size_t>(t.channels));
  for (int c = 0; c < t.channels; ++c) {
    const T* src = t.channel(c);
    frames.emplace_back(grid, std::vector<double>(src, src + t.plane()));
  }
  return BevBlock(std::move(frames));
}

}  // namespace bevcast
