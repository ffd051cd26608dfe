#include "bevcast/unet.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bevcast/random.hpp"
#include "flush_denormals.hpp"

namespace bevcast {

std::string to_string(Terminal t) {
  switch (t) {
    case Terminal::linear: return "linear";
    case Terminal::tanh: return "tanh";
    case Terminal::clipped_relu: return "clippedrelu";
  }
  return "linear";
}

Terminal parse_terminal(const std::string& text) {
  if (text == "linear") return Terminal::linear;
  if (text == "tanh") return Terminal::tanh;
  if (text == "clippedrelu" || text == "clipped_relu") return Terminal::clipped_relu;
  throw std::invalid_argument("unknown terminal layer '" + text + "'");
}

void UNetConfig::validate() const {
  if (depth_levels < 2 || depth_levels > 8) {
    throw std::invalid_argument("unet: depth levels must lie in [2, 8]");
  }
  if (base_features < 1 || in_channels < 1 || out_channels < 1) {
    throw std::invalid_argument("unet: feature and channel counts must be positive");
  }
  if (terminal == Terminal::clipped_relu && !(clip_hi > 0.0)) {
    throw std::invalid_argument("unet: clipped ReLU bound must be positive");
  }
}

void UNetConfig::check_input_size(int rows, int cols) const {
  const int step = min_input_size();
  if (rows < step || cols < step || rows % step != 0 || cols % step != 0) {
    throw std::invalid_argument("unet: input " + std::to_string(rows) + "x" + std::to_string(cols) +
                                " is not a multiple of " + std::to_string(step) + "x" +
                                std::to_string(step));
  }
}

std::int64_t param_count(const UNetConfig& cfg) {
  const std::int64_t n = cfg.depth_levels;
  const std::int64_t k = cfg.base_features;
  const std::int64_t d = cfg.in_channels;
  const std::int64_t m = cfg.out_channels;
  // Level i works on c = K 2^(i-1) skip channels and contributes
  // 54c^2 + 4c (encoder) + 8c^2 + c (transposed conv) + 27c^2 + 2c (decoder).
  const std::int64_t sum_c2 = k * k * (((std::int64_t{1} << (2 * n)) - 1) / 3);
  const std::int64_t sum_c = k * ((std::int64_t{1} << n) - 1);
  return 9 * d * k + 9 * k * k + 2 * k + 89 * sum_c2 + 7 * sum_c + k * m + m;
}

int receptive_radius(int depth_levels) {
  if (depth_levels < 2) throw std::invalid_argument("receptive radius needs n >= 2");
  int sum = 3;
  for (int i = 2; i <= depth_levels; ++i) sum += 5 * (1 << (i - 2));
  return 2 * sum;
}

namespace {

struct Interval {
  int lo;
  int hi;
};

Interval widen(Interval v, int by, int size) {
  return {std::max(0, v.lo - by), std::min(size - 1, v.hi + by)};
}

Interval hull(Interval a, Interval b) { return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)}; }

// Input support of encoder output at `level` restricted to `v`.
Interval skip_support(int level, Interval v, int size) {
  const int level_size = size >> level;
  v = widen(v, 2, level_size);
  if (level == 0) return v;
  return skip_support(level - 1, {2 * v.lo, 2 * v.hi + 1}, size);
}

// Input support of the decoder output at `level` (level < n).
Interval decoder_support(int level, int depth, Interval v, int size) {
  const int level_size = size >> level;
  v = widen(v, 2, level_size);
  const Interval from_skip = skip_support(level, v, size);
  const Interval below = {v.lo / 2, v.hi / 2};
  const Interval from_up = level + 1 == depth ? skip_support(depth, below, size)
                                              : decoder_support(level + 1, depth, below, size);
  return hull(from_skip, from_up);
}

}  // namespace

ReceptiveBox structural_receptive_box(const UNetConfig& config, int rows, int cols, int r, int c) {
  config.validate();
  config.check_input_size(rows, cols);
  const Interval rv = decoder_support(0, config.depth_levels, {r, r}, rows);
  const Interval cv = decoder_support(0, config.depth_levels, {c, c}, cols);
  return {rv.lo, rv.hi, cv.lo, cv.hi};
}

namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<MatRM<T>>;
template <typename T>
using MapCM = Eigen::Map<const MatRM<T>>;
template <typename T>
using MapCV = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using MapV = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;

// Layer indices in parameter order.
struct LayerIndex {
  int depth;
  int pre(int j) const { return j; }
  int enc(int level, int j) const { return 2 + 2 * (level - 1) + j; }
  // j: 0 transposed conv, 1 and 2 convolutions.
  int dec(int level, int j) const { return 2 + 2 * depth + 3 * (depth - level) + j; }
  int post() const { return 2 + 5 * depth; }
};

std::vector<LayerShape> make_layers(const UNetConfig& cfg) {
  std::vector<LayerShape> layers;
  std::size_t offset = 0;
  auto add = [&](LayerKind kind, int cin, int cout) {
    const std::size_t taps = kind == LayerKind::conv3x3 ? 9 : (kind == LayerKind::upconv2x2 ? 4 : 1);
    const std::size_t wc = taps * static_cast<std::size_t>(cin) * static_cast<std::size_t>(cout);
    layers.push_back({kind, cin, cout, offset, wc, offset + wc});
    offset += wc + static_cast<std::size_t>(cout);
  };
  const int k = cfg.base_features;
  add(LayerKind::conv3x3, cfg.in_channels, k);
  add(LayerKind::conv3x3, k, k);
  for (int i = 1; i <= cfg.depth_levels; ++i) {
    const int c = k << (i - 1);
    add(LayerKind::conv3x3, c, 2 * c);
    add(LayerKind::conv3x3, 2 * c, 2 * c);
  }
  for (int i = cfg.depth_levels; i >= 1; --i) {
    const int c = k << (i - 1);
    add(LayerKind::upconv2x2, 2 * c, c);
    add(LayerKind::conv3x3, 2 * c, c);
    add(LayerKind::conv3x3, c, c);
  }
  add(LayerKind::conv1x1, k, cfg.out_channels);
  return layers;
}

std::size_t total_size(const std::vector<LayerShape>& layers) {
  const auto& last = layers.back();
  return last.bias_offset + static_cast<std::size_t>(last.out_channels);
}

// Sequential sums keep the result independent of buffer alignment, which
// changes how vectorized reductions are split.
template <typename T>
void add_row_sums(const T* data, Eigen::Index rows, Eigen::Index cols, T* out) {
  for (Eigen::Index r = 0; r < rows; ++r) {
    const T* row = data + r * cols;
    T s = T(0);
    for (Eigen::Index c = 0; c < cols; ++c) s += row[c];
    out[r] += s;
  }
}

template <typename T>
void im2col3(const Tensor<T>& in, std::vector<T>& col) {
  const int h = in.rows;
  const int w = in.cols;
  const std::size_t hw = in.plane();
  col.resize(static_cast<std::size_t>(in.channels) * 9 * hw);
  for (int ch = 0; ch < in.channels; ++ch) {
    const T* src = in.channel(ch);
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        T* dst = col.data() + (static_cast<std::size_t>(ch) * 9 + ky * 3 + kx) * hw;
        const int dy = ky - 1;
        const int dx = kx - 1;
        const int c0 = std::max(0, -dx);
        const int c1 = std::min(w, w - dx);
        for (int r = 0; r < h; ++r) {
          T* drow = dst + static_cast<std::size_t>(r) * w;
          const int sr = r + dy;
          if (sr < 0 || sr >= h) {
            std::fill(drow, drow + w, T(0));
            continue;
          }
          const T* srow = src + static_cast<std::size_t>(sr) * w;
          std::fill(drow, drow + c0, T(0));
          std::copy(srow + c0 + dx, srow + c1 + dx, drow + c0);
          std::fill(drow + c1, drow + w, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im3(const std::vector<T>& col, Tensor<T>& out) {
  const int h = out.rows;
  const int w = out.cols;
  const std::size_t hw = out.plane();
  std::fill(out.data.begin(), out.data.end(), T(0));
  for (int ch = 0; ch < out.channels; ++ch) {
    T* dst = out.channel(ch);
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const T* src = col.data() + (static_cast<std::size_t>(ch) * 9 + ky * 3 + kx) * hw;
        const int dy = ky - 1;
        const int dx = kx - 1;
        const int c0 = std::max(0, -dx);
        const int c1 = std::min(w, w - dx);
        for (int r = 0; r < h; ++r) {
          const int sr = r + dy;
          if (sr < 0 || sr >= h) continue;
          const T* crow = src + static_cast<std::size_t>(r) * w;
          T* orow = dst + static_cast<std::size_t>(sr) * w;
          for (int c = c0; c < c1; ++c) orow[c + dx] += crow[c];
        }
      }
    }
  }
}

template <typename T>
Tensor<T> conv_forward(const LayerShape& L, const T* params, const Tensor<T>& in,
                       std::vector<T>& scratch) {
  Tensor<T> out(L.out_channels, in.rows, in.cols);
  const auto hw = static_cast<Eigen::Index>(in.plane());
  const auto taps = L.kind == LayerKind::conv3x3 ? 9 : 1;
  const T* col_ptr = in.data.data();
  if (L.kind == LayerKind::conv3x3) {
    im2col3(in, scratch);
    col_ptr = scratch.data();
  }
  MapCM<T> wmat(params + L.weight_offset, L.out_channels, static_cast<Eigen::Index>(L.in_channels) * taps);
  MapCM<T> col(col_ptr, static_cast<Eigen::Index>(L.in_channels) * taps, hw);
  MapM<T> y(out.data.data(), L.out_channels, hw);
  y.noalias() = wmat * col;
  y.colwise() += MapCV<T>(params + L.bias_offset, L.out_channels);
  return out;
}

template <typename T>
void conv_backward(const LayerShape& L, const T* params, const Tensor<T>& in, const Tensor<T>& d_out,
                   T* grad, Tensor<T>* d_in, std::vector<T>& scratch) {
  const auto hw = static_cast<Eigen::Index>(in.plane());
  const auto taps = L.kind == LayerKind::conv3x3 ? 9 : 1;
  const auto rows = static_cast<Eigen::Index>(L.in_channels) * taps;
  const T* col_ptr = in.data.data();
  if (L.kind == LayerKind::conv3x3) {
    im2col3(in, scratch);
    col_ptr = scratch.data();
  }
  MapCM<T> dy(d_out.data.data(), L.out_channels, hw);
  MapCM<T> col(col_ptr, rows, hw);
  MapM<T> dw(grad + L.weight_offset, L.out_channels, rows);
  dw.noalias() += dy * col.transpose();
  add_row_sums(d_out.data.data(), L.out_channels, hw, grad + L.bias_offset);
  if (d_in == nullptr) return;

  MapCM<T> wmat(params + L.weight_offset, L.out_channels, rows);
  *d_in = Tensor<T>(in.channels, in.rows, in.cols);
  if (L.kind == LayerKind::conv1x1) {
    MapM<T>(d_in->data.data(), rows, hw).noalias() = wmat.transpose() * dy;
    return;
  }
  std::vector<T> dcol(static_cast<std::size_t>(rows * hw));
  MapM<T>(dcol.data(), rows, hw).noalias() = wmat.transpose() * dy;
  col2im3(dcol, *d_in);
}

// Weights are stored per output offset (a, b) as a row-major out x in matrix.
template <typename T>
Tensor<T> upconv_forward(const LayerShape& L, const T* params, const Tensor<T>& in) {
  Tensor<T> out(L.out_channels, in.rows * 2, in.cols * 2);
  const auto hw = static_cast<Eigen::Index>(in.plane());
  MapCM<T> x(in.data.data(), in.channels, hw);
  MatRM<T> tmp(L.out_channels, hw);
  const T* bias = params + L.bias_offset;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const std::size_t off = L.weight_offset + static_cast<std::size_t>(a * 2 + b) *
                                                    L.out_channels * L.in_channels;
      MapCM<T> wab(params + off, L.out_channels, L.in_channels);
      tmp.noalias() = wab * x;
      for (int co = 0; co < L.out_channels; ++co) {
        T* dst = out.channel(co);
        for (int i = 0; i < in.rows; ++i) {
          T* orow = dst + static_cast<std::size_t>(2 * i + a) * out.cols + b;
          const T* trow = tmp.data() + static_cast<std::size_t>(co) * hw + static_cast<std::size_t>(i) * in.cols;
          for (int j = 0; j < in.cols; ++j) orow[2 * j] = trow[j] + bias[co];
        }
      }
    }
  }
  return out;
}

template <typename T>
void upconv_backward(const LayerShape& L, const T* params, const Tensor<T>& in, const Tensor<T>& d_out,
                     T* grad, Tensor<T>& d_in) {
  const auto hw = static_cast<Eigen::Index>(in.plane());
  MapCM<T> x(in.data.data(), in.channels, hw);
  d_in = Tensor<T>(in.channels, in.rows, in.cols);
  MapM<T> dx(d_in.data.data(), in.channels, hw);
  MatRM<T> dyab(L.out_channels, hw);
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      for (int co = 0; co < L.out_channels; ++co) {
        const T* src = d_out.channel(co);
        for (int i = 0; i < in.rows; ++i) {
          const T* orow = src + static_cast<std::size_t>(2 * i + a) * d_out.cols + b;
          T* drow = dyab.data() + static_cast<std::size_t>(co) * hw + static_cast<std::size_t>(i) * in.cols;
          for (int j = 0; j < in.cols; ++j) drow[j] = orow[2 * j];
        }
      }
      const std::size_t off = L.weight_offset + static_cast<std::size_t>(a * 2 + b) *
                                                    L.out_channels * L.in_channels;
      MapCM<T> wab(params + off, L.out_channels, L.in_channels);
      MapM<T> dwab(grad + off, L.out_channels, L.in_channels);
      dwab.noalias() += dyab * x.transpose();
      dx.noalias() += wab.transpose() * dyab;
      add_row_sums(dyab.data(), L.out_channels, hw, grad + L.bias_offset);
    }
  }
}

template <typename T>
Tensor<T> maxpool_forward(const Tensor<T>& in, std::vector<std::uint8_t>& arg) {
  Tensor<T> out(in.channels, in.rows / 2, in.cols / 2);
  arg.assign(out.size(), 0);
  std::size_t k = 0;
  for (int ch = 0; ch < in.channels; ++ch) {
    for (int i = 0; i < out.rows; ++i) {
      for (int j = 0; j < out.cols; ++j, ++k) {
        const T v[4] = {in.at(ch, 2 * i, 2 * j), in.at(ch, 2 * i, 2 * j + 1),
                        in.at(ch, 2 * i + 1, 2 * j), in.at(ch, 2 * i + 1, 2 * j + 1)};
        std::uint8_t best = 0;
        for (std::uint8_t q = 1; q < 4; ++q) {
          if (v[q] > v[best]) best = q;
        }
        arg[k] = best;
        out.data[k] = v[best];
      }
    }
  }
  return out;
}

template <typename T>
void maxpool_backward(const Tensor<T>& d_out, const std::vector<std::uint8_t>& arg, Tensor<T>& d_in) {
  std::size_t k = 0;
  for (int ch = 0; ch < d_out.channels; ++ch) {
    for (int i = 0; i < d_out.rows; ++i) {
      for (int j = 0; j < d_out.cols; ++j, ++k) {
        d_in.at(ch, 2 * i + arg[k] / 2, 2 * j + arg[k] % 2) += d_out.data[k];
      }
    }
  }
}

template <typename T>
void relu_inplace(Tensor<T>& t) {
  for (T& v : t.data) v = v > T(0) ? v : T(0);
}

// Gradient through ReLU given its output.
template <typename T>
void relu_backward(const Tensor<T>& out, Tensor<T>& grad) {
  for (std::size_t i = 0; i < grad.data.size(); ++i) {
    if (!(out.data[i] > T(0))) grad.data[i] = T(0);
  }
}

template <typename T>
void add_into(Tensor<T>& acc, const Tensor<T>& v) {
  if (acc.data.empty()) {
    acc = v;
    return;
  }
  for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += v.data[i];
}

template <typename T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> out;
  out.channels = a.channels + b.channels;
  out.rows = a.rows;
  out.cols = a.cols;
  out.data.reserve(a.data.size() + b.data.size());
  out.data.insert(out.data.end(), a.data.begin(), a.data.end());
  out.data.insert(out.data.end(), b.data.begin(), b.data.end());
  return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split(const Tensor<T>& t, int first_channels) {
  Tensor<T> a(first_channels, t.rows, t.cols);
  Tensor<T> b(t.channels - first_channels, t.rows, t.cols);
  std::copy_n(t.data.begin(), a.data.size(), a.data.begin());
  std::copy(t.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()), t.data.end(), b.data.begin());
  return {std::move(a), std::move(b)};
}

}  // namespace

template <typename T>
struct UNetModel<T>::Tape {
  Tensor<T> input;
  Tensor<T> pre_a;
  std::vector<Tensor<T>> skip;     // [0, n]
  std::vector<Tensor<T>> pooled;   // [1, n]
  std::vector<std::vector<std::uint8_t>> pool_arg;
  std::vector<Tensor<T>> enc_a;    // [1, n]
  std::vector<Tensor<T>> cat;      // [1, n]
  std::vector<Tensor<T>> dec_a;    // [1, n]
  std::vector<Tensor<T>> dec_out;  // [1, n]
  Tensor<T> logits;
  Tensor<T> output;
};

template <typename T>
UNetModel<T> UNetModel<T>::build(const UNetConfig& config, std::uint64_t seed) {
  config.validate();
  auto layers = make_layers(config);
  std::vector<T> params(total_size(layers), T(0));
  Rng rng(seed);
  for (const auto& L : layers) {
    double fan_in = L.in_channels;
    if (L.kind == LayerKind::conv3x3) fan_in *= 9;
    // Layers feeding a ReLU use He scaling; the rest use LeCun scaling.
    const double gain = L.kind == LayerKind::conv3x3 ? 6.0 : 3.0;
    const double bound = std::sqrt(gain / fan_in);
    for (std::size_t i = 0; i < L.weight_count; ++i) {
      params[L.weight_offset + i] = static_cast<T>(rng.uniform(-bound, bound));
    }
  }
  return UNetModel(config, std::move(layers), std::move(params));
}

template <typename T>
UNetModel<T> UNetModel<T>::from_parameters(const UNetConfig& config, std::vector<T> params) {
  config.validate();
  auto layers = make_layers(config);
  if (params.size() != total_size(layers)) {
    throw std::invalid_argument("unet: expected " + std::to_string(total_size(layers)) +
                                " parameters, got " + std::to_string(params.size()));
  }
  return UNetModel(config, std::move(layers), std::move(params));
}

template <typename T>
std::vector<bool> UNetModel<T>::weight_mask() const {
  std::vector<bool> mask(params_.size(), false);
  for (const auto& L : layers_) {
    std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(L.weight_offset), L.weight_count, true);
  }
  return mask;
}

template <typename T>
Tensor<T> UNetModel<T>::run(const Tensor<T>& input, Tape* tape) const {
  if (input.channels != config_.in_channels) {
    throw std::invalid_argument("unet: expected " + std::to_string(config_.in_channels) +
                                " input channels, got " + std::to_string(input.channels));
  }
  config_.check_input_size(input.rows, input.cols);
  const int n = config_.depth_levels;
  const LayerIndex idx{n};
  const T* p = params_.data();
  std::vector<T> scratch;

  auto conv_relu = [&](int layer, const Tensor<T>& x) {
    Tensor<T> y = conv_forward(layers_[static_cast<std::size_t>(layer)], p, x, scratch);
    relu_inplace(y);
    return y;
  };

  std::vector<Tensor<T>> skip(static_cast<std::size_t>(n) + 1);
  Tensor<T> pre_a = conv_relu(idx.pre(0), input);
  skip[0] = conv_relu(idx.pre(1), pre_a);
  if (tape) {
    tape->input = input;
    tape->pre_a = std::move(pre_a);
    tape->pooled.resize(static_cast<std::size_t>(n) + 1);
    tape->pool_arg.resize(static_cast<std::size_t>(n) + 1);
    tape->enc_a.resize(static_cast<std::size_t>(n) + 1);
    tape->cat.resize(static_cast<std::size_t>(n) + 1);
    tape->dec_a.resize(static_cast<std::size_t>(n) + 1);
    tape->dec_out.resize(static_cast<std::size_t>(n) + 1);
  }
  for (int i = 1; i <= n; ++i) {
    std::vector<std::uint8_t> arg;
    Tensor<T> pooled = maxpool_forward(skip[static_cast<std::size_t>(i - 1)], arg);
    Tensor<T> a = conv_relu(idx.enc(i, 0), pooled);
    skip[static_cast<std::size_t>(i)] = conv_relu(idx.enc(i, 1), a);
    if (tape) {
      tape->pooled[static_cast<std::size_t>(i)] = std::move(pooled);
      tape->pool_arg[static_cast<std::size_t>(i)] = std::move(arg);
      tape->enc_a[static_cast<std::size_t>(i)] = std::move(a);
    }
  }
  Tensor<T> u = skip[static_cast<std::size_t>(n)];
  for (int i = n; i >= 1; --i) {
    Tensor<T> up = upconv_forward(layers_[static_cast<std::size_t>(idx.dec(i, 0))], p, u);
    Tensor<T> cat = concat(up, skip[static_cast<std::size_t>(i - 1)]);
    Tensor<T> a = conv_relu(idx.dec(i, 1), cat);
    u = conv_relu(idx.dec(i, 2), a);
    if (tape) {
      tape->cat[static_cast<std::size_t>(i)] = std::move(cat);
      tape->dec_a[static_cast<std::size_t>(i)] = std::move(a);
      tape->dec_out[static_cast<std::size_t>(i)] = u;
    }
  }
  Tensor<T> logits = conv_forward(layers_[static_cast<std::size_t>(idx.post())], p, u, scratch);
  Tensor<T> out = logits;
  switch (config_.terminal) {
    case Terminal::linear:
      break;
    case Terminal::tanh:
      for (T& v : out.data) v = std::tanh(v);
      break;
    case Terminal::clipped_relu: {
      const T hi = static_cast<T>(config_.clip_hi);
      for (T& v : out.data) v = std::clamp(v, T(0), hi);
      break;
    }
  }
  if (tape) {
    tape->skip = std::move(skip);
    tape->logits = std::move(logits);
    tape->output = out;
  }
  return out;
}

template <typename T>
void UNetModel<T>::reverse(const Tape& tape, Tensor<T> d, std::span<T> grad,
                           Tensor<T>* input_grad) const {
  const int n = config_.depth_levels;
  const LayerIndex idx{n};
  const T* p = params_.data();
  T* g = grad.data();
  std::vector<T> scratch;
  auto layer = [&](int i) -> const LayerShape& { return layers_[static_cast<std::size_t>(i)]; };

  switch (config_.terminal) {
    case Terminal::linear:
      break;
    case Terminal::tanh:
      for (std::size_t i = 0; i < d.data.size(); ++i) {
        const T y = tape.output.data[i];
        d.data[i] *= T(1) - y * y;
      }
      break;
    case Terminal::clipped_relu: {
      const T hi = static_cast<T>(config_.clip_hi);
      for (std::size_t i = 0; i < d.data.size(); ++i) {
        const T z = tape.logits.data[i];
        if (!(z > T(0) && z < hi)) d.data[i] = T(0);
      }
      break;
    }
  }

  std::vector<Tensor<T>> d_skip(static_cast<std::size_t>(n) + 1);
  Tensor<T> d_u;
  conv_backward(layer(idx.post()), p, tape.dec_out[1], d, g, &d_u, scratch);

  for (int i = 1; i <= n; ++i) {
    const auto si = static_cast<std::size_t>(i);
    relu_backward(tape.dec_out[si], d_u);
    Tensor<T> d_a;
    conv_backward(layer(idx.dec(i, 2)), p, tape.dec_a[si], d_u, g, &d_a, scratch);
    relu_backward(tape.dec_a[si], d_a);
    Tensor<T> d_cat;
    conv_backward(layer(idx.dec(i, 1)), p, tape.cat[si], d_a, g, &d_cat, scratch);
    auto [d_up, d_sk] = split(d_cat, layer(idx.dec(i, 0)).out_channels);
    add_into(d_skip[si - 1], d_sk);
    const Tensor<T>& u_in = i == n ? tape.skip[si] : tape.dec_out[si + 1];
    Tensor<T> d_below;
    upconv_backward(layer(idx.dec(i, 0)), p, u_in, d_up, g, d_below);
    if (i == n) {
      add_into(d_skip[si], d_below);
    } else {
      d_u = std::move(d_below);
    }
  }

  for (int i = n; i >= 1; --i) {
    const auto si = static_cast<std::size_t>(i);
    Tensor<T>& ds = d_skip[si];
    relu_backward(tape.skip[si], ds);
    Tensor<T> d_a;
    conv_backward(layer(idx.enc(i, 1)), p, tape.enc_a[si], ds, g, &d_a, scratch);
    relu_backward(tape.enc_a[si], d_a);
    Tensor<T> d_pooled;
    conv_backward(layer(idx.enc(i, 0)), p, tape.pooled[si], d_a, g, &d_pooled, scratch);
    const Tensor<T>& above = tape.skip[si - 1];
    Tensor<T> d_above(above.channels, above.rows, above.cols);
    maxpool_backward(d_pooled, tape.pool_arg[si], d_above);
    add_into(d_skip[si - 1], d_above);
  }

  Tensor<T>& d0 = d_skip[0];
  relu_backward(tape.skip[0], d0);
  Tensor<T> d_pre;
  conv_backward(layer(idx.pre(1)), p, tape.pre_a, d0, g, &d_pre, scratch);
  relu_backward(tape.pre_a, d_pre);
  conv_backward(layer(idx.pre(0)), p, tape.input, d_pre, g, input_grad, scratch);
}

template <typename T>
Tensor<T> UNetModel<T>::forward(const Tensor<T>& input) const {
  const detail::FlushDenormals ftz;
  return run(input, nullptr);
}

template <typename T>
Tensor<T> UNetModel<T>::forward_backward(
    const Tensor<T>& input, const std::function<Tensor<T>(const Tensor<T>&)>& output_gradient,
    std::span<T> grad, Tensor<T>* input_grad) const {
  if (grad.size() != params_.size()) {
    throw std::invalid_argument("unet: gradient buffer does not match the parameter count");
  }
  const detail::FlushDenormals ftz;
  Tape tape;
  Tensor<T> out = run(input, &tape);
  Tensor<T> d = output_gradient(out);
  if (!d.same_shape(out)) throw std::invalid_argument("unet: output gradient shape mismatch");
  reverse(tape, std::move(d), grad, input_grad);
  return out;
}

template <typename T>
ReceptiveBox empirical_receptive_field(const UNetModel<T>& model, int rows, int cols, int r, int c) {
  const auto& cfg = model.config();
  cfg.check_input_size(rows, cols);
  if (r < 0 || r >= rows || c < 0 || c >= cols) {
    throw std::out_of_range("receptive field probe: pixel outside the input");
  }
  Tensor<T> input(cfg.in_channels, rows, cols);
  const Tensor<T> base = model.forward(input);
  auto influences = [&](int pr, int pc) {
    for (const T amplitude : {T(1), T(-1)}) {
      for (int ch = 0; ch < cfg.in_channels; ++ch) input.at(ch, pr, pc) = amplitude;
      const Tensor<T> out = model.forward(input);
      for (int ch = 0; ch < cfg.in_channels; ++ch) input.at(ch, pr, pc) = T(0);
      for (int oc = 0; oc < cfg.out_channels; ++oc) {
        if (out.at(oc, r, c) != base.at(oc, r, c)) return true;
      }
    }
    return false;
  };
  ReceptiveBox box{r, r, c, c};
  bool any = false;
  auto include = [&](int pr, int pc) {
    if (!any) {
      box = {pr, pr, pc, pc};
      any = true;
      return;
    }
    box.row_min = std::min(box.row_min, pr);
    box.row_max = std::max(box.row_max, pr);
    box.col_min = std::min(box.col_min, pc);
    box.col_max = std::max(box.col_max, pc);
  };
  for (int pr = 0; pr < rows; ++pr) {
    if (influences(pr, c)) include(pr, c);
  }
  for (int pc = 0; pc < cols; ++pc) {
    if (influences(r, pc)) include(r, pc);
  }
  if (!any) return ReceptiveBox{};
  // A ReLU closed by the zero background can silence an on-axis pixel while
  // its off-axis neighbours still reach (r, c). Grow the box until the ring
  // of pixels just outside it has no influence.
  while (true) {
    const ReceptiveBox before = box;
    auto probe = [&](int pr, int pc) {
      if (pr >= 0 && pr < rows && pc >= 0 && pc < cols && influences(pr, pc)) include(pr, pc);
    };
    for (int pr = before.row_min - 1; pr <= before.row_max + 1; ++pr) {
      probe(pr, before.col_min - 1);
      probe(pr, before.col_max + 1);
    }
    for (int pc = before.col_min; pc <= before.col_max; ++pc) {
      probe(before.row_min - 1, pc);
      probe(before.row_max + 1, pc);
    }
    if (box == before) break;
  }
  return box;
}

template class UNetModel<float>;
template class UNetModel<double>;
template ReceptiveBox empirical_receptive_field<float>(const UNetModel<float>&, int, int, int, int);
template ReceptiveBox empirical_receptive_field<double>(const UNetModel<double>&, int, int, int, int);

}  // namespace bevcast
