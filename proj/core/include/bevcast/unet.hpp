#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bevcast/tensor.hpp"

namespace bevcast {

enum class Terminal { linear, tanh, clipped_relu };

std::string to_string(Terminal t);
Terminal parse_terminal(const std::string& text);

struct UNetConfig {
  int depth_levels = 4;   // encoder/decoder pairs; inputs must be multiples of 2^n
  int base_features = 8;  // channels after pre-processing; doubled per level
  int in_channels = 8;    // past frames
  int out_channels = 8;   // future frames
  Terminal terminal = Terminal::linear;
  double clip_hi = 1.0;   // clipped_relu upper bound

  void validate() const;
  int min_input_size() const { return 1 << depth_levels; }
  // Throws std::invalid_argument unless rows and cols are positive multiples
  // of 2^depth_levels.
  void check_input_size(int rows, int cols) const;

  friend bool operator==(const UNetConfig&, const UNetConfig&) = default;
};

// Trainable weights + biases implied by the layer recipe (closed form).
std::int64_t param_count(const UNetConfig& config);

// Reported semi-length of the contact square: 2 * (3 + sum_{i=2..n} 5 * 2^(i-2)).
int receptive_radius(int depth_levels);

struct ReceptiveBox {
  int row_min = 0;
  int row_max = -1;
  int col_min = 0;
  int col_max = -1;

  bool contains(int r, int c) const {
    return r >= row_min && r <= row_max && c >= col_min && c <= col_max;
  }
  friend bool operator==(const ReceptiveBox&, const ReceptiveBox&) = default;
};

// Exact input support of output pixel (r, c) for the implemented layer recipe
// (3x3 convolutions, 2x2 pooling and 2x2 transposed convolutions), clipped
// to an input of rows x cols.
ReceptiveBox structural_receptive_box(const UNetConfig& config, int rows, int cols, int r, int c);

enum class LayerKind { conv3x3, conv1x1, upconv2x2 };

struct LayerShape {
  LayerKind kind;
  int in_channels;
  int out_channels;
  std::size_t weight_offset;
  std::size_t weight_count;
  std::size_t bias_offset;  // out_channels biases follow the weights
};

// Encoder/decoder network mapping an H x W x D block to H x W x M.
//
// Layer recipe, in parameter order: two 3x3 convolutions (pre-processing);
// per level 1..n a 2x2 max-pool followed by two 3x3 convolutions that double
// the channel count; per level n..1 a 2x2 stride-2 transposed convolution
// halving channels, concatenation with the matching encoder output, and two
// 3x3 convolutions; finally a 1x1 convolution to M channels and the terminal
// activation. Every 3x3 convolution is followed by ReLU.
template <typename T>
class UNetModel {
 public:
  // Fan-in scaled uniform weights from `seed`, zero biases.
  static UNetModel build(const UNetConfig& config, std::uint64_t seed);
  // Throws std::invalid_argument when the vector length differs from param_count.
  static UNetModel from_parameters(const UNetConfig& config, std::vector<T> params);

  const UNetConfig& config() const { return config_; }
  const std::vector<LayerShape>& layers() const { return layers_; }
  std::span<const T> parameters() const { return params_; }
  std::span<T> parameters() { return params_; }
  std::size_t parameter_count() const { return params_.size(); }

  // True for weight entries, false for biases.
  std::vector<bool> weight_mask() const;

  Tensor<T> forward(const Tensor<T>& input) const;

  // Forward pass, then back-propagation of output_gradient(output). Parameter
  // gradients are added into `grad`; the input gradient is written to
  // `input_grad` when given. Returns the network output.
  Tensor<T> forward_backward(const Tensor<T>& input,
                             const std::function<Tensor<T>(const Tensor<T>&)>& output_gradient,
                             std::span<T> grad, Tensor<T>* input_grad = nullptr) const;

  template <typename U>
  UNetModel<U> cast() const {
    std::vector<U> p(params_.begin(), params_.end());
    return UNetModel<U>::from_parameters(config_, std::move(p));
  }

 private:
  struct Tape;

  UNetModel(UNetConfig config, std::vector<LayerShape> layers, std::vector<T> params)
      : config_(config), layers_(std::move(layers)), params_(std::move(params)) {}

  Tensor<T> run(const Tensor<T>& input, Tape* tape) const;
  void reverse(const Tape& tape, Tensor<T> d_output, std::span<T> grad, Tensor<T>* input_grad) const;

  UNetConfig config_;
  std::vector<LayerShape> layers_;
  std::vector<T> params_;
};

// Bounding box of input pixels whose single-pixel impulse (+1 or -1 on all
// channels, zero background) changes any output channel at (r, c), for an
// input of rows x cols. Scans the row and column through (r, c), then grows
// the box until no pixel on the ring just outside it has influence.
template <typename T>
ReceptiveBox empirical_receptive_field(const UNetModel<T>& model, int rows, int cols, int r, int c);

extern template class UNetModel<float>;
extern template class UNetModel<double>;

}  // namespace bevcast
