#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "bevcast/unet.hpp"

namespace bevcast {

enum class ClipMode { global_norm, per_element };

struct TrainConfig {
  double lr = 1e-3;
  double l2 = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  double grad_clip = 1.0;
  ClipMode clip_mode = ClipMode::global_norm;
  int epochs = 4;
  int batch_size = 1;
  std::uint64_t seed = 0;

  // lr 1e-6, one epoch, mini-batch 1: the long-schedule setting, which does
  // not converge on small synthetic sets.
  static TrainConfig reference();

  void validate() const;
};

std::string to_string(ClipMode mode);
ClipMode parse_clip_mode(const std::string& text);

// Non-finite loss or gradient. The model is left untouched.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
struct Sample {
  Tensor<T> input;
  Tensor<T> target;
};

// sqrt(mean((pred - target)^2)) over every element. Throws on shape mismatch.
template <typename T>
double rmse(const Tensor<T>& pred, const Tensor<T>& target);

// Scales `grad` so that its L2 norm (global_norm) or each element's magnitude
// (per_element) does not exceed `threshold`. Returns the norm before clipping.
template <typename T>
double clip_gradient(std::span<T> grad, double threshold, ClipMode mode);

template <typename T>
struct AdamState {
  std::vector<T> m;
  std::vector<T> v;
  std::int64_t step = 0;

  explicit AdamState(std::size_t n) : m(n, T(0)), v(n, T(0)) {}
};

// Adds the L2 term (weights only), clips, and applies one Adam update.
// Returns the clipped gradient norm.
template <typename T>
double optimizer_update(std::span<T> params, std::span<T> grad, const std::vector<bool>& weight_mask,
                        const TrainConfig& cfg, AdamState<T>& state);

struct StepResult {
  double loss = 0.0;       // RMSE averaged over the batch
  double grad_norm = 0.0;  // before clipping
};

// Optimizes 0.5 * mean squared error averaged over the batch.
template <typename T>
StepResult train_step(UNetModel<T>& model, std::span<const Sample<T>> batch, const TrainConfig& cfg,
                      AdamState<T>& state);

template <typename T>
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual Sample<T> get(std::size_t index) const = 0;
};

template <typename T>
class VectorSource final : public SampleSource<T> {
 public:
  explicit VectorSource(std::vector<Sample<T>> samples) : samples_(std::move(samples)) {}
  std::size_t size() const override { return samples_.size(); }
  Sample<T> get(std::size_t index) const override { return samples_.at(index); }

 private:
  std::vector<Sample<T>> samples_;
};

struct LossRecord {
  std::int64_t step = 0;
  int epoch = 0;
  double loss = 0.0;
};

struct FitResult {
  std::vector<LossRecord> curve;
};

// Called after every optimizer step.
using StepCallback = std::function<void(const LossRecord&)>;

// Epochs over the data in seeded shuffled order, mini-batches of
// cfg.batch_size. Trains `model` in place.
template <typename T>
FitResult fit(UNetModel<T>& model, const SampleSource<T>& data, const TrainConfig& cfg,
              const StepCallback& on_step = {});

void write_loss_csv(std::ostream& os, std::span<const LossRecord> curve);
void write_loss_csv(const std::filesystem::path& path, std::span<const LossRecord> curve);

}  // namespace bevcast
