#include "bevcast/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>

#include "bevcast/random.hpp"
#include "flush_denormals.hpp"

namespace bevcast {

TrainConfig TrainConfig::reference() {
  TrainConfig c;
  c.lr = 1e-6;
  c.epochs = 1;
  c.batch_size = 1;
  return c;
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !(l2 >= 0.0)) {
    throw std::invalid_argument("train: learning rate and L2 factor must be non-negative");
  }
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("train: Adam decay rates must lie in (0, 1)");
  }
  if (!(eps_adam > 0.0) || !(grad_clip > 0.0)) {
    throw std::invalid_argument("train: epsilon and gradient threshold must be positive");
  }
  if (epochs < 1 || batch_size < 1) {
    throw std::invalid_argument("train: epochs and batch size must be at least 1");
  }
}

std::string to_string(ClipMode mode) {
  return mode == ClipMode::global_norm ? "global_norm" : "per_element";
}

ClipMode parse_clip_mode(const std::string& text) {
  if (text == "global_norm") return ClipMode::global_norm;
  if (text == "per_element") return ClipMode::per_element;
  throw std::invalid_argument("unknown clip mode '" + text + "'");
}

template <typename T>
double rmse(const Tensor<T>& pred, const Tensor<T>& target) {
  if (!pred.same_shape(target)) throw std::invalid_argument("loss: shape mismatch");
  if (pred.data.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double r = static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i]);
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(pred.data.size()));
}

template <typename T>
double clip_gradient(std::span<T> grad, double threshold, ClipMode mode) {
  double sq = 0.0;
  for (const T g : grad) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (mode == ClipMode::global_norm) {
    if (norm > threshold) {
      const double scale = threshold / norm;
      for (T& g : grad) g = static_cast<T>(static_cast<double>(g) * scale);
    }
  } else {
    const T hi = static_cast<T>(threshold);
    for (T& g : grad) g = std::clamp(g, -hi, hi);
  }
  return norm;
}

template <typename T>
double optimizer_update(std::span<T> params, std::span<T> grad, const std::vector<bool>& weight_mask,
                        const TrainConfig& cfg, AdamState<T>& state) {
  if (grad.size() != params.size() || state.m.size() != params.size() ||
      weight_mask.size() != params.size()) {
    throw std::invalid_argument("optimizer: state does not match the parameter count");
  }
  const detail::FlushDenormals ftz;
  if (cfg.l2 > 0.0) {
    const T l2 = static_cast<T>(cfg.l2);
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (weight_mask[i]) grad[i] += l2 * params[i];
    }
  }
  for (const T g : grad) {
    if (!std::isfinite(static_cast<double>(g))) {
      throw TrainingDiverged("non-finite gradient; aborting the step");
    }
  }
  const double norm = clip_gradient(grad, cfg.grad_clip, cfg.clip_mode);

  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T step = static_cast<T>(cfg.lr / bc1);
  const T inv_bc2 = static_cast<T>(1.0 / bc2);
  const T eps = static_cast<T>(cfg.eps_adam);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = b1 * state.m[i] + (T(1) - b1) * grad[i];
    state.v[i] = b2 * state.v[i] + (T(1) - b2) * grad[i] * grad[i];
    params[i] -= step * state.m[i] / (std::sqrt(state.v[i] * inv_bc2) + eps);
  }
  return norm;
}

template <typename T>
StepResult train_step(UNetModel<T>& model, std::span<const Sample<T>> batch, const TrainConfig& cfg,
                      AdamState<T>& state) {
  if (batch.empty()) throw std::invalid_argument("train: empty batch");
  std::vector<T> grad(model.parameter_count(), T(0));
  double loss_sum = 0.0;
  const T batch_scale = T(1) / static_cast<T>(batch.size());
  for (const auto& sample : batch) {
    const Tensor<T>& target = sample.target;
    auto d_output = [&](const Tensor<T>& out) {
      if (!out.same_shape(target)) throw std::invalid_argument("train: target shape mismatch");
      Tensor<T> d(out.channels, out.rows, out.cols);
      const T scale = batch_scale / static_cast<T>(out.data.size());
      for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] = (out.data[i] - target.data[i]) * scale;
      return d;
    };
    const Tensor<T> out = model.forward_backward(sample.input, d_output, grad);
    const double loss = rmse(out, target);
    if (!std::isfinite(loss)) throw TrainingDiverged("non-finite loss; aborting the step");
    loss_sum += loss;
  }
  StepResult result;
  result.loss = loss_sum / static_cast<double>(batch.size());
  result.grad_norm = optimizer_update<T>(model.parameters(), grad, model.weight_mask(), cfg, state);
  return result;
}

template <typename T>
FitResult fit(UNetModel<T>& model, const SampleSource<T>& data, const TrainConfig& cfg,
              const StepCallback& on_step) {
  cfg.validate();
  if (data.size() == 0) throw std::invalid_argument("fit: empty dataset");
  AdamState<T> state(model.parameter_count());
  Rng rng(cfg.seed);
  FitResult result;
  std::vector<std::size_t> order(data.size());
  std::int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<Sample<T>> batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) batch.push_back(data.get(order[i]));
      const StepResult r = train_step<T>(model, batch, cfg, state);
      LossRecord rec{step++, epoch, r.loss};
      result.curve.push_back(rec);
      if (on_step) on_step(rec);
    }
  }
  return result;
}

void write_loss_csv(std::ostream& os, std::span<const LossRecord> curve) {
  os << "step,epoch,loss\n";
  char buf[64];
  for (const auto& r : curve) {
    std::snprintf(buf, sizeof(buf), "%.9g", r.loss);
    os << r.step << ',' << r.epoch << ',' << buf << '\n';
  }
}

void write_loss_csv(const std::filesystem::path& path, std::span<const LossRecord> curve) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_loss_csv(os, curve);
}

template double rmse<float>(const Tensor<float>&, const Tensor<float>&);
template double rmse<double>(const Tensor<double>&, const Tensor<double>&);
template double clip_gradient<float>(std::span<float>, double, ClipMode);
template double clip_gradient<double>(std::span<double>, double, ClipMode);
template double optimizer_update<float>(std::span<float>, std::span<float>, const std::vector<bool>&,
                                        const TrainConfig&, AdamState<float>&);
template double optimizer_update<double>(std::span<double>, std::span<double>, const std::vector<bool>&,
                                         const TrainConfig&, AdamState<double>&);
template StepResult train_step<float>(UNetModel<float>&, std::span<const Sample<float>>,
                                      const TrainConfig&, AdamState<float>&);
template StepResult train_step<double>(UNetModel<double>&, std::span<const Sample<double>>,
                                       const TrainConfig&, AdamState<double>&);
template FitResult fit<float>(UNetModel<float>&, const SampleSource<float>&, const TrainConfig&,
                              const StepCallback&);
template FitResult fit<double>(UNetModel<double>&, const SampleSource<double>&, const TrainConfig&,
                               const StepCallback&);

}  // namespace bevcast
