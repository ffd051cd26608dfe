#include <benchmark/benchmark.h>

#include "bevcast/trainer.hpp"
#include "bevcast/unet.hpp"

using namespace bevcast;

namespace {

Tensor<float> ramp(int channels, int rows, int cols) {
  Tensor<float> t(channels, rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t.data[i] = static_cast<float>(i % 97) / 97.0f;
  return t;
}

// Args: rows, cols, depth.
void BM_Forward(benchmark::State& state) {
  UNetConfig cfg;
  cfg.depth_levels = static_cast<int>(state.range(2));
  const auto model = UNetModel<float>::build(cfg, 0);
  const auto x = ramp(cfg.in_channels, static_cast<int>(state.range(0)),
                      static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(x));
}
BENCHMARK(BM_Forward)
    ->Args({64, 64, 4})
    ->Args({128, 64, 4})
    ->Args({128, 64, 6})
    ->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  UNetConfig cfg;
  cfg.depth_levels = static_cast<int>(state.range(2));
  auto model = UNetModel<float>::build(cfg, 0);
  const int rows = static_cast<int>(state.range(0));
  const int cols = static_cast<int>(state.range(1));
  const Sample<float> batch[] = {{ramp(cfg.in_channels, rows, cols),
                                  ramp(cfg.out_channels, rows, cols)}};
  const TrainConfig tc;
  AdamState<float> adam(model.parameter_count());
  for (auto _ : state) benchmark::DoNotOptimize(train_step<float>(model, batch, tc, adam));
}
BENCHMARK(BM_TrainStep)->Args({64, 64, 4})->Args({128, 64, 4})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
