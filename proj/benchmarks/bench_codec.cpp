#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "bevcast/bev_codec.hpp"
#include "bevcast/extraction.hpp"

using namespace bevcast;

namespace {

std::vector<VehicleState> traffic(const GridSpec& g, int n) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> ux(0.1 * g.x_range_m(), 0.9 * g.x_range_m());
  std::uniform_real_distribution<double> uy(-0.8 * g.y_half_range_m(), 0.8 * g.y_half_range_m());
  std::vector<VehicleState> v;
  for (int i = 0; i < n; ++i) v.push_back({TrackId(i), ux(gen), uy(gen), 0.0});
  return v;
}

GridSpec grid_arg(const benchmark::State& state) {
  return state.range(0) == 0 ? GridSpec::desk() : GridSpec::full();
}

void BM_RenderFrame(benchmark::State& state) {
  const auto g = grid_arg(state);
  const auto opts = RenderOptions::for_shape(VehicleShape::gaussian);
  const auto v = traffic(g, static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(render_frame(v, opts, g));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_RenderFrame)->ArgsProduct({{0, 1}, {4, 16}})->Unit(benchmark::kMicrosecond);

void BM_ExtractPositions(benchmark::State& state) {
  const auto g = grid_arg(state);
  const auto opts = RenderOptions::for_shape(VehicleShape::gaussian);
  const auto frame = render_frame(traffic(g, static_cast<int>(state.range(1))), opts, g);
  const auto params = ExtractionParams::for_render(opts, g);
  for (auto _ : state) benchmark::DoNotOptimize(extract_positions(frame, params));
}
BENCHMARK(BM_ExtractPositions)->ArgsProduct({{0, 1}, {4, 16}})->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
