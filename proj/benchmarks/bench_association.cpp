#include <random>

#include <benchmark/benchmark.h>

#include "bevcast/association.hpp"

using namespace bevcast;

namespace {

void BM_SolveAssignment(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  CostMatrix cost(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) cost(r, c) = u(gen);
  }
  for (auto _ : state) benchmark::DoNotOptimize(solve_assignment(cost));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SolveAssignment)->RangeMultiplier(2)->Range(4, 256)->Complexity(benchmark::oNCubed);

}  // namespace

BENCHMARK_MAIN();
