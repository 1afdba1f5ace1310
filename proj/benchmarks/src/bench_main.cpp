#include <benchmark/benchmark.h>

#include "taskforge/tensor.hpp"

static void BM_Zeros(benchmark::State& state) {
  for (auto _ : state)
    benchmark::DoNotOptimize(taskforge::Tensor::zeros(64, 64));
}
BENCHMARK(BM_Zeros);

BENCHMARK_MAIN();
