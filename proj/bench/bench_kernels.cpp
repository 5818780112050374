#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "vega/kernels.hpp"

using namespace vega::kernels;

namespace {

std::vector<float> random_vec(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(-1, 1);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

template <void (*Gemm)(std::size_t, std::size_t, std::size_t, const float*, const float*, float*, bool)>
void BM_gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto a = random_vec(n * n, 1), b = random_vec(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    Gemm(n, n, n, a.data(), b.data(), c.data(), false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

template <void (*Axpy)(std::size_t, float, const float*, float*)>
void BM_axpy(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto x = random_vec(n, 1), y = random_vec(n, 2);
  for (auto _ : state) {
    Axpy(n, 1e-3f, x.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(n * 3 * sizeof(float)));
}

}  // namespace

BENCHMARK(BM_gemm<gemm_nn_serial<float>>)->Arg(64)->Arg(256)->Arg(512)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_gemm<gemm_nn_parallel<float>>)->Arg(64)->Arg(256)->Arg(512)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_gemm<gemm_tn_serial<float>>)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_gemm<gemm_tn_parallel<float>>)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_axpy<axpy_serial<float>>)->Arg(1 << 16)->Arg(1 << 22);
BENCHMARK(BM_axpy<axpy_parallel<float>>)->Arg(1 << 16)->Arg(1 << 22);

BENCHMARK_MAIN();
