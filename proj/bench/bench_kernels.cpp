#include <benchmark/benchmark.h>

#include "badit/kernels.hpp"
#include "badit/random.hpp"

using namespace badit;

namespace {

template <auto Gemm>
void bm_gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const DenseMatrix a = gaussian_matrix(n, n, rng), b = gaussian_matrix(n, n, rng);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    Gemm(a.data(), b.data(), c, n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

template <auto Dot>
void bm_dot(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const DenseMatrix x = gaussian_matrix(1, n, rng), y = gaussian_matrix(1, n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(Dot(x.data(), y.data()));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

}  // namespace

BENCHMARK(bm_gemm<kernels::serial::gemm>)->Name("gemm/serial")->RangeMultiplier(2)->Range(64, 512);
BENCHMARK(bm_gemm<kernels::parallel::gemm>)->Name("gemm/parallel")->RangeMultiplier(2)->Range(64, 512)->UseRealTime();
BENCHMARK(bm_gemm<kernels::serial::gemm_nt>)->Name("gemm_nt/serial")->Arg(256);
BENCHMARK(bm_gemm<kernels::parallel::gemm_nt>)->Name("gemm_nt/parallel")->Arg(256)->UseRealTime();
BENCHMARK(bm_dot<kernels::serial::dot>)->Name("dot/serial")->Range(1 << 12, 1 << 22);
BENCHMARK(bm_dot<kernels::parallel::dot>)->Name("dot/parallel")->Range(1 << 12, 1 << 22)->UseRealTime();

BENCHMARK_MAIN();
