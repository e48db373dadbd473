#include <vector>

#include <benchmark/benchmark.h>

#include "con2da/kernels.hpp"
#include "con2da/rng.hpp"

namespace {

using namespace con2da;

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

// Shapes follow the default model: a 56-row batch through 768 -> 512 -> 512 -> 256.
template <auto Kernel>
void BM_Matmul(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const auto a = random_values(m * k, 1);
  const auto b = random_values(k * n, 2);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    Kernel(a, b, c, m, k, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m * k * n));
}

template <auto Kernel>
void BM_Adam(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto param = random_values(n, 3);
  const auto grad = random_values(n, 4);
  std::vector<double> m1(n, 0.0), m2(n, 0.0);
  const kernels::AdamCoefficients coeff{8e-5, 0.9, 0.999, 1e-8, 0.1, 0.001};
  for (auto _ : state) {
    Kernel(param, grad, m1, m2, coeff);
    benchmark::DoNotOptimize(param.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

void matmul_args(benchmark::internal::Benchmark* b) {
  b->Args({56, 768, 512})->Args({56, 512, 512})->Args({56, 512, 256})->Args({256, 256, 256});
}

BENCHMARK(BM_Matmul<kernels::serial::matmul>)->Apply(matmul_args);
BENCHMARK(BM_Matmul<kernels::parallel::matmul>)->Apply(matmul_args);
BENCHMARK(BM_Matmul<kernels::serial::matmul_tn>)->Apply(matmul_args);
BENCHMARK(BM_Matmul<kernels::parallel::matmul_tn>)->Apply(matmul_args);
BENCHMARK(BM_Matmul<kernels::serial::matmul_nt>)->Apply(matmul_args);
BENCHMARK(BM_Matmul<kernels::parallel::matmul_nt>)->Apply(matmul_args);
BENCHMARK(BM_Adam<kernels::serial::adam_update>)->Arg(1 << 20);
BENCHMARK(BM_Adam<kernels::parallel::adam_update>)->Arg(1 << 20);

}  // namespace

BENCHMARK_MAIN();
