#include <benchmark/benchmark.h>

#include <vector>

#include "fitcarl/kernels.hpp"
#include "fitcarl/rng.hpp"

namespace {

using namespace fitcarl;
using namespace fitcarl::kernels;

std::vector<Real> random_values(std::size_t n, std::uint64_t seed) {
  RngStream rng(seed, "bench");
  std::vector<Real> v(n);
  for (auto& x : v) x = rng.normal(0.0, 1.0);
  return v;
}

template <void (*Gemm)(const GemmArgs&)>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_values(n * n, 1), b = random_values(n * n, 2);
  std::vector<Real> c(n * n);
  const GemmArgs g{Trans::No, Trans::No, n, n, n, a.data(), b.data(), c.data(), false};
  for (auto _ : state) {
    Gemm(g);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 2 * n * n * n));
}

template <void (*Contract)(const TuckerArgs&, Real*)>
void BM_Tucker(benchmark::State& state) {
  // Confidence core shape: node x d x node with node = 2d.
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto w = random_values(2 * d * d * 2 * d, 3), v1 = random_values(2 * d, 4), v2 = random_values(d, 5);
  std::vector<Real> out(2 * d);
  const TuckerArgs t{2 * d, d, 2 * d, w.data(), v1.data(), v2.data()};
  for (auto _ : state) {
    Contract(t, out.data());
    benchmark::DoNotOptimize(out.data());
  }
}

BENCHMARK(BM_Gemm<serial::gemm>)->Name("gemm/serial")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_Gemm<parallel::gemm>)->Name("gemm/parallel")->RangeMultiplier(2)->Range(32, 256)->UseRealTime();
BENCHMARK(BM_Tucker<serial::tucker_contract>)->Name("tucker/serial")->Arg(16)->Arg(50)->Arg(100);
BENCHMARK(BM_Tucker<parallel::tucker_contract>)->Name("tucker/parallel")->Arg(16)->Arg(50)->Arg(100)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
