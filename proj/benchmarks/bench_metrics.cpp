// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "rfo/metrics.hpp"
#include "rfo/noise.hpp"

namespace {

void BM_EnergyDistance(benchmark::State& state) {
    rfo::NoiseSource rng(1);
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = rng.normal_batch(n, 2);
    const auto b = rng.normal_batch(n, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(rfo::energy_distance(a, b));
    }
}
BENCHMARK(BM_EnergyDistance)->Arg(500)->Arg(2000);

void BM_EnergyTest(benchmark::State& state) {
    rfo::NoiseSource rng(2);
    const auto a = rng.normal_batch(500, 2);
    const auto b = rng.normal_batch(500, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(rfo::energy_test(a, b, static_cast<std::size_t>(state.range(0)), 0.01, rng));
    }
}
BENCHMARK(BM_EnergyTest)->Arg(99)->Arg(199);

void BM_SlicedWasserstein(benchmark::State& state) {
    rfo::NoiseSource rng(3);
    const auto a = rng.normal_batch(5000, 2);
    const auto b = rng.normal_batch(5000, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(rfo::sliced_wasserstein(a, b, 64, rng));
    }
}
BENCHMARK(BM_SlicedWasserstein);

}  // namespace
