// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <vector>

#include "rfo/mixture.hpp"
#include "rfo/mlp.hpp"
#include "rfo/noise.hpp"

namespace {

void BM_GradRfLoss(benchmark::State& state) {
    rfo::NoiseSource rng(1);
    const auto width = static_cast<std::size_t>(state.range(0));
    const auto model = rfo::MlpVelocity::initialized({3, width, width, 2}, rng);
    const auto x0 = rng.normal_batch(512, 2);
    const auto x1 = rfo::sample_target(rfo::mixture_preset("moons"), 512, rng);
    std::vector<double> t(512);
    for (double& x : t) x = rng.uniform();
    for (auto _ : state) {
        benchmark::DoNotOptimize(rfo::grad_rf_loss(model, x0, x1, t));
    }
    state.SetItemsProcessed(state.iterations() * 512);
}
BENCHMARK(BM_GradRfLoss)->Arg(32)->Arg(64);

void BM_MlpForward(benchmark::State& state) {
    rfo::NoiseSource rng(2);
    const auto model = rfo::MlpVelocity::initialized({3, 64, 64, 2}, rng);
    const auto x = rng.normal_batch(static_cast<std::size_t>(state.range(0)), 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(model(x, 0.5));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MlpForward)->Arg(1000)->Arg(10000);

}  // namespace
