// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "rfo/attention.hpp"
#include "rfo/mixture.hpp"
#include "rfo/noise.hpp"
#include "rfo/samplers.hpp"

namespace {

void BM_EulerSample(benchmark::State& state) {
    const rfo::MixtureVelocity v(rfo::mixture_preset("moons"));
    const auto z0 = rfo::NoiseSource(1).normal_batch(static_cast<std::size_t>(state.range(0)), 2);
    const auto grid = rfo::TimeGrid::uniform(20);
    rfo::SampleOptions opts;
    opts.keep_every = 20;
    for (auto _ : state) {
        benchmark::DoNotOptimize(rfo::euler_sample(v, grid, z0, opts));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * 20);
}
BENCHMARK(BM_EulerSample)->Arg(1000)->Arg(10000);

void BM_OvershootSample(benchmark::State& state) {
    const rfo::MixtureVelocity v(rfo::mixture_preset("moons"));
    const auto z0 = rfo::NoiseSource(1).normal_batch(static_cast<std::size_t>(state.range(0)), 2);
    const auto grid = rfo::TimeGrid::uniform(20);
    rfo::OvershootConfig cfg;
    cfg.c = 1.0;
    rfo::SampleOptions opts;
    opts.keep_every = 20;
    rfo::NoiseSource rng(2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(rfo::overshoot_sample(v, grid, z0, cfg, rng, opts));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * 20);
}
BENCHMARK(BM_OvershootSample)->Arg(1000)->Arg(10000);

void BM_AmoStep(benchmark::State& state) {
    const std::size_t side = static_cast<std::size_t>(state.range(0));
    const rfo::ProductMixture target(rfo::mixture_preset("bimodal-1d"), side * side);
    const rfo::ProductVelocity v(target);
    rfo::NoiseSource rng(3);
    const auto mask = rfo::build_mask(rfo::synthetic_attention("focused-block", side, side, 8, rng));
    const auto z = rng.normal_batch(256, side * side);
    rfo::OvershootConfig cfg;
    cfg.c = 2.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(rfo::amo_step(v, z, 0.4, 0.45, cfg, mask, rng));
    }
}
BENCHMARK(BM_AmoStep)->Arg(8)->Arg(16);

void BM_NormalBatch(benchmark::State& state) {
    rfo::NoiseSource rng(4);
    rfo::StateBatch out(static_cast<std::size_t>(state.range(0)), 2);
    for (auto _ : state) {
        rng.fill_normal(out);
        benchmark::DoNotOptimize(out.values().data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * 2);
}
BENCHMARK(BM_NormalBatch)->Arg(10000);

}  // namespace
