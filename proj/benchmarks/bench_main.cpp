// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "mvsde/control.hpp"
#include "mvsde/measure.hpp"
#include "mvsde/model.hpp"
#include "mvsde/rng.hpp"
#include "mvsde/sde.hpp"

namespace {

using namespace mvsde;

EmpiricalMeasure cloud(std::uint64_t seed, std::size_t n, std::size_t d) {
    rng::Stream s(seed);
    std::vector<double> flat(n * d);
    for (double& v : flat) v = s.normal();
    return EmpiricalMeasure::uniform(std::move(flat), d);
}

void BM_WassersteinAssignment(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto mu = cloud(1, n, 2);
    const auto nu = cloud(2, n, 2);
    for (auto _ : state) benchmark::DoNotOptimize(wasserstein_assignment(2.0, mu, nu));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_WassersteinAssignment)->RangeMultiplier(2)->Range(16, 512)->Complexity();

void BM_Wasserstein1d(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto mu = cloud(1, n, 1);
    const auto nu = cloud(2, n, 1);
    for (auto _ : state) benchmark::DoNotOptimize(wasserstein_1d(2.0, mu, nu));
}
BENCHMARK(BM_Wasserstein1d)->RangeMultiplier(4)->Range(256, 65536);

void BM_EulerParticles(benchmark::State& state) {
    const auto M = static_cast<std::size_t>(state.range(0));
    const TimeGrid g(1.0, 100);
    const std::vector<double> x0{1.0};
    const auto model = make_mean_field_ou(1.0, 0.3);
    const auto noise = generate_noise(3, M, g, 1);
    for (auto _ : state) benchmark::DoNotOptimize(euler_particles(model, x0, g, noise));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0) * 100);
}
BENCHMARK(BM_EulerParticles)->RangeMultiplier(4)->Range(256, 16384)->Unit(benchmark::kMillisecond);

void BM_GenerateNoise(benchmark::State& state) {
    const TimeGrid g(1.0, 100);
    const auto M = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(generate_noise(5, M, g, 1));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0) * 100);
}
BENCHMARK(BM_GenerateNoise)->RangeMultiplier(4)->Range(256, 16384);

void BM_SimulateRelaxed(benchmark::State& state) {
    const auto ex = make_bang_bang_example();
    const auto& r = ex.relaxed_family.front();
    for (auto _ : state) {
        benchmark::DoNotOptimize(simulate_relaxed(ex.model, ex.actions, r, ex.x0, ex.grid, 7, 4096));
    }
}
BENCHMARK(BM_SimulateRelaxed)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
