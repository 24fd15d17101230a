#include <benchmark/benchmark.h>

#include "mobgen/metrics.hpp"
#include "mobgen/privacy.hpp"
#include "mobgen/rng.hpp"

namespace {

using namespace mobgen;

TrajectoryDataset random_dataset(std::size_t n, int grid_side, std::uint64_t seed, SplitTag split) {
    Rng rng(seed);
    const auto cells = static_cast<std::uint64_t>(grid_side) * static_cast<std::uint64_t>(grid_side);
    std::vector<Trajectory> out;
    for (std::size_t i = 0; i < n; ++i) {
        Trajectory t;
        const auto home = static_cast<std::uint32_t>(rng() % cells);
        for (int s = 0; s < kSlotsPerDay; ++s) {
            t.locs.push_back(LocId{uniform01(rng) < 0.8 ? home : static_cast<std::uint32_t>(rng() % cells)});
        }
        out.push_back(std::move(t));
    }
    return TrajectoryDataset(grid_side, 1.0, kSlotsPerDay, split, std::move(out));
}

void BM_KsStatistic(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    std::vector<double> a(n), b(n);
    for (auto& v : a) v = standard_normal(rng);
    for (auto& v : b) v = standard_normal(rng) + 0.1;
    for (auto _ : state) benchmark::DoNotOptimize(ks_statistic(a, b));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KsStatistic)->RangeMultiplier(4)->Range(1 << 10, 1 << 16)->Complexity();

void BM_EvaluateAll(benchmark::State& state) {
    const auto real = random_dataset(static_cast<std::size_t>(state.range(0)), 16, 1, SplitTag::holdout);
    const auto gen = random_dataset(static_cast<std::size_t>(state.range(0)), 16, 2, SplitTag::generated);
    for (auto _ : state) benchmark::DoNotOptimize(evaluate_all(real, gen));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EvaluateAll)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_UniquenessTop1(benchmark::State& state) {
    const auto real = random_dataset(static_cast<std::size_t>(state.range(0)), 16, 3, SplitTag::train);
    const auto gen = random_dataset(256, 16, 4, SplitTag::generated);
    for (auto _ : state) benchmark::DoNotOptimize(uniqueness_ecdf(gen, real, {1}));
    state.SetItemsProcessed(state.iterations() * 256 * state.range(0));
}
BENCHMARK(BM_UniquenessTop1)->Arg(1000)->Arg(8000)->Unit(benchmark::kMillisecond);

void BM_MiaFeatures(benchmark::State& state) {
    const auto gen = random_dataset(static_cast<std::size_t>(state.range(0)), 16, 5, SplitTag::generated);
    const auto cand = random_dataset(64, 16, 6, SplitTag::train);
    for (auto _ : state) {
        for (const auto& t : cand.trajectories()) benchmark::DoNotOptimize(mia_features(t, gen, 5));
    }
    state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_MiaFeatures)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace
