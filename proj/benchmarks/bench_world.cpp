#include <benchmark/benchmark.h>

#include "mobgen/city.hpp"
#include "mobgen/diffusion.hpp"
#include "mobgen/epr.hpp"
#include "mobgen/noise_prior.hpp"
#include "mobgen/rng.hpp"

namespace {

using namespace mobgen;

void BM_TransitionSequences(benchmark::State& state) {
    CityGenConfig cfg;
    cfg.grid_side = static_cast<int>(state.range(0));
    const auto city = generate_city(cfg);
    const auto flows = ground_truth_flows(city, cfg.gravity_exponent);
    const FlowSampler sampler(flows, city);
    const auto epr = default_epr_params();
    const auto profile = default_move_profile();
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(sample_transition_sequences(city, sampler, epr, profile, 1000, ++seed));
    }
    state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_TransitionSequences)->Arg(8)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_RhythmicBatchNorm(benchmark::State& state) {
    const auto B = state.range(0);
    Rng rng(1);
    TrajBatch raw(2, B * kSlotsPerDay);
    for (auto& v : raw.reshaped()) v = standard_normal(rng);
    const auto profile = default_move_profile();
    for (auto _ : state) benchmark::DoNotOptimize(rhythmic_batchnorm(raw, kSlotsPerDay, profile));
    state.SetItemsProcessed(state.iterations() * B);
}
BENCHMARK(BM_RhythmicBatchNorm)->Arg(256)->Arg(2000);

void BM_ForwardDiffuse(benchmark::State& state) {
    const auto sched = make_vp_schedule(500, 1e-4, 0.02);
    const auto B = state.range(0);
    Rng rng(2);
    TrajBatch x0(2, B * kSlotsPerDay), z(2, B * kSlotsPerDay);
    for (auto& v : x0.reshaped()) v = 0.1 * standard_normal(rng);
    for (auto& v : z.reshaped()) v = standard_normal(rng);
    for (auto _ : state) benchmark::DoNotOptimize(forward_diffuse(x0, 250, z, sched));
    state.SetItemsProcessed(state.iterations() * B);
}
BENCHMARK(BM_ForwardDiffuse)->Arg(256)->Arg(2000);

}  // namespace
