#include <benchmark/benchmark.h>

#include "mobgen/model.hpp"
#include "mobgen/rng.hpp"

namespace {

using namespace mobgen;

DenoiserConfig config_for(int hidden) {
    DenoiserConfig c;
    c.hidden_dim = hidden;
    return c;
}

struct Batch {
    TrajBatch x0, noise;
    Eigen::VectorXd sigma;
    BatchCondition cond;
};

Batch make_batch(int n, int T) {
    Rng rng(1);
    Batch b;
    b.x0.resize(2, n * T);
    b.noise.resize(2, n * T);
    for (auto& v : b.x0.reshaped()) v = 0.1 * standard_normal(rng);
    for (auto& v : b.noise.reshaped()) v = standard_normal(rng);
    b.sigma = sample_edm_sigmas(static_cast<std::size_t>(n), rng);
    b.cond.start.assign(static_cast<std::size_t>(n), Coord{0.05, -0.02});
    b.cond.is_null.assign(static_cast<std::size_t>(n), 0);
    return b;
}

void BM_TrainStep(benchmark::State& state) {
    const auto cfg = config_for(static_cast<int>(state.range(0)));
    ParamStore p = init_params(cfg, 1);
    randomize_params(p, 2, 0.5);
    p.round_to_float();
    const DenoiserModel model(cfg, p);
    const Batch b = make_batch(static_cast<int>(state.range(1)), cfg.traj_len);
    std::vector<double> grad;
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.loss(b.x0, b.cond, b.sigma, b.noise, &grad));
    }
    state.SetItemsProcessed(state.iterations() * state.range(1));
    state.counters["params"] = static_cast<double>(p.count());
}
BENCHMARK(BM_TrainStep)->Args({32, 8})->Args({32, 16})->Args({32, 32})->Args({64, 256})->Unit(benchmark::kMillisecond);

void BM_GuidedDenoise(benchmark::State& state) {
    const auto cfg = config_for(static_cast<int>(state.range(0)));
    ParamStore p = init_params(cfg, 1);
    randomize_params(p, 2, 0.5);
    p.round_to_float();
    const DenoiserModel model(cfg, p);
    const Batch b = make_batch(static_cast<int>(state.range(1)), cfg.traj_len);
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.denoise(b.x0, b.sigma, b.cond));
    }
    state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_GuidedDenoise)->Args({32, 4})->Args({32, 8})->Args({32, 16})->Args({32, 32})->Args({64, 256})->Unit(benchmark::kMillisecond);

}  // namespace
