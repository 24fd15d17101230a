#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mobgen/checkpoint.hpp"
#include "mobgen/city.hpp"
#include "mobgen/diffusion.hpp"
#include "mobgen/epr.hpp"
#include "mobgen/model.hpp"
#include "mobgen/noise_prior.hpp"
#include "mobgen/optimizer.hpp"

namespace mobgen {

inline constexpr int kConfigVersion = 1;

struct DataConfig {
    std::size_t n_train = 8000;
    std::size_t n_holdout = 2000;
    std::uint64_t seed = 11;
};

struct DiffusionConfig {
    int K = 500;
    double beta_min = 1e-4;
    double beta_max = 0.02;
    int sample_steps = 100;
    double spacing = 2.0;  // power of the sampling-step grid
};

struct TrainConfig {
    int epochs = 30;
    int batch_size = 256;
    int micro_batch = 16;   // trajectories per network evaluation; gradients are summed in order
    int patience = 5;       // epochs without holdout improvement before stopping; 0 disables
    std::size_t holdout_eval = 512;
    std::string loss_weighting = "none";  // or "edm"
    std::uint64_t seed = 13;
    std::uint64_t init_seed = 17;
};

struct GenerateConfig {
    std::size_t n = 2000;
    std::uint64_t seed = 19;
    Ablation ablation = Ablation::full;
    int inversion_steps = 100;
    double p_floor = 0.05;
    std::size_t chunk = 16;
};

struct RunConfig {
    int version = kConfigVersion;
    std::string name = "desk";
    CityGenConfig city;
    EprParams epr = default_epr_params();
    DataConfig data;
    DiffusionConfig diffusion;
    DenoiserConfig denoiser;
    EdmConfig edm;
    OptimizerConfig optimizer;
    TrainConfig train;
    GenerateConfig generate;

    /// Throws ConfigError naming the first offending field.
    void validate() const;
    VpSchedule schedule() const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Strict reader: unknown keys and wrongly typed values raise ConfigError
/// with the dotted field path. Missing keys keep their defaults.
RunConfig run_config_from_json(const nlohmann::json& j);
std::string config_hash(const RunConfig& cfg);

/// World and datasets derived from a config.
struct World {
    GridCity city;
    FlowMatrix flows;
    TrajectoryDataset train;
    TrajectoryDataset holdout;
};

World build_world(const RunConfig& cfg);

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double holdout_loss = 0.0;
    double lr = 0.0;
    double seconds = 0.0;
};

nlohmann::json to_json(const EpochLog& e);

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochLog> log;
    int best_epoch = 0;
    bool early_stopped = false;
    double initial_holdout_loss = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Minimizes the preconditioned denoising loss with condition dropout. The
/// returned checkpoint holds the parameters of the epoch with the lowest
/// holdout loss; its manifest records the data's moving probability.
TrainResult train(const RunConfig& cfg, const TrajectoryDataset& train_ds, const TrajectoryDataset& holdout_ds,
                  const EpochCallback& on_epoch = {});

/// Holdout loss with a fixed draw of noise levels and noise (seeded by `seed`).
double evaluation_loss(const DenoiserModel& model, const TrajBatch& x0, const BatchCondition& cond,
                       std::uint64_t seed, int micro_batch);

DenoiserModel model_from_checkpoint(const Checkpoint& ck, Precision precision = Precision::f32);

/// Moving probability stored by `train`.
std::vector<double> checkpoint_moving_probability(const Checkpoint& ck);

struct GenerationRequest {
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::vector<Ablation> ablations{Ablation::full};
    int sample_steps = 100;
    int inversion_steps = 100;
    double p_floor = 0.05;
    std::size_t chunk = 16;
    double guidance_scale = -1.0;  // negative keeps the checkpoint's value
};

struct GeneratedSet {
    Ablation ablation;
    TrajectoryDataset data;
    nlohmann::json provenance;
};

/// Runs every requested ablation from one shared set of collaborative
/// sequences; the inversion is computed once when any ablation needs it.
/// Each trajectory is conditioned on the home of its collaborative sequence.
std::vector<GeneratedSet> generate(const Checkpoint& ck, const GridCity& city, const FlowMatrix& flows,
                                   const EprParams& epr, const GenerationRequest& req);

TrajectoryDataset generate(const Checkpoint& ck, const GridCity& city, const FlowMatrix& flows, const EprParams& epr,
                           std::size_t n, Ablation ablation, std::uint64_t seed);

/// Deterministic sampling from an explicit prior under `cond`.
TrajBatch sample_from_prior(const DenoiserModel& model, const VpSchedule& sched, const TrajBatch& z,
                            const BatchCondition& cond, int traj_len, int n_steps, std::size_t chunk);

}  // namespace mobgen
