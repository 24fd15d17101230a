#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mobgen/diffusion.hpp"
#include "mobgen/epr.hpp"
#include "mobgen/types.hpp"

namespace mobgen {

/// Fraction of trajectories that change cell between slot t and t+1; the last
/// slot has no successor and is 0.
std::vector<double> moving_probability(const TrajectoryDataset& ds);

/// Per-slot target deviation max(p_t, floor) / mean_s max(p_s, floor).
std::vector<double> rhythm_scale(std::span<const double> profile, double p_floor = 0.05);

/// Condition on each trajectory's first cell (its home).
BatchCondition start_conditions(const std::vector<Trajectory>& trajs, int grid_side, const DataAffine& affine);

/// Deterministic inversion of trajectories to their latent noise, evaluated
/// in slices of `chunk` trajectories.
TrajBatch invert_transitions_to_noise(const EpsModel& model, const std::vector<Trajectory>& x_f, int grid_side,
                                      const DataAffine& affine, const VpSchedule& sched, int n_steps,
                                      std::size_t chunk = 16);

/// z_f + z_iid with a fresh standard Gaussian drawn from `rng` in column order.
TrajBatch fuse_noise(const TrajBatch& z_f, Rng& rng);

TrajBatch standard_gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng);

/// Per slot and channel: subtract the batch mean, divide by the batch
/// (population) standard deviation and multiply by the rhythm scale.
TrajBatch rhythmic_batchnorm(const TrajBatch& z_raw, int traj_len, std::span<const double> profile,
                             double p_floor = 0.05);

enum class Ablation { full, no_prior, no_fusion };

std::string to_string(Ablation a);
Ablation ablation_from_string(const std::string& s);

/// Sampled collaborative sequences and their inverted noise; shared by all
/// ablations of one generation run.
struct PriorSources {
    std::vector<Trajectory> x_f;
    TrajBatch z_f;  // empty when inversion was skipped
    std::uint64_t seed = 0;
};

struct NoisePrior {
    TrajBatch z;  // 2 x (B*T)
    int traj_len = kSlotsPerDay;
    Ablation ablation = Ablation::full;
    nlohmann::json provenance = nlohmann::json::object();

    std::size_t batch() const { return static_cast<std::size_t>(z.cols() / traj_len); }
};

struct NoisePriorSettings {
    int n_steps = 100;         // inversion steps
    double p_floor = 0.05;
    std::size_t chunk = 16;    // trajectories per network evaluation
};

/// Collaborative sequences x_f (stream 1 of `seed`) and, when `invert`, their
/// inversion z_f.
PriorSources sample_prior_sources(const GridCity& city, const FlowSampler& flows, const EprParams& epr,
                                  std::span<const double> move_profile, const EpsModel* model,
                                  const VpSchedule& sched, const DataAffine& affine, std::size_t batch,
                                  std::uint64_t seed, bool invert, const NoisePriorSettings& settings = {});

/// Assembles the prior for one ablation. The i.i.d. noise comes from stream 2
/// of the sources' seed, so `full` and `no_prior` share it.
NoisePrior assemble_noise_prior(const PriorSources& src, Ablation ablation, std::span<const double> rhythm_profile,
                                int traj_len, const NoisePriorSettings& settings = {});

/// sample_prior_sources followed by assemble_noise_prior.
NoisePrior build_noise_prior(const GridCity& city, const FlowMatrix& flows, const EprParams& epr,
                             std::span<const double> move_profile, std::span<const double> rhythm_profile,
                             const EpsModel& model, const VpSchedule& sched, const DataAffine& affine,
                             std::size_t batch, std::uint64_t seed, Ablation ablation,
                             const NoisePriorSettings& settings = {});

/// Binary dump: magic "MOBGENNP", u32 version, u64 batch, u64 traj_len, then
/// little-endian float64 values in column order; provenance goes to the sidecar.
void write_noise_prior(const std::filesystem::path& path, const NoisePrior& prior);
NoisePrior read_noise_prior(const std::filesystem::path& path);

std::string profile_hash(std::span<const double> profile);

}  // namespace mobgen
