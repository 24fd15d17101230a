#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mobgen/diffusion.hpp"
#include "mobgen/types.hpp"

namespace mobgen {

struct RegressionResult {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t n_points = 0;
};

nlohmann::json to_json(const RegressionResult& r);

/// Ordinary least squares of y on x. Throws with fewer than 3 points or a
/// constant x.
RegressionResult least_squares(std::span<const double> x, std::span<const double> y);

/// Pearson correlation; empty when either side is constant.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

/// The representative of `angle` modulo 2 pi lying within pi of `reference`.
double unwrap_near(double angle, double reference);

/// One move of a real trajectory paired with the displacement between the
/// same two slots of its inverted noise.
struct MovePair {
    std::size_t traj = 0;
    int slot = 0;  // the move goes from slot-1 to slot
    double real_angle = 0.0;
    double noise_angle = 0.0;  // unwrapped towards real_angle
    double real_distance = 0.0;
    double noise_distance = 0.0;
};

/// Pairs every move of `ds` with the matching noise displacement in `z`
/// (a 2 x (B*T) batch aligned with the dataset).
std::vector<MovePair> pair_moves(const TrajectoryDataset& ds, const TrajBatch& z);

RegressionResult direction_regression(std::span<const MovePair> moves);
RegressionResult distance_regression(std::span<const MovePair> moves);

/// Inverts `ds` (conditioned on each trajectory's home) to its latent noise.
TrajBatch invert_dataset(const EpsModel& model, const TrajectoryDataset& ds, const VpSchedule& sched, int n_steps,
                         std::size_t chunk = 16);

RegressionResult direction_regression(const EpsModel& model, const TrajectoryDataset& ds, const VpSchedule& sched,
                                      int n_steps = 100);
RegressionResult distance_regression(const EpsModel& model, const TrajectoryDataset& ds, const VpSchedule& sched,
                                     int n_steps = 100);

struct VarianceRhythm {
    std::vector<double> variance;         // per slot, averaged over channels
    std::vector<double> move_probability; // of the dataset
    std::optional<double> correlation;
};

VarianceRhythm variance_rhythm(const TrajBatch& z, int traj_len, std::span<const double> move_probability);
VarianceRhythm variance_rhythm(const EpsModel& model, const TrajectoryDataset& ds, const VpSchedule& sched,
                               int n_steps = 100);

nlohmann::json to_json(const VarianceRhythm& v);

/// Everything above from a single inversion.
struct NoiseAnalysis {
    std::vector<MovePair> moves;
    RegressionResult direction;
    RegressionResult distance;
    RegressionResult direction_shuffled;  // same pipeline with moves paired at random
    VarianceRhythm rhythm;
    TrajBatch z;
};

NoiseAnalysis analyze_noise(const EpsModel& model, const TrajectoryDataset& ds, const VpSchedule& sched,
                            int n_steps = 100, std::size_t chunk = 16, std::uint64_t shuffle_seed = 0);

nlohmann::json to_json(const NoiseAnalysis& a);

std::string move_scatter_csv(std::span<const MovePair> moves);

/// CSV with one row per trajectory: index, home cell, whether it moves, then
/// the 2T noise values (x then y per slot).
void export_noise_vectors(const std::filesystem::path& path, const TrajBatch& z, const TrajectoryDataset& ds);
TrajBatch read_noise_vectors(const std::filesystem::path& path, int traj_len);

}  // namespace mobgen
