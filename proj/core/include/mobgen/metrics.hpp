#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mobgen/types.hpp"

namespace mobgen {

/// Radius of gyration about the center of mass of the given points.
double radius_of_gyration(std::span<const Coord> points);
double radius_of_gyration(const Trajectory& traj, int grid_side);

/// Lattice distance of every move (consecutive slots in different cells).
std::vector<double> travel_distances(const Trajectory& traj, int grid_side);

/// Run lengths, in slots, of maximal constant-cell segments; empty for a
/// trajectory that never moves.
std::vector<int> durations(const Trajectory& traj);

/// Number of distinct cells visited.
int dailyloc(const Trajectory& traj);

/// Exact two-sample Kolmogorov-Smirnov distance sup_x |F_a(x) - F_b(x)|.
double ks_statistic(std::span<const double> a, std::span<const double> b);

/// Common part of commuters 2 * sum min(fx, fy) / (sum fx + sum fy).
double cpc(const FlowMatrix& fx, const FlowMatrix& fy);

/// Each row divided by its sum; rows without departures stay zero.
FlowMatrix transition_matrix(const FlowMatrix& f);

/// Flows scaled to sum to one.
FlowMatrix unit_total(const FlowMatrix& f);

enum class MapeAveraging { per_row, global };

/// Mean relative error of fy against fx over entries with fx >= threshold.
/// Inputs are used as given (callers pass transition probabilities).
double mape(const FlowMatrix& fx, const FlowMatrix& fy, double threshold = 0.01,
            MapeAveraging averaging = MapeAveraging::per_row);

/// Fraction of generated trajectories identical to some real trajectory.
double diversity(const TrajectoryDataset& gen, const TrajectoryDataset& real);

/// Per-trajectory statistic samples of one dataset. Distances are in km;
/// never-moving trajectories contribute only to the radius sample.
struct TrajectoryStats {
    std::vector<double> radius;
    std::vector<double> distance;
    std::vector<double> duration;
    std::vector<double> dailyloc;
};

TrajectoryStats trajectory_stats(const TrajectoryDataset& ds);

struct MetricReport {
    double ks_radius = 0.0;
    double ks_distance = 0.0;
    double ks_duration = 0.0;
    double ks_dailyloc = 0.0;
    double cpc = 0.0;
    double mape = 0.0;
    double diversity = 0.0;
    std::size_t n_real = 0;
    std::size_t n_gen = 0;
    std::size_t n_real_moving = 0;
    std::size_t n_gen_moving = 0;
    std::size_t n_real_moves = 0;
    std::size_t n_gen_moves = 0;
};

nlohmann::json to_json(const MetricReport& r);
MetricReport metric_report_from_json(const nlohmann::json& j);

/// KS distances of the four trajectory statistics, CPC of unit-total flows,
/// MAPE of transition probabilities and diversity.
MetricReport evaluate_all(const TrajectoryDataset& real, const TrajectoryDataset& gen,
                          MapeAveraging averaging = MapeAveraging::per_row);

/// Sorted samples of each statistic as CSV with columns metric,set,value.
std::string distribution_csv(const TrajectoryStats& real, const TrajectoryStats& gen);

}  // namespace mobgen
