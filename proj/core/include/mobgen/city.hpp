#pragma once

#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "mobgen/epr.hpp"
#include "mobgen/types.hpp"

namespace mobgen {

/// Desk-scale stand-in for a real city: Gaussian population hotspots over a
/// uniform floor, with gravity-law ground-truth flows.
struct CityGenConfig {
    int grid_side = 16;
    int n_hotspots = 3;
    double hotspot_spread = 0.3;   // lattice units
    double uniform_floor = 0.1;    // share of population spread uniformly
    double gravity_exponent = 2.0;
    double cell_extent = 1.0;      // km per cell
    double total_trips = 100000.0;
    std::uint64_t seed = 7;

    void validate() const;
};

nlohmann::json to_json(const CityGenConfig& cfg);
CityGenConfig city_config_from_json(const nlohmann::json& j);

GridCity generate_city(const CityGenConfig& cfg);

/// F_ij proportional to P_i P_j / d_ij^eta for i != j, zero diagonal, scaled to
/// sum to `total_trips`.
FlowMatrix ground_truth_flows(const GridCity& city, double eta, double total_trips = 100000.0);

/// `n_traj` trajectories from the collaborative EPR process. Trajectory i uses
/// seed derive_seed(seed, i).
TrajectoryDataset generate_training_dataset(const GridCity& city, const FlowMatrix& flows, const EprParams& epr,
                                            std::span<const double> move_profile, std::size_t n_traj,
                                            std::uint64_t seed, SplitTag split = SplitTag::train,
                                            int traj_len = kSlotsPerDay);

void write_city(const std::filesystem::path& path, const GridCity& city, const CityGenConfig& cfg);
GridCity read_city(const std::filesystem::path& path);

}  // namespace mobgen
