#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mobgen {

/// Half-hour slots per day.
inline constexpr int kSlotsPerDay = 48;

/// Standard deviation of each coordinate channel in model units.
inline constexpr double kSigmaData = 0.1;

struct LocId {
    std::uint32_t index = 0;

    friend auto operator<=>(const LocId&, const LocId&) = default;
};

/// A point of the normalized lattice. Cell centers lie inside [-1, 1]^2.
struct Coord {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Coord&, const Coord&) = default;
};

/// Square world of G x G cells with a population surface.
///
/// Cell `l` sits at column `l % G` and row `l / G`.
class GridCity {
public:
    GridCity(int grid_side, std::vector<double> population, double cell_extent = 1.0);

    int grid_side() const noexcept { return grid_side_; }
    std::size_t size() const noexcept { return population_.size(); }
    std::span<const double> population() const noexcept { return population_; }
    double cell_extent() const noexcept { return cell_extent_; }

    /// Distance between neighbouring cell centers in lattice units.
    double pitch() const noexcept { return 2.0 / grid_side_; }
    /// Converts a lattice-unit length into abstract kilometres.
    double lattice_to_km(double d) const noexcept { return d / pitch() * cell_extent_; }

    bool contains(LocId l) const noexcept { return l.index < size(); }

private:
    int grid_side_;
    std::vector<double> population_;
    double cell_extent_;
};

/// One day of movement: `locs[t]` is the location occupied in slot t.
struct Trajectory {
    std::vector<LocId> locs;

    std::size_t length() const noexcept { return locs.size(); }
    LocId at(std::size_t slot) const { return locs.at(slot); }
    bool is_static() const noexcept;

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

Trajectory make_trajectory(std::initializer_list<std::uint32_t> locs);
Trajectory make_trajectory(std::span<const std::uint32_t> locs);

/// Per-channel affine map between lattice coordinates and model units:
/// model = (lattice - offset) * scale.
struct DataAffine {
    std::array<double, 2> offset{0.0, 0.0};
    std::array<double, 2> scale{1.0, 1.0};

    Coord to_model(Coord lattice) const noexcept;
    Coord to_lattice(Coord model) const noexcept;

    friend bool operator==(const DataAffine&, const DataAffine&) = default;
};

enum class SplitTag { train, holdout, generated };

std::string to_string(SplitTag tag);
SplitTag split_from_string(const std::string& s);

/// A set of equal-length trajectories tied to one city.
class TrajectoryDataset {
public:
    TrajectoryDataset(int grid_side, double cell_extent, int traj_len, SplitTag split,
                      std::vector<Trajectory> trajectories, DataAffine affine = {});

    int grid_side() const noexcept { return grid_side_; }
    double cell_extent() const noexcept { return cell_extent_; }
    int traj_len() const noexcept { return traj_len_; }
    SplitTag split() const noexcept { return split_; }
    const DataAffine& affine() const noexcept { return affine_; }
    void set_affine(const DataAffine& a) { affine_ = a; }

    std::size_t size() const noexcept { return trajectories_.size(); }
    const std::vector<Trajectory>& trajectories() const noexcept { return trajectories_; }
    const Trajectory& operator[](std::size_t i) const { return trajectories_.at(i); }

    bool same_city(const GridCity& city) const noexcept;

private:
    int grid_side_;
    double cell_extent_;
    int traj_len_;
    SplitTag split_;
    std::vector<Trajectory> trajectories_;
    DataAffine affine_;
};

/// Dense N x N origin-destination matrix.
class FlowMatrix {
public:
    FlowMatrix() = default;
    explicit FlowMatrix(std::size_t n, bool include_self = false);
    FlowMatrix(std::size_t n, std::vector<double> counts, bool include_self = false);

    std::size_t size() const noexcept { return n_; }
    bool include_self() const noexcept { return include_self_; }
    double operator()(std::size_t from, std::size_t to) const { return counts_[from * n_ + to]; }
    double& operator()(std::size_t from, std::size_t to) { return counts_[from * n_ + to]; }
    std::span<const double> row(std::size_t from) const { return {counts_.data() + from * n_, n_}; }
    std::span<const double> data() const noexcept { return counts_; }
    double total() const noexcept;
    double row_sum(std::size_t from) const;

    FlowMatrix& operator+=(const FlowMatrix& other);

    friend bool operator==(const FlowMatrix&, const FlowMatrix&) = default;

private:
    std::size_t n_ = 0;
    std::vector<double> counts_;
    bool include_self_ = false;
};

Coord loc_to_coord(int grid_side, LocId l);
Coord loc_to_coord(const GridCity& city, LocId l);
LocId coord_to_loc(int grid_side, Coord c);
LocId coord_to_loc(const GridCity& city, Coord c);

FlowMatrix flows_from_dataset(const TrajectoryDataset& ds, bool include_self = false);

/// Transition distribution out of `l`. A row without departures falls back to
/// the population over all other cells.
std::vector<double> row_normalize(const FlowMatrix& f, LocId l, const GridCity& city);

/// Fits the affine that centres each channel of the dataset's visited cells and
/// scales it to standard deviation `sigma_data`.
DataAffine fit_affine(const TrajectoryDataset& ds, double sigma_data = kSigmaData);

}  // namespace mobgen
