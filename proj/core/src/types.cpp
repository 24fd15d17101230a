#include "mobgen/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mobgen/error.hpp"

namespace mobgen {

GridCity::GridCity(int grid_side, std::vector<double> population, double cell_extent)
    : grid_side_(grid_side), population_(std::move(population)), cell_extent_(cell_extent) {
    if (grid_side_ < 1) {
        throw InvalidArgument("GridCity: grid_side must be positive");
    }
    if (population_.size() != static_cast<std::size_t>(grid_side_) * grid_side_) {
        throw InvalidArgument("GridCity: population must have G^2 entries");
    }
    double total = 0.0;
    for (double p : population_) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
            throw InvalidArgument("GridCity: population entries must be finite and non-negative");
        }
        total += p;
    }
    if (!(total > 0.0)) {
        throw InvalidArgument("GridCity: population must have a positive sum");
    }
    if (!(cell_extent_ > 0.0)) {
        throw InvalidArgument("GridCity: cell_extent must be positive");
    }
}

bool Trajectory::is_static() const noexcept {
    return std::adjacent_find(locs.begin(), locs.end(), std::not_equal_to<>{}) == locs.end();
}

Trajectory make_trajectory(std::span<const std::uint32_t> locs) {
    Trajectory t;
    t.locs.reserve(locs.size());
    for (auto l : locs) {
        t.locs.push_back(LocId{l});
    }
    return t;
}

Trajectory make_trajectory(std::initializer_list<std::uint32_t> locs) {
    return make_trajectory(std::span<const std::uint32_t>(locs.begin(), locs.size()));
}

Coord DataAffine::to_model(Coord lattice) const noexcept {
    return {(lattice.x - offset[0]) * scale[0], (lattice.y - offset[1]) * scale[1]};
}

Coord DataAffine::to_lattice(Coord model) const noexcept {
    return {model.x / scale[0] + offset[0], model.y / scale[1] + offset[1]};
}

std::string to_string(SplitTag tag) {
    switch (tag) {
        case SplitTag::train: return "train";
        case SplitTag::holdout: return "holdout";
        case SplitTag::generated: return "generated";
    }
    return "unknown";
}

SplitTag split_from_string(const std::string& s) {
    if (s == "train") return SplitTag::train;
    if (s == "holdout") return SplitTag::holdout;
    if (s == "generated") return SplitTag::generated;
    throw InvalidArgument("unknown split tag '" + s + "'");
}

TrajectoryDataset::TrajectoryDataset(int grid_side, double cell_extent, int traj_len, SplitTag split,
                                     std::vector<Trajectory> trajectories, DataAffine affine)
    : grid_side_(grid_side),
      cell_extent_(cell_extent),
      traj_len_(traj_len),
      split_(split),
      trajectories_(std::move(trajectories)),
      affine_(affine) {
    if (grid_side_ < 1 || traj_len_ < 1) {
        throw InvalidArgument("TrajectoryDataset: grid_side and traj_len must be positive");
    }
    if (trajectories_.empty()) {
        throw InvalidArgument("TrajectoryDataset: dataset must be nonempty");
    }
    const auto n = static_cast<std::uint32_t>(grid_side_) * static_cast<std::uint32_t>(grid_side_);
    for (std::size_t i = 0; i < trajectories_.size(); ++i) {
        const auto& t = trajectories_[i];
        if (t.length() != static_cast<std::size_t>(traj_len_)) {
            throw InvalidArgument("TrajectoryDataset: trajectory " + std::to_string(i) + " has length " +
                                  std::to_string(t.length()) + ", expected " + std::to_string(traj_len_));
        }
        for (auto l : t.locs) {
            if (l.index >= n) {
                throw InvalidArgument("TrajectoryDataset: trajectory " + std::to_string(i) +
                                      " references location " + std::to_string(l.index) + " outside the city");
            }
        }
    }
}

bool TrajectoryDataset::same_city(const GridCity& city) const noexcept {
    return city.grid_side() == grid_side_;
}

FlowMatrix::FlowMatrix(std::size_t n, bool include_self)
    : n_(n), counts_(n * n, 0.0), include_self_(include_self) {}

FlowMatrix::FlowMatrix(std::size_t n, std::vector<double> counts, bool include_self)
    : n_(n), counts_(std::move(counts)), include_self_(include_self) {
    if (counts_.size() != n_ * n_) {
        throw InvalidArgument("FlowMatrix: expected N*N entries");
    }
    for (double c : counts_) {
        if (!(c >= 0.0) || !std::isfinite(c)) {
            throw InvalidArgument("FlowMatrix: entries must be finite and non-negative");
        }
    }
}

double FlowMatrix::total() const noexcept {
    return std::accumulate(counts_.begin(), counts_.end(), 0.0);
}

double FlowMatrix::row_sum(std::size_t from) const {
    const auto r = row(from);
    return std::accumulate(r.begin(), r.end(), 0.0);
}

FlowMatrix& FlowMatrix::operator+=(const FlowMatrix& other) {
    if (other.n_ != n_) {
        throw InvalidArgument("FlowMatrix: shape mismatch in +=");
    }
    for (std::size_t i = 0; i < counts_.size(); ++i) {
        counts_[i] += other.counts_[i];
    }
    return *this;
}

Coord loc_to_coord(int grid_side, LocId l) {
    const auto n = static_cast<std::uint32_t>(grid_side) * static_cast<std::uint32_t>(grid_side);
    if (grid_side < 1 || l.index >= n) {
        throw InvalidArgument("loc_to_coord: location " + std::to_string(l.index) + " out of range");
    }
    const double step = 2.0 / grid_side;
    const auto col = l.index % static_cast<std::uint32_t>(grid_side);
    const auto row = l.index / static_cast<std::uint32_t>(grid_side);
    return {-1.0 + (col + 0.5) * step, -1.0 + (row + 0.5) * step};
}

Coord loc_to_coord(const GridCity& city, LocId l) {
    return loc_to_coord(city.grid_side(), l);
}

LocId coord_to_loc(int grid_side, Coord c) {
    if (!std::isfinite(c.x) || !std::isfinite(c.y)) {
        throw NumericError("coord_to_loc: non-finite coordinate");
    }
    // Nearest center on a separable uniform lattice is the per-axis nearest.
    auto axis = [grid_side](double v) {
        const double cell = std::floor((v + 1.0) * grid_side / 2.0);
        return static_cast<std::uint32_t>(std::clamp(cell, 0.0, static_cast<double>(grid_side - 1)));
    };
    return LocId{axis(c.y) * static_cast<std::uint32_t>(grid_side) + axis(c.x)};
}

LocId coord_to_loc(const GridCity& city, Coord c) {
    return coord_to_loc(city.grid_side(), c);
}

FlowMatrix flows_from_dataset(const TrajectoryDataset& ds, bool include_self) {
    const auto n = static_cast<std::size_t>(ds.grid_side()) * ds.grid_side();
    FlowMatrix f(n, include_self);
    for (const auto& t : ds.trajectories()) {
        for (std::size_t i = 0; i + 1 < t.length(); ++i) {
            const auto a = t.locs[i].index;
            const auto b = t.locs[i + 1].index;
            if (a != b || include_self) {
                f(a, b) += 1.0;
            }
        }
    }
    return f;
}

std::vector<double> row_normalize(const FlowMatrix& f, LocId l, const GridCity& city) {
    if (l.index >= f.size() || f.size() != city.size()) {
        throw InvalidArgument("row_normalize: location out of range or city/flow size mismatch");
    }
    const auto r = f.row(l.index);
    std::vector<double> out(r.begin(), r.end());
    const double s = std::accumulate(out.begin(), out.end(), 0.0);
    if (s > 0.0) {
        for (auto& v : out) v /= s;
        return out;
    }
    const auto pop = city.population();
    double total = 0.0;
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] = (j == l.index) ? 0.0 : pop[j];
        total += out[j];
    }
    if (!(total > 0.0)) {
        // All population sits on `l`; spread uniformly over the other cells.
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = (j == l.index) ? 0.0 : 1.0;
        total = static_cast<double>(out.size() - 1);
    }
    for (auto& v : out) v /= total;
    return out;
}

DataAffine fit_affine(const TrajectoryDataset& ds, double sigma_data) {
    std::array<double, 2> sum{0.0, 0.0};
    std::array<double, 2> sq{0.0, 0.0};
    double count = 0.0;
    for (const auto& t : ds.trajectories()) {
        for (auto l : t.locs) {
            const auto c = loc_to_coord(ds.grid_side(), l);
            sum[0] += c.x;
            sum[1] += c.y;
            sq[0] += c.x * c.x;
            sq[1] += c.y * c.y;
            count += 1.0;
        }
    }
    DataAffine a;
    for (int ch = 0; ch < 2; ++ch) {
        const double mean = sum[ch] / count;
        const double var = std::max(sq[ch] / count - mean * mean, 0.0);
        if (!(var > 0.0)) {
            throw NumericError("fit_affine: dataset has zero spread in channel " + std::to_string(ch));
        }
        a.offset[ch] = mean;
        a.scale[ch] = sigma_data / std::sqrt(var);
    }
    return a;
}

}  // namespace mobgen
