#include "mobgen/city.hpp"

#include <cmath>
#include <string>

#include "mobgen/error.hpp"
#include "mobgen/io.hpp"

namespace mobgen {

void CityGenConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw InvalidArgument(std::string("city.") + what);
    };
    require(grid_side >= 2, "grid_side must be at least 2");
    require(n_hotspots >= 1, "n_hotspots must be at least 1");
    require(hotspot_spread > 0.0, "hotspot_spread must be positive");
    require(uniform_floor >= 0.0 && uniform_floor <= 1.0, "uniform_floor must lie in [0, 1]");
    require(gravity_exponent > 0.0, "gravity_exponent must be positive");
    require(cell_extent > 0.0, "cell_extent must be positive");
    require(total_trips > 0.0, "total_trips must be positive");
}

nlohmann::json to_json(const CityGenConfig& cfg) {
    return {{"grid_side", cfg.grid_side},
            {"n_hotspots", cfg.n_hotspots},
            {"hotspot_spread", cfg.hotspot_spread},
            {"uniform_floor", cfg.uniform_floor},
            {"gravity_exponent", cfg.gravity_exponent},
            {"cell_extent", cfg.cell_extent},
            {"total_trips", cfg.total_trips},
            {"seed", cfg.seed}};
}

CityGenConfig city_config_from_json(const nlohmann::json& j) {
    CityGenConfig c;
    c.grid_side = j.value("grid_side", c.grid_side);
    c.n_hotspots = j.value("n_hotspots", c.n_hotspots);
    c.hotspot_spread = j.value("hotspot_spread", c.hotspot_spread);
    c.uniform_floor = j.value("uniform_floor", c.uniform_floor);
    c.gravity_exponent = j.value("gravity_exponent", c.gravity_exponent);
    c.cell_extent = j.value("cell_extent", c.cell_extent);
    c.total_trips = j.value("total_trips", c.total_trips);
    c.seed = j.value("seed", c.seed);
    return c;
}

GridCity generate_city(const CityGenConfig& cfg) {
    cfg.validate();
    Rng rng(derive_seed(cfg.seed, 0xC17));
    const auto n = static_cast<std::size_t>(cfg.grid_side) * cfg.grid_side;
    std::vector<double> bumps(n, 0.0);
    for (int h = 0; h < cfg.n_hotspots; ++h) {
        const double cx = -0.8 + 1.6 * uniform01(rng);
        const double cy = -0.8 + 1.6 * uniform01(rng);
        const double w = 0.5 + uniform01(rng);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = loc_to_coord(cfg.grid_side, LocId{static_cast<std::uint32_t>(i)});
            const double d2 = (c.x - cx) * (c.x - cx) + (c.y - cy) * (c.y - cy);
            bumps[i] += w * std::exp(-d2 / (2.0 * cfg.hotspot_spread * cfg.hotspot_spread));
        }
    }
    double bump_total = 0.0;
    for (double b : bumps) bump_total += b;
    std::vector<double> pop(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double b = bump_total > 0.0 ? bumps[i] / bump_total : 1.0 / static_cast<double>(n);
        pop[i] = (1.0 - cfg.uniform_floor) * b + cfg.uniform_floor / static_cast<double>(n);
    }
    double total = 0.0;
    for (double p : pop) total += p;
    for (auto& p : pop) p /= total;
    return GridCity(cfg.grid_side, std::move(pop), cfg.cell_extent);
}

FlowMatrix ground_truth_flows(const GridCity& city, double eta, double total_trips) {
    if (!(eta > 0.0)) {
        throw InvalidArgument("ground_truth_flows: eta must be positive");
    }
    const auto n = city.size();
    const auto pop = city.population();
    std::vector<Coord> centers(n);
    for (std::size_t i = 0; i < n; ++i) centers[i] = loc_to_coord(city, LocId{static_cast<std::uint32_t>(i)});
    std::vector<double> f(n * n, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double dx = centers[i].x - centers[j].x;
            const double dy = centers[i].y - centers[j].y;
            const double d = std::sqrt(dx * dx + dy * dy);
            const double v = pop[i] * pop[j] / std::pow(d, eta);
            f[i * n + j] = v;
            total += v;
        }
    }
    if (!(total > 0.0)) {
        throw NumericError("ground_truth_flows: no positive flow");
    }
    for (auto& v : f) v *= total_trips / total;
    return FlowMatrix(n, std::move(f));
}

TrajectoryDataset generate_training_dataset(const GridCity& city, const FlowMatrix& flows, const EprParams& epr,
                                            std::span<const double> move_profile, std::size_t n_traj,
                                            std::uint64_t seed, SplitTag split, int traj_len) {
    if (n_traj == 0) {
        throw InvalidArgument("generate_training_dataset: n_traj must be positive");
    }
    const FlowSampler sampler(flows, city);
    auto trajs = sample_transition_sequences(city, sampler, epr, move_profile, n_traj, seed, traj_len);
    TrajectoryDataset ds(city.grid_side(), city.cell_extent(), traj_len, split, std::move(trajs));
    ds.set_affine(fit_affine(ds));
    return ds;
}

void write_city(const std::filesystem::path& path, const GridCity& city, const CityGenConfig& cfg) {
    nlohmann::json j;
    j["format"] = "mobgen-city";
    j["version"] = 1;
    j["grid_side"] = city.grid_side();
    j["cell_extent"] = city.cell_extent();
    j["population"] = std::vector<double>(city.population().begin(), city.population().end());
    j["config"] = to_json(cfg);
    write_with_sidecar(path, j.dump(1) + "\n", cfg.seed, "city");
}

GridCity read_city(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_verified(path));
        return GridCity(j.at("grid_side").get<int>(), j.at("population").get<std::vector<double>>(),
                        j.at("cell_extent").get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw IoError("city file '" + path.string() + "': " + e.what());
    }
}

}  // namespace mobgen
