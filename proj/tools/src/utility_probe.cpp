#include "mobgen_cli/utility_probe.hpp"

#include <cmath>
#include <string>

#include "mobgen/error.hpp"

namespace mobgen::cli {

MarkovPredictor::MarkovPredictor(std::size_t n_locations) : n_(n_locations), counts_(n_locations * n_locations, 0.0) {
    if (n_locations == 0) throw InvalidArgument("MarkovPredictor: no locations");
}

void MarkovPredictor::fit(const Trajectory& t) {
    for (std::size_t i = 0; i + 1 < t.locs.size(); ++i) {
        const auto a = t.locs[i].index;
        const auto b = t.locs[i + 1].index;
        if (a >= n_ || b >= n_) throw InvalidArgument("MarkovPredictor: location out of range");
        counts_[a * n_ + b] += 1.0;
    }
}

void MarkovPredictor::fit(const TrajectoryDataset& ds) {
    for (const auto& t : ds.trajectories()) fit(t);
}

LocId MarkovPredictor::predict(LocId current) const {
    if (current.index >= n_) throw InvalidArgument("MarkovPredictor: location out of range");
    const double* row = counts_.data() + static_cast<std::size_t>(current.index) * n_;
    std::size_t best = current.index;
    double best_count = 0.0;
    for (std::size_t j = 0; j < n_; ++j) {
        if (row[j] > best_count) {
            best_count = row[j];
            best = j;
        }
    }
    return LocId{static_cast<std::uint32_t>(best)};
}

nlohmann::json to_json(const ProbeResult& r) {
    return {{"mix", r.mix},
            {"n_train_real", r.n_train_real},
            {"n_train_gen", r.n_train_gen},
            {"accuracy", r.accuracy},
            {"move_accuracy", r.move_accuracy},
            {"persistence_accuracy", r.persistence_accuracy},
            {"n_pairs", r.n_pairs},
            {"n_move_pairs", r.n_move_pairs}};
}

ProbeResult utility_probe(const TrajectoryDataset& real, const TrajectoryDataset& gen, const TrajectoryDataset& test,
                          double mix) {
    if (!(mix >= 0.0 && mix <= 1.0)) throw InvalidArgument("utility_probe: mix must lie in [0, 1]");
    if (real.grid_side() != gen.grid_side() || real.grid_side() != test.grid_side()) {
        throw InvalidArgument("utility_probe: datasets come from different grids");
    }
    if (test.size() == 0) throw InvalidArgument("utility_probe: empty test set");
    const std::size_t total = real.size();
    const auto n_gen = static_cast<std::size_t>(std::llround(mix * static_cast<double>(total)));
    if (n_gen > gen.size()) {
        throw InvalidArgument("utility_probe: mix needs " + std::to_string(n_gen) + " generated trajectories, have " +
                              std::to_string(gen.size()));
    }
    const std::size_t n_real = total - n_gen;
    const auto side = static_cast<std::size_t>(real.grid_side());
    MarkovPredictor model(side * side);
    for (std::size_t i = 0; i < n_real; ++i) model.fit(real[i]);
    for (std::size_t i = 0; i < n_gen; ++i) model.fit(gen[i]);

    ProbeResult r;
    r.mix = mix;
    r.n_train_real = n_real;
    r.n_train_gen = n_gen;
    std::size_t hits = 0, move_hits = 0, stay_hits = 0;
    for (const auto& t : test.trajectories()) {
        for (std::size_t i = 0; i + 1 < t.locs.size(); ++i) {
            const LocId cur = t.locs[i];
            const LocId next = t.locs[i + 1];
            const bool hit = model.predict(cur) == next;
            ++r.n_pairs;
            hits += hit;
            if (next != cur) {
                ++r.n_move_pairs;
                move_hits += hit;
            } else {
                ++stay_hits;
            }
        }
    }
    r.accuracy = static_cast<double>(hits) / static_cast<double>(r.n_pairs);
    r.move_accuracy = r.n_move_pairs ? static_cast<double>(move_hits) / static_cast<double>(r.n_move_pairs) : 0.0;
    r.persistence_accuracy = static_cast<double>(stay_hits) / static_cast<double>(r.n_pairs);
    return r;
}

}  // namespace mobgen::cli
