#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "mobgen/types.hpp"

namespace mobgen::cli {

/// First-order Markov next-location predictor: predicts the most frequent
/// successor of the current cell seen in training (lowest index on ties),
/// or the current cell when that cell was never seen.
class MarkovPredictor {
public:
    explicit MarkovPredictor(std::size_t n_locations);

    void fit(const TrajectoryDataset& ds);
    void fit(const Trajectory& t);
    LocId predict(LocId current) const;

private:
    std::size_t n_;
    std::vector<double> counts_;
};

struct ProbeResult {
    double mix = 0.0;
    std::size_t n_train_real = 0;
    std::size_t n_train_gen = 0;
    double accuracy = 0.0;        // over every consecutive slot pair of the test set
    double move_accuracy = 0.0;   // over pairs where the true next cell differs
    double persistence_accuracy = 0.0;
    std::size_t n_pairs = 0;
    std::size_t n_move_pairs = 0;
};

nlohmann::json to_json(const ProbeResult& r);

/// Trains on a set of the size of `real` in which a fraction `mix` is
/// replaced by generated trajectories (first entries of each set), then
/// scores next-location accuracy on `test`.
ProbeResult utility_probe(const TrajectoryDataset& real, const TrajectoryDataset& gen, const TrajectoryDataset& test,
                          double mix);

}  // namespace mobgen::cli
