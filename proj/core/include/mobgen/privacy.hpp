#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mobgen/types.hpp"

namespace mobgen {

/// Fraction of slots in which the two trajectories occupy the same cell.
double overlap_ratio(const Trajectory& a, const Trajectory& b);

/// For each probed generated trajectory, the k-th highest overlap ratio
/// against the real set, for every requested k.
struct UniquenessResult {
    std::vector<int> ks;
    std::vector<std::vector<double>> values;  // per k, sorted ascending
    std::vector<std::size_t> probes;          // indices into the generated set

    /// Empirical CDF of the k-th entry at x: share of probes with value <= x.
    double ecdf(std::size_t k_index, double x) const;
    /// Share of probes with value strictly below x.
    double fraction_below(std::size_t k_index, double x) const;
};

/// Exhaustive search. With `n_probe` = 0 or at least |gen| every generated
/// trajectory is probed; otherwise a seeded sample without replacement.
UniquenessResult uniqueness_ecdf(const TrajectoryDataset& gen, const TrajectoryDataset& real,
                                 const std::vector<int>& ks = {1, 3, 5}, std::size_t n_probe = 0,
                                 std::uint64_t seed = 0);

std::string uniqueness_csv(const UniquenessResult& r);
nlohmann::json to_json(const UniquenessResult& r);

inline constexpr std::size_t kMiaFeatures = 4;
using MiaFeatures = std::array<double, kMiaFeatures>;

/// Root-mean-square per-slot distance between two trajectories in
/// normalized coordinates.
double coordinate_distance(const Trajectory& a, const Trajectory& b, int grid_side);

/// [max overlap, mean of the top-k overlaps, min coordinate distance, mean of
/// the k smallest coordinate distances] of `candidate` against `gen`.
MiaFeatures mia_features(const Trajectory& candidate, const TrajectoryDataset& gen, int k);

enum class MiaClassifier { logistic, hinge, stumps };
std::string to_string(MiaClassifier c);
MiaClassifier mia_classifier_from_string(const std::string& s);

/// Black-box distance-feature attack. Members are drawn from the training
/// set, nonmembers from the holdout set; the attacker sees only the
/// generated data.
struct MiaProtocol {
    std::size_t n_members = 500;
    std::size_t n_nonmembers = 500;
    double calibration_fraction = 0.5;
    int k_nn = 5;
    std::vector<MiaClassifier> classifiers{MiaClassifier::logistic, MiaClassifier::hinge, MiaClassifier::stumps};
    std::uint64_t seed = 0;
    bool shuffle_labels = false;

    void validate() const;
};

struct MiaScore {
    MiaClassifier classifier;
    double success = 0.0;  // accuracy on the evaluation split
};

struct MiaResult {
    std::vector<MiaScore> scores;
    std::size_t n_calibration = 0;
    std::size_t n_evaluation = 0;

    double max_success() const;
    double min_success() const;
};

nlohmann::json to_json(const MiaResult& r);

/// Labelled feature table: one row per candidate, label 1 for members.
struct LabelledFeatures {
    std::vector<MiaFeatures> x;
    std::vector<int> y;
};

/// Fits each classifier on the first `n_calibration` rows (standardized with
/// their statistics) and scores the rest.
MiaResult fit_and_score(const LabelledFeatures& data, std::size_t n_calibration,
                        const std::vector<MiaClassifier>& classifiers);

MiaResult run_mia(const MiaProtocol& protocol, const TrajectoryDataset& train_set,
                  const TrajectoryDataset& holdout_set, const TrajectoryDataset& gen);

}  // namespace mobgen
