#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "mobgen/rng.hpp"
#include "mobgen/types.hpp"

namespace mobgen {

/// Individual-mobility parameters of the exploration and preferential return
/// model, with time-of-day roles:
///  - `n_omega` scales the time-of-day move profile,
///  - `beta1` / `beta2` multiply the move probability when the previous slot
///    was a stay (dwell) / a move (burst),
///  - `home_return[t]` is the probability that a move out of slot t goes home,
///  - an explore happens with probability rho * S^-gamma, S being the number of
///    distinct visited cells.
struct EprParams {
    double n_omega = 1.0;
    double beta1 = 1.0;
    double beta2 = 0.6;
    std::vector<double> home_return;
    double rho = 0.6;
    double gamma = 0.21;

    void validate(int traj_len) const;
};

/// Morning / noon / evening three-peak move profile used to bootstrap the
/// synthetic world.
std::vector<double> default_move_profile(int traj_len = kSlotsPerDay);
/// Home-return probability that is low in the morning and peaks at night.
std::vector<double> default_home_return_profile(int traj_len = kSlotsPerDay);
EprParams default_epr_params(int traj_len = kSlotsPerDay);

enum class Action { stay, home_return, preferential_return, explore };

const char* to_string(Action a);

class VisitHistory {
public:
    explicit VisitHistory(LocId home);

    LocId home() const noexcept { return home_; }
    LocId current() const noexcept { return current_; }
    bool last_moved() const noexcept { return last_moved_; }
    std::size_t distinct_count() const noexcept { return counts_.size(); }
    const std::map<std::uint32_t, std::uint32_t>& visit_counts() const noexcept { return counts_; }

    /// Advances one slot. Arrivals at a different cell increment its visit count.
    void record(LocId next);

private:
    LocId home_;
    LocId current_;
    bool last_moved_ = false;
    std::map<std::uint32_t, std::uint32_t> counts_;
};

LocId sample_home(const GridCity& city, Rng& rng);

/// Probability of leaving the current cell during the transition out of slot t.
double move_probability(const EprParams& params, const VisitHistory& hist, int t,
                        std::span<const double> move_profile);

/// Decision for the transition out of slot t. A home return is only possible
/// while away from home.
Action decide_action(const EprParams& params, const VisitHistory& hist, int t,
                     std::span<const double> move_profile, Rng& rng);

/// Preferential return: a previously visited cell other than the current one,
/// proportional to visit counts; home when there is no such cell.
LocId pi_individual(const VisitHistory& hist, Rng& rng);

/// Row-wise transition sampler over a flow matrix. Self transitions are never
/// produced; rows without departures fall back to the population of the other
/// cells.
class FlowSampler {
public:
    FlowSampler(const FlowMatrix& flows, const GridCity& city);

    LocId sample(LocId current, Rng& rng) const;
    /// Transition probabilities out of `current` (sum 1, zero on the diagonal).
    std::vector<double> distribution(LocId current) const;
    std::size_t size() const noexcept { return n_; }

private:
    std::size_t n_;
    std::vector<double> cumulative_;
};

LocId pi_flow(const FlowMatrix& flows, const GridCity& city, LocId current, Rng& rng);

/// Applies an already chosen action and advances the history.
LocId apply_action(Action action, VisitHistory& hist, const FlowSampler& flows, Rng& rng);

/// Collaborative policy: individual EPR choices except that explorations follow
/// the collective flow row of the current cell.
LocId collab_policy(const EprParams& params, VisitHistory& hist, int t, const FlowSampler& flows,
                    std::span<const double> move_profile, Rng& rng);

Trajectory sample_transition_sequence(const GridCity& city, const FlowSampler& flows, const EprParams& params,
                                      std::span<const double> move_profile, std::uint64_t seed,
                                      int traj_len = kSlotsPerDay);

Trajectory sample_transition_sequence(const GridCity& city, const FlowMatrix& flows, const EprParams& params,
                                      std::uint64_t seed);

/// `count` sequences, sequence i seeded with derive_seed(seed, i).
std::vector<Trajectory> sample_transition_sequences(const GridCity& city, const FlowSampler& flows,
                                                    const EprParams& params, std::span<const double> move_profile,
                                                    std::size_t count, std::uint64_t seed,
                                                    int traj_len = kSlotsPerDay);

}  // namespace mobgen
