#include "mobgen/epr.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mobgen/error.hpp"
#include "mobgen/parallel.hpp"

namespace mobgen {

namespace {

double bump(double t, double center, double width) {
    const double z = (t - center) / width;
    return std::exp(-0.5 * z * z);
}

}  // namespace

void EprParams::validate(int traj_len) const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw InvalidArgument(std::string("epr.") + what);
    };
    require(n_omega > 0.0, "n_omega must be positive");
    require(beta1 > 0.0, "beta1 must be positive");
    require(beta2 > 0.0, "beta2 must be positive");
    require(rho > 0.0 && rho <= 1.0, "rho must lie in (0, 1]");
    require(gamma >= 0.0, "gamma must be non-negative");
    require(home_return.size() == static_cast<std::size_t>(traj_len),
            "home_return must have one entry per slot");
    for (double p : home_return) require(p >= 0.0 && p <= 1.0, "home_return entries must lie in [0, 1]");
}

std::vector<double> default_move_profile(int traj_len) {
    std::vector<double> p(static_cast<std::size_t>(traj_len));
    const double slots_per_hour = traj_len / 24.0;
    for (int t = 0; t < traj_len; ++t) {
        const double h = t / slots_per_hour;
        // Daytime plateau between roughly 07:00 and 22:00.
        const double day = 1.0 / (1.0 + std::exp(-(h - 7.0) * 2.0)) * 1.0 / (1.0 + std::exp((h - 22.0) * 2.0));
        double v = 0.01 + 0.04 * day + 0.22 * bump(h, 8.0, 1.0) + 0.15 * bump(h, 12.0, 1.0) +
                   0.22 * bump(h, 18.0, 1.2);
        p[static_cast<std::size_t>(t)] = std::clamp(v, 0.0, 1.0);
    }
    return p;
}

std::vector<double> default_home_return_profile(int traj_len) {
    std::vector<double> p(static_cast<std::size_t>(traj_len));
    const double slots_per_hour = traj_len / 24.0;
    for (int t = 0; t < traj_len; ++t) {
        const double h = t / slots_per_hour;
        p[static_cast<std::size_t>(t)] = 0.1 + 0.6 / (1.0 + std::exp(-(h - 17.0)));
    }
    return p;
}

EprParams default_epr_params(int traj_len) {
    EprParams p;
    p.home_return = default_home_return_profile(traj_len);
    return p;
}

const char* to_string(Action a) {
    switch (a) {
        case Action::stay: return "stay";
        case Action::home_return: return "home_return";
        case Action::preferential_return: return "preferential_return";
        case Action::explore: return "explore";
    }
    return "unknown";
}

VisitHistory::VisitHistory(LocId home) : home_(home), current_(home) {
    counts_[home.index] = 1;
}

void VisitHistory::record(LocId next) {
    last_moved_ = next != current_;
    if (last_moved_) {
        ++counts_[next.index];
    }
    current_ = next;
}

LocId sample_home(const GridCity& city, Rng& rng) {
    return LocId{static_cast<std::uint32_t>(sample_weighted(city.population(), rng))};
}

double move_probability(const EprParams& params, const VisitHistory& hist, int t,
                        std::span<const double> move_profile) {
    if (t < 0 || static_cast<std::size_t>(t) >= move_profile.size()) {
        throw InvalidArgument("move_probability: slot out of range");
    }
    const double modifier = hist.last_moved() ? params.beta2 : params.beta1;
    return std::min(1.0, params.n_omega * move_profile[static_cast<std::size_t>(t)] * modifier);
}

Action decide_action(const EprParams& params, const VisitHistory& hist, int t,
                     std::span<const double> move_profile, Rng& rng) {
    const double p_move = move_probability(params, hist, t, move_profile);
    if (!(uniform01(rng) < p_move)) {
        return Action::stay;
    }
    if (hist.current() != hist.home() && uniform01(rng) < params.home_return.at(static_cast<std::size_t>(t))) {
        return Action::home_return;
    }
    const double p_explore = params.rho * std::pow(static_cast<double>(hist.distinct_count()), -params.gamma);
    if (uniform01(rng) < p_explore) {
        return Action::explore;
    }
    return Action::preferential_return;
}

LocId pi_individual(const VisitHistory& hist, Rng& rng) {
    std::vector<std::uint32_t> cells;
    std::vector<double> weights;
    for (const auto& [cell, count] : hist.visit_counts()) {
        if (cell == hist.current().index) continue;
        cells.push_back(cell);
        weights.push_back(static_cast<double>(count));
    }
    if (cells.empty()) {
        return hist.home();
    }
    if (cells.size() == 1) {
        return LocId{cells.front()};
    }
    return LocId{cells[sample_weighted(weights, rng)]};
}

FlowSampler::FlowSampler(const FlowMatrix& flows, const GridCity& city) : n_(flows.size()) {
    if (flows.size() != city.size()) {
        throw InvalidArgument("FlowSampler: flow matrix and city sizes differ");
    }
    if (n_ < 2) {
        throw InvalidArgument("FlowSampler: need at least two cells");
    }
    cumulative_.resize(n_ * n_);
    for (std::size_t i = 0; i < n_; ++i) {
        auto row = row_normalize(flows, LocId{static_cast<std::uint32_t>(i)}, city);
        row[i] = 0.0;
        double s = 0.0;
        for (double v : row) s += v;
        if (!(s > 0.0)) {
            // Only self-transitions recorded: use the population fallback.
            FlowMatrix empty(n_);
            row = row_normalize(empty, LocId{static_cast<std::uint32_t>(i)}, city);
        }
        double acc = 0.0;
        for (std::size_t j = 0; j < n_; ++j) {
            acc += row[j];
            cumulative_[i * n_ + j] = acc;
        }
    }
}

LocId FlowSampler::sample(LocId current, Rng& rng) const {
    if (current.index >= n_) {
        throw InvalidArgument("FlowSampler: location out of range");
    }
    const std::span<const double> row(cumulative_.data() + current.index * n_, n_);
    return LocId{static_cast<std::uint32_t>(sample_cumulative(row, rng))};
}

std::vector<double> FlowSampler::distribution(LocId current) const {
    if (current.index >= n_) {
        throw InvalidArgument("FlowSampler: location out of range");
    }
    std::vector<double> p(n_);
    const double total = cumulative_[current.index * n_ + n_ - 1];
    double prev = 0.0;
    for (std::size_t j = 0; j < n_; ++j) {
        const double c = cumulative_[current.index * n_ + j];
        p[j] = (c - prev) / total;
        prev = c;
    }
    return p;
}

LocId pi_flow(const FlowMatrix& flows, const GridCity& city, LocId current, Rng& rng) {
    auto row = row_normalize(flows, current, city);
    row[current.index] = 0.0;
    double s = 0.0;
    for (double v : row) s += v;
    if (!(s > 0.0)) {
        FlowMatrix empty(flows.size());
        row = row_normalize(empty, current, city);
    }
    return LocId{static_cast<std::uint32_t>(sample_weighted(row, rng))};
}

LocId apply_action(Action action, VisitHistory& hist, const FlowSampler& flows, Rng& rng) {
    LocId next = hist.current();
    switch (action) {
        case Action::stay: break;
        case Action::home_return: next = hist.home(); break;
        case Action::preferential_return: next = pi_individual(hist, rng); break;
        case Action::explore: next = flows.sample(hist.current(), rng); break;
    }
    hist.record(next);
    return next;
}

LocId collab_policy(const EprParams& params, VisitHistory& hist, int t, const FlowSampler& flows,
                    std::span<const double> move_profile, Rng& rng) {
    const Action a = decide_action(params, hist, t, move_profile, rng);
    return apply_action(a, hist, flows, rng);
}

Trajectory sample_transition_sequence(const GridCity& city, const FlowSampler& flows, const EprParams& params,
                                      std::span<const double> move_profile, std::uint64_t seed, int traj_len) {
    if (move_profile.size() != static_cast<std::size_t>(traj_len)) {
        throw InvalidArgument("sample_transition_sequence: move profile length must equal trajectory length");
    }
    Rng rng(seed);
    const LocId home = sample_home(city, rng);
    VisitHistory hist(home);
    Trajectory traj;
    traj.locs.reserve(static_cast<std::size_t>(traj_len));
    traj.locs.push_back(home);
    for (int t = 1; t < traj_len; ++t) {
        traj.locs.push_back(collab_policy(params, hist, t - 1, flows, move_profile, rng));
    }
    return traj;
}

Trajectory sample_transition_sequence(const GridCity& city, const FlowMatrix& flows, const EprParams& params,
                                      std::uint64_t seed) {
    const FlowSampler sampler(flows, city);
    const auto profile = default_move_profile(static_cast<int>(params.home_return.size()));
    return sample_transition_sequence(city, sampler, params, profile, seed,
                                      static_cast<int>(params.home_return.size()));
}

std::vector<Trajectory> sample_transition_sequences(const GridCity& city, const FlowSampler& flows,
                                                    const EprParams& params, std::span<const double> move_profile,
                                                    std::size_t count, std::uint64_t seed, int traj_len) {
    params.validate(traj_len);
    std::vector<Trajectory> out(count);
    parallel_for(count, [&](std::size_t i) {
        out[i] = sample_transition_sequence(city, flows, params, move_profile, derive_seed(seed, i), traj_len);
    });
    return out;
}

}  // namespace mobgen
