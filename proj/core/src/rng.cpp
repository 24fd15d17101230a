#include "mobgen/rng.hpp"

#include <algorithm>

#include "mobgen/error.hpp"

namespace mobgen {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return splitmix64(base ^ splitmix64(stream + 1));
}

double uniform01(Rng& rng) {
    // 53 random mantissa bits, in [0, 1).
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double standard_normal(Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

std::size_t sample_cumulative(std::span<const double> cumulative, Rng& rng) {
    if (cumulative.empty() || !(cumulative.back() > 0.0)) {
        throw InvalidArgument("sample_cumulative: weights must have a positive sum");
    }
    const double u = uniform01(rng) * cumulative.back();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    auto idx = static_cast<std::size_t>(it - cumulative.begin());
    if (idx == cumulative.size()) {
        // u rounded up to the total; take the last entry with positive weight.
        idx = cumulative.size() - 1;
        while (idx > 0 && cumulative[idx] == cumulative[idx - 1]) {
            --idx;
        }
    }
    return idx;
}

std::size_t sample_weighted(std::span<const double> weights, Rng& rng) {
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) {
            throw InvalidArgument("sample_weighted: negative weight");
        }
        total += w;
    }
    if (!(total > 0.0)) {
        throw InvalidArgument("sample_weighted: weights must have a positive sum");
    }
    const double u = uniform01(rng) * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) {
            continue;
        }
        acc += weights[i];
        last_positive = i;
        if (u < acc) {
            return i;
        }
    }
    return last_positive;
}

}  // namespace mobgen
