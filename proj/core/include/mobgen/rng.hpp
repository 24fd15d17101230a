#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace mobgen {

using Rng = std::mt19937_64;

/// Splittable seed rule: the seed of stream `stream` under `base` is
/// splitmix64(base ^ splitmix64(stream + 1)). Every per-trajectory or
/// per-shard generator in the library is derived this way, so results do not
/// depend on scheduling order.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

std::uint64_t splitmix64(std::uint64_t x);

inline Rng make_rng(std::uint64_t base, std::uint64_t stream) {
    return Rng(derive_seed(base, stream));
}

double uniform01(Rng& rng);
double standard_normal(Rng& rng);

/// Draws an index with probability proportional to `weights` (all >= 0,
/// positive sum).
std::size_t sample_weighted(std::span<const double> weights, Rng& rng);

/// Draws from a precomputed inclusive prefix sum.
std::size_t sample_cumulative(std::span<const double> cumulative, Rng& rng);

}  // namespace mobgen
