#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "mobgen/pipeline.hpp"

namespace mobgen::cli {

/// Environment variable that replaces every seed of a run with values
/// derived from one master seed.
inline constexpr const char* kSeedEnv = "MOBGEN_SEED";
/// Environment variable read by the library for its worker count.
inline constexpr const char* kThreadsEnv = "MOBGEN_THREADS";

/// Parses YAML text into the JSON tree consumed by the strict config reader.
/// Plain scalars become booleans, nulls, integers or reals when they parse as
/// such; quoted scalars always stay strings.
nlohmann::json yaml_to_json(const std::string& text);

/// Reads a `.yaml`, `.yml` or `.json` run configuration, applies the seed
/// override from the environment and validates the result.
RunConfig load_run_config(const std::filesystem::path& path);

/// Seed override from the environment, if set. Malformed values raise
/// ConfigError.
std::optional<std::uint64_t> seed_override();

/// Replaces all seeds of `cfg` with streams of `master`.
void apply_master_seed(RunConfig& cfg, std::uint64_t master);

}  // namespace mobgen::cli
