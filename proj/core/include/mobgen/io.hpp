#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "mobgen/types.hpp"

namespace mobgen {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);
double parse_double(const std::string& s);

/// Writes `bytes` to `path` and a `<path>.json` sidecar holding the content
/// checksum, the producing seed and a free-form kind tag.
void write_with_sidecar(const std::filesystem::path& path, const std::string& bytes,
                        std::optional<std::uint64_t> seed, const std::string& kind,
                        const nlohmann::json& extra = nlohmann::json::object());

/// Reads a file; when a sidecar exists its checksum must match.
std::string read_verified(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& path);

std::string serialize_dataset(const TrajectoryDataset& ds);
TrajectoryDataset parse_dataset(const std::string& text);

void write_dataset(const std::filesystem::path& path, const TrajectoryDataset& ds,
                   std::optional<std::uint64_t> seed);
TrajectoryDataset read_dataset(const std::filesystem::path& path);

std::string serialize_flows_csv(const FlowMatrix& f);
FlowMatrix parse_flows_csv(const std::string& text, bool include_self = false);

void write_flows(const std::filesystem::path& path, const FlowMatrix& f, std::optional<std::uint64_t> seed);
FlowMatrix read_flows(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace mobgen
