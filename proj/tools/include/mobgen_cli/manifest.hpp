#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mobgen::cli {

inline constexpr const char* kToolVersion = "0.1.0";

struct FileRecord {
    std::string path;
    std::string sha256;
};

/// Record of one command invocation. Appended as one JSON line to
/// `manifest.jsonl` in the command's output directory.
struct RunManifest {
    std::string command;
    std::string config_hash;
    std::vector<FileRecord> inputs;
    std::map<std::string, std::uint64_t> seeds;
    std::map<std::string, double> timings;  // seconds
    std::vector<FileRecord> outputs;
    nlohmann::json results = nlohmann::json::object();
    std::size_t threads = 1;
    std::string tool_version = kToolVersion;

    void add_input(const std::filesystem::path& p);
    void add_output(const std::filesystem::path& p);
};

nlohmann::json to_json(const RunManifest& m);

/// Appends `m` to `<dir>/manifest.jsonl`. Every listed output must exist.
void append_manifest(const std::filesystem::path& dir, const RunManifest& m);

std::vector<nlohmann::json> read_manifests(const std::filesystem::path& dir);

/// Wall-clock stopwatch in seconds.
class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

}  // namespace mobgen::cli
