#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mobgen::cli {

namespace fs = std::filesystem;

/// File names shared by the commands.
inline constexpr const char* kCityFile = "city.json";
inline constexpr const char* kFlowsFile = "flows.csv";
inline constexpr const char* kTrainFile = "train.csv";
inline constexpr const char* kHoldoutFile = "holdout.csv";
inline constexpr const char* kCheckpointFile = "model.ckpt";
inline constexpr const char* kLossFile = "loss.csv";

struct SynthCityOptions {
    fs::path config;
    fs::path out;
    bool svg = false;
};

struct TrainOptions {
    fs::path config;
    fs::path data;  // directory written by synth-city
    fs::path out;
    bool svg = false;
};

struct GenerateOptions {
    fs::path config;
    fs::path data;
    fs::path checkpoint;
    fs::path out;
    std::string ablation = "full";  // full, no_prior, no_fusion or all
    std::optional<std::size_t> n;
    std::optional<std::uint64_t> seed;
    bool svg = false;
};

struct EvaluateOptions {
    fs::path real;
    fs::path gen;
    fs::path out;
    std::string mape_averaging = "per_row";
    bool svg = false;
};

struct PrivacyOptions {
    fs::path train;
    fs::path holdout;
    fs::path gen;
    fs::path out;
    std::size_t n_members = 500;
    std::size_t n_nonmembers = 500;
    std::size_t n_probe = 0;
    std::uint64_t seed = 0;
    bool svg = false;
};

struct AnalyzeOptions {
    fs::path checkpoint;
    fs::path dataset;
    fs::path out;
    int steps = 100;
    std::size_t max_trajectories = 0;  // 0 keeps all
    std::uint64_t seed = 0;
};

struct UtilityProbeOptions {
    fs::path real;
    fs::path gen;
    fs::path test;
    fs::path out;
    std::vector<double> mix{0.0};
};

void cmd_synth_city(const SynthCityOptions& o);
void cmd_train(const TrainOptions& o);
void cmd_generate(const GenerateOptions& o);
void cmd_evaluate(const EvaluateOptions& o);
void cmd_privacy(const PrivacyOptions& o);
void cmd_analyze(const AnalyzeOptions& o);
void cmd_utility_probe(const UtilityProbeOptions& o);

/// Parses arguments, runs the command and maps errors to exit codes:
/// 0 success, 2 configuration or usage, 3 numeric failure, 4 I/O.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace mobgen::cli
