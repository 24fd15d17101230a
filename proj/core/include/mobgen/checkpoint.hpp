#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "mobgen/diffusion.hpp"
#include "mobgen/network.hpp"

namespace mobgen {

/// Everything needed to rebuild a trained denoiser.
///
/// File layout (all integers little-endian):
///   8 bytes   magic "MOBGENCK"
///   u32       format version (currently 1)
///   u64       header length n
///   n bytes   UTF-8 JSON header: config, edm, schedule, affine, parameter
///             table (name, rows, cols, offset), init seed, manifest
///   4*P bytes parameters as IEEE-754 binary32 in layout order
///   32 bytes  SHA-256 of all preceding bytes
struct Checkpoint {
    DenoiserConfig config;
    ParamStore params;
    VpSchedule schedule;
    DataAffine affine;
    EdmConfig edm;
    nlohmann::json manifest = nlohmann::json::object();
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const Checkpoint& ck);
Checkpoint parse_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mobgen
