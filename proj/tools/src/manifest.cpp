#include "mobgen_cli/manifest.hpp"

#include <fstream>

#include "mobgen/error.hpp"
#include "mobgen/hash.hpp"

namespace mobgen::cli {

namespace {

FileRecord record(const std::filesystem::path& p) {
    if (!std::filesystem::exists(p)) throw IoError("manifest: missing file " + p.string());
    return {p.string(), sha256_file(p)};
}

nlohmann::json records_json(const std::vector<FileRecord>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : v) arr.push_back({{"path", r.path}, {"sha256", r.sha256}});
    return arr;
}

}  // namespace

void RunManifest::add_input(const std::filesystem::path& p) { inputs.push_back(record(p)); }

void RunManifest::add_output(const std::filesystem::path& p) { outputs.push_back(record(p)); }

nlohmann::json to_json(const RunManifest& m) {
    nlohmann::json j;
    j["command"] = m.command;
    j["config_hash"] = m.config_hash;
    j["inputs"] = records_json(m.inputs);
    j["seeds"] = m.seeds;
    j["timings"] = m.timings;
    j["outputs"] = records_json(m.outputs);
    j["results"] = m.results;
    j["threads"] = m.threads;
    j["tool_version"] = m.tool_version;
    return j;
}

void append_manifest(const std::filesystem::path& dir, const RunManifest& m) {
    for (const auto& o : m.outputs) {
        if (!std::filesystem::exists(o.path)) throw IoError("manifest: output vanished: " + o.path);
    }
    std::filesystem::create_directories(dir);
    const auto path = dir / "manifest.jsonl";
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for appending");
    out << to_json(m).dump() << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<nlohmann::json> read_manifests(const std::filesystem::path& dir) {
    const auto path = dir / "manifest.jsonl";
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<nlohmann::json> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::parse_error& e) {
            throw IoError(path.string() + ": malformed manifest line: " + e.what());
        }
    }
    return out;
}

}  // namespace mobgen::cli
