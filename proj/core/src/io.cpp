#include "mobgen/io.hpp"

#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

#include "mobgen/error.hpp"
#include "mobgen/hash.hpp"

namespace mobgen {

namespace {

constexpr const char* kDatasetMagic = "#mobgen-dataset";
constexpr int kDatasetVersion = 1;

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::uint32_t parse_u32(const std::string& s) {
    std::uint32_t v = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end) {
        throw IoError("malformed integer '" + s + "'");
    }
    return v;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) {
        throw Error("format_double: conversion failed");
    }
    return std::string(buf, ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end) {
        throw IoError("malformed number '" + s + "'");
    }
    return v;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write '" + path.string() + "'");
    }
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) {
        throw IoError("write failed for '" + path.string() + "'");
    }
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
    auto p = path;
    p += ".json";
    return p;
}

void write_with_sidecar(const std::filesystem::path& path, const std::string& bytes,
                        std::optional<std::uint64_t> seed, const std::string& kind,
                        const nlohmann::json& extra) {
    write_text_file(path, bytes);
    nlohmann::json side = extra;
    side["kind"] = kind;
    side["sha256"] = sha256_hex(bytes);
    side["bytes"] = bytes.size();
    if (seed) {
        side["seed"] = *seed;
    } else {
        side["seed"] = nullptr;
    }
    write_text_file(sidecar_path(path), side.dump(2) + "\n");
}

std::string read_verified(const std::filesystem::path& path) {
    auto bytes = read_text_file(path);
    const auto side = sidecar_path(path);
    if (std::filesystem::exists(side)) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_text_file(side));
        } catch (const nlohmann::json::exception& e) {
            throw IoError("malformed sidecar '" + side.string() + "': " + e.what());
        }
        if (j.contains("sha256") && j["sha256"].get<std::string>() != sha256_hex(bytes)) {
            throw IoError("checksum mismatch for '" + path.string() + "' (sidecar " + side.string() + ")");
        }
    }
    return bytes;
}

std::string serialize_dataset(const TrajectoryDataset& ds) {
    std::string out;
    out.reserve(ds.size() * static_cast<std::size_t>(ds.traj_len()) * 4 + 256);
    const auto& a = ds.affine();
    out += kDatasetMagic;
    out += " v" + std::to_string(kDatasetVersion);
    out += " grid_side=" + std::to_string(ds.grid_side());
    out += " traj_len=" + std::to_string(ds.traj_len());
    out += " cell_extent=" + format_double(ds.cell_extent());
    out += " split=" + to_string(ds.split());
    out += " affine=" + format_double(a.offset[0]) + "," + format_double(a.offset[1]) + "," +
           format_double(a.scale[0]) + "," + format_double(a.scale[1]);
    out += "\n";
    for (const auto& t : ds.trajectories()) {
        for (std::size_t i = 0; i < t.length(); ++i) {
            if (i) out += ',';
            out += std::to_string(t.locs[i].index);
        }
        out += '\n';
    }
    return out;
}

TrajectoryDataset parse_dataset(const std::string& text) {
    std::istringstream in(text);
    std::string header;
    if (!std::getline(in, header) || header.rfind(kDatasetMagic, 0) != 0) {
        throw IoError("dataset: missing '#mobgen-dataset' header");
    }
    int grid_side = -1;
    int traj_len = -1;
    double cell_extent = -1.0;
    SplitTag split_tag = SplitTag::train;
    DataAffine affine;
    bool have_affine = false;
    std::istringstream hs(header);
    std::string token;
    hs >> token;  // magic
    hs >> token;  // version
    if (token != "v" + std::to_string(kDatasetVersion)) {
        throw IoError("dataset: unsupported version '" + token + "'");
    }
    while (hs >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) {
            throw IoError("dataset: malformed header token '" + token + "'");
        }
        const auto key = token.substr(0, eq);
        const auto val = token.substr(eq + 1);
        if (key == "grid_side") {
            grid_side = static_cast<int>(parse_u32(val));
        } else if (key == "traj_len") {
            traj_len = static_cast<int>(parse_u32(val));
        } else if (key == "cell_extent") {
            cell_extent = parse_double(val);
        } else if (key == "split") {
            split_tag = split_from_string(val);
        } else if (key == "affine") {
            const auto parts = split(val, ',');
            if (parts.size() != 4) {
                throw IoError("dataset: affine needs 4 values");
            }
            affine.offset = {parse_double(parts[0]), parse_double(parts[1])};
            affine.scale = {parse_double(parts[2]), parse_double(parts[3])};
            have_affine = true;
        }
    }
    if (grid_side < 1 || traj_len < 1 || !(cell_extent > 0.0) || !have_affine) {
        throw IoError("dataset: header must define grid_side, traj_len, cell_extent and affine");
    }
    std::vector<Trajectory> trajs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Trajectory t;
        for (const auto& f : split(line, ',')) {
            t.locs.push_back(LocId{parse_u32(f)});
        }
        trajs.push_back(std::move(t));
    }
    return TrajectoryDataset(grid_side, cell_extent, traj_len, split_tag, std::move(trajs), affine);
}

void write_dataset(const std::filesystem::path& path, const TrajectoryDataset& ds,
                   std::optional<std::uint64_t> seed) {
    write_with_sidecar(path, serialize_dataset(ds), seed, "dataset",
                       {{"split", to_string(ds.split())}, {"count", ds.size()}});
}

TrajectoryDataset read_dataset(const std::filesystem::path& path) {
    try {
        return parse_dataset(read_verified(path));
    } catch (const InvalidArgument& e) {
        throw IoError("dataset '" + path.string() + "': " + e.what());
    }
}

std::string serialize_flows_csv(const FlowMatrix& f) {
    std::string out;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const auto r = f.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) {
            if (j) out += ',';
            out += format_double(r[j]);
        }
        out += '\n';
    }
    return out;
}

FlowMatrix parse_flows_csv(const std::string& text, bool include_self) {
    std::istringstream in(text);
    std::string line;
    std::vector<double> values;
    std::size_t rows = 0;
    std::size_t cols = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto parts = split(line, ',');
        if (rows == 0) {
            cols = parts.size();
        } else if (parts.size() != cols) {
            throw IoError("flows csv: ragged row " + std::to_string(rows));
        }
        for (const auto& p : parts) values.push_back(parse_double(p));
        ++rows;
    }
    if (rows != cols || rows == 0) {
        throw IoError("flows csv: expected a nonempty square matrix");
    }
    return FlowMatrix(rows, std::move(values), include_self);
}

void write_flows(const std::filesystem::path& path, const FlowMatrix& f, std::optional<std::uint64_t> seed) {
    write_with_sidecar(path, serialize_flows_csv(f), seed, "flows",
                       {{"n", f.size()}, {"include_self", f.include_self()}});
}

FlowMatrix read_flows(const std::filesystem::path& path) {
    return parse_flows_csv(read_verified(path));
}

}  // namespace mobgen
