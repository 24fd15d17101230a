#include "mobgen/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "mobgen/error.hpp"
#include "mobgen/hash.hpp"
#include "mobgen/io.hpp"

namespace mobgen {

namespace {

constexpr char kMagic[8] = {'M', 'O', 'B', 'G', 'E', 'N', 'C', 'K'};

template <class T>
void put_le(std::string& out, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <class T>
T get_le(const std::string& in, std::size_t pos) {
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        v |= static_cast<T>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    }
    return v;
}

std::string checksum(const std::string& bytes, std::size_t len) {
    const auto d = sha256(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), len));
    return std::string(reinterpret_cast<const char*>(d.data()), d.size());
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ck) {
    if (ck.params.count() != UNet1D<double>(ck.config).param_count()) {
        throw InvalidArgument("checkpoint: parameter count does not match the configuration");
    }
    nlohmann::json h;
    h["config"] = to_json(ck.config);
    h["edm"] = {{"sigma_data", ck.edm.sigma_data}, {"p_mean", ck.edm.p_mean}, {"p_std", ck.edm.p_std}};
    h["schedule"] = {{"K", ck.schedule.K},
                     {"beta", ck.schedule.beta},
                     {"spacing", ck.schedule.spacing},
                     {"hash", ck.schedule.hash()}};
    h["affine"] = {{"offset", ck.affine.offset}, {"scale", ck.affine.scale}};
    auto& table = h["params"];
    table = nlohmann::json::array();
    for (const auto& s : ck.params.specs) {
        table.push_back({{"name", s.name}, {"rows", s.rows}, {"cols", s.cols}, {"offset", s.offset}});
    }
    h["init_seed"] = ck.params.init_seed;
    h["manifest"] = ck.manifest;
    const std::string header = h.dump();

    std::string out(kMagic, sizeof(kMagic));
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint64_t>(out, header.size());
    out += header;
    out.reserve(out.size() + 4 * ck.params.count() + 32);
    for (double v : ck.params.values) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    out += checksum(out, out.size());
    return out;
}

Checkpoint parse_checkpoint(const std::string& bytes) {
    constexpr std::size_t fixed = sizeof(kMagic) + 4 + 8;
    if (bytes.size() < fixed + 32 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw IoError("checkpoint: not a mobgen checkpoint");
    }
    if (checksum(bytes, bytes.size() - 32) != bytes.substr(bytes.size() - 32)) {
        throw IoError("checkpoint: checksum mismatch (file corrupted)");
    }
    const auto version = get_le<std::uint32_t>(bytes, sizeof(kMagic));
    if (version != kCheckpointVersion) {
        throw IoError("checkpoint: unsupported format version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
    }
    const auto header_len = get_le<std::uint64_t>(bytes, sizeof(kMagic) + 4);
    if (header_len > bytes.size() - fixed - 32) {
        throw IoError("checkpoint: header length exceeds file size");
    }
    Checkpoint ck;
    try {
        const auto h = nlohmann::json::parse(bytes.substr(fixed, header_len));
        ck.config = denoiser_config_from_json(h.at("config"));
        const auto& e = h.at("edm");
        ck.edm = {e.at("sigma_data").get<double>(), e.at("p_mean").get<double>(), e.at("p_std").get<double>()};
        ck.schedule = make_vp_schedule(h.at("schedule").at("beta").get<std::vector<double>>());
        ck.schedule.spacing = h.at("schedule").at("spacing").get<double>();
        ck.affine.offset = h.at("affine").at("offset").get<std::array<double, 2>>();
        ck.affine.scale = h.at("affine").at("scale").get<std::array<double, 2>>();
        ck.params.init_seed = h.at("init_seed").get<std::uint64_t>();
        ck.manifest = h.value("manifest", nlohmann::json::object());
        const UNet1D<double> net(ck.config);
        ck.params.specs = net.layout();
        const auto& table = h.at("params");
        if (table.size() != ck.params.specs.size()) {
            throw IoError("checkpoint: parameter table does not match the configuration");
        }
        for (std::size_t i = 0; i < table.size(); ++i) {
            const auto& s = ck.params.specs[i];
            if (table[i].at("name").get<std::string>() != s.name || table[i].at("rows").get<int>() != s.rows ||
                table[i].at("cols").get<int>() != s.cols) {
                throw IoError("checkpoint: parameter '" + s.name + "' does not match the configuration");
            }
        }
    } catch (const nlohmann::json::exception& ex) {
        throw IoError(std::string("checkpoint: malformed header: ") + ex.what());
    } catch (const InvalidArgument& ex) {
        throw IoError(std::string("checkpoint: invalid header: ") + ex.what());
    }
    const std::size_t n = ck.params.specs.empty() ? 0 : ck.params.specs.back().offset + ck.params.specs.back().size();
    const std::size_t data_pos = fixed + header_len;
    if (bytes.size() - 32 - data_pos != 4 * n) {
        throw IoError("checkpoint: parameter block has the wrong size");
    }
    ck.params.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        ck.params.values[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, data_pos + 4 * i));
    }
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    write_text_file(path, serialize_checkpoint(ck));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return parse_checkpoint(read_text_file(path));
}

}  // namespace mobgen
