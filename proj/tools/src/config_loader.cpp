#include "mobgen_cli/config_loader.hpp"

#include <charconv>
#include <cstdlib>

#include <yaml-cpp/yaml.h>

#include "mobgen/error.hpp"
#include "mobgen/io.hpp"
#include "mobgen/rng.hpp"

namespace mobgen::cli {

namespace {

nlohmann::json plain_scalar(const std::string& s) {
    if (s == "true" || s == "True" || s == "TRUE") return true;
    if (s == "false" || s == "False" || s == "FALSE") return false;
    if (s.empty() || s == "~" || s == "null" || s == "Null" || s == "NULL") return nullptr;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') ++first;
    long long i = 0;
    auto [pi, ei] = std::from_chars(first, last, i);
    if (ei == std::errc() && pi == last) return i;
    unsigned long long u = 0;
    auto [pu, eu] = std::from_chars(first, last, u);
    if (eu == std::errc() && pu == last) return u;
    double d = 0.0;
    auto [pd, ed] = std::from_chars(first, last, d);
    if (ed == std::errc() && pd == last) return d;
    return s;
}

nlohmann::json convert(const YAML::Node& n) {
    switch (n.Type()) {
        case YAML::NodeType::Null:
        case YAML::NodeType::Undefined:
            return nullptr;
        case YAML::NodeType::Scalar:
            // yaml-cpp tags quoted scalars with "!" and plain ones with "?".
            if (n.Tag() == "!") return n.Scalar();
            return plain_scalar(n.Scalar());
        case YAML::NodeType::Sequence: {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& item : n) arr.push_back(convert(item));
            return arr;
        }
        case YAML::NodeType::Map: {
            nlohmann::json obj = nlohmann::json::object();
            for (const auto& kv : n) {
                const auto key = kv.first.as<std::string>();
                if (obj.contains(key)) {
                    throw ConfigError("duplicate key '" + key + "' at line " + std::to_string(kv.first.Mark().line + 1));
                }
                obj[key] = convert(kv.second);
            }
            return obj;
        }
    }
    return nullptr;
}

bool has_suffix(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

nlohmann::json yaml_to_json(const std::string& text) {
    try {
        const YAML::Node root = YAML::Load(text);
        if (!root.IsDefined() || root.IsNull()) return nlohmann::json::object();
        return convert(root);
    } catch (const YAML::Exception& e) {
        throw ConfigError("YAML syntax error at line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
}

std::optional<std::uint64_t> seed_override() {
    const char* v = std::getenv(kSeedEnv);
    if (!v || !*v) return std::nullopt;
    const std::string s(v);
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || p != s.data() + s.size()) {
        throw ConfigError(std::string(kSeedEnv) + ": expected a non-negative integer, got '" + s + "'");
    }
    return out;
}

void apply_master_seed(RunConfig& cfg, std::uint64_t master) {
    cfg.city.seed = derive_seed(master, 1);
    cfg.data.seed = derive_seed(master, 2);
    cfg.train.seed = derive_seed(master, 3);
    cfg.train.init_seed = derive_seed(master, 4);
    cfg.generate.seed = derive_seed(master, 5);
}

RunConfig load_run_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw IoError("config file not found: " + path.string());
    }
    const std::string text = read_text_file(path);
    const std::string name = path.filename().string();
    nlohmann::json tree;
    if (has_suffix(name, ".json")) {
        try {
            tree = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError(path.string() + ": JSON syntax error: " + e.what());
        }
    } else if (has_suffix(name, ".yaml") || has_suffix(name, ".yml")) {
        tree = yaml_to_json(text);
    } else {
        throw ConfigError(path.string() + ": unknown config extension (expected .yaml, .yml or .json)");
    }
    RunConfig cfg = run_config_from_json(tree);
    if (auto s = seed_override()) apply_master_seed(cfg, *s);
    cfg.validate();
    return cfg;
}

}  // namespace mobgen::cli
