#include <cstdlib>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "mobgen/error.hpp"
#include "mobgen/hash.hpp"
#include "mobgen/io.hpp"
#include "mobgen/metrics.hpp"
#include "mobgen_cli/commands.hpp"
#include "mobgen_cli/config_loader.hpp"
#include "mobgen_cli/manifest.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace mobgen;
using namespace mobgen::cli;
using mobgen::testing::scratch_dir;

namespace {

const fs::path kCiConfig = fs::path(MOBGEN_SOURCE_DIR) / "configs" / "ci.yaml";

class EnvGuard {
public:
    EnvGuard(const char* name, const char* value) : name_(name) {
        if (const char* old = std::getenv(name)) old_ = old;
        if (value) ::setenv(name, value, 1);
        else ::unsetenv(name);
    }
    ~EnvGuard() {
        if (old_) ::setenv(name_, old_->c_str(), 1);
        else ::unsetenv(name_);
    }

private:
    const char* name_;
    std::optional<std::string> old_;
};

int run(const std::vector<std::string>& args, std::string* err = nullptr) {
    ::testing::internal::CaptureStderr();
    ::testing::internal::CaptureStdout();
    const int code = run_cli(args);
    const std::string e = ::testing::internal::GetCapturedStderr();
    const std::string o = ::testing::internal::GetCapturedStdout();
    if (err) *err = e + o;
    return code;
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

std::map<std::string, std::string> hashes(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file()) out[e.path().filename().string()] = sha256_file(e.path());
    }
    return out;
}

/// synth-city -> train -> generate -> evaluate with the CI configuration.
void pipeline(const fs::path& dir) {
    ASSERT_EQ(run({"synth-city", "--config", kCiConfig.string(), "--out", dir.string()}), 0);
    ASSERT_EQ(run({"train", "--config", kCiConfig.string(), "--data", dir.string(), "--out", dir.string()}), 0);
    ASSERT_EQ(run({"generate", "--config", kCiConfig.string(), "--data", dir.string(), "--checkpoint",
                   (dir / kCheckpointFile).string(), "--out", dir.string(), "--ablation", "all"}),
              0);
    ASSERT_EQ(run({"evaluate", "--real", (dir / kHoldoutFile).string(), "--gen", (dir / "gen_full.csv").string(),
                   "--out", dir.string()}),
              0);
}

}  // namespace

TEST(CliUsage, HelpExitsZeroForEveryCommand) {
    for (const char* cmd : {"synth-city", "train", "generate", "evaluate", "privacy", "analyze", "utility-probe"}) {
        std::string out;
        EXPECT_EQ(run({cmd, "--help"}, &out), 0) << cmd;
        EXPECT_NE(out.find("Usage"), std::string::npos) << cmd;
    }
    EXPECT_EQ(run({"--help"}), 0);
}

TEST(CliUsage, MissingConfigOptionIsUsageError) {
    std::string err;
    EXPECT_EQ(run({"train", "--data", "x", "--out", "y"}, &err), 2);
    EXPECT_NE(err.find("--config"), std::string::npos);
}

TEST(CliUsage, MissingSubcommandIsUsageError) { EXPECT_EQ(run({}), 2); }

TEST(CliUsage, MissingConfigFileIsIoError) {
    const auto dir = scratch_dir("cli");
    std::string err;
    EXPECT_EQ(run({"synth-city", "--config", (dir / "absent.yaml").string(), "--out", dir.string()}, &err), 4);
    EXPECT_NE(err.find("absent.yaml"), std::string::npos);
}

TEST(CliUsage, SchemaErrorNamesTheField) {
    const auto dir = scratch_dir("cli");
    write(dir / "bad.yaml", "train:\n  epochs: many\n");
    std::string err;
    EXPECT_EQ(run({"synth-city", "--config", (dir / "bad.yaml").string(), "--out", dir.string()}, &err), 2);
    EXPECT_NE(err.find("train.epochs"), std::string::npos) << err;

    write(dir / "unknown.yaml", "city:\n  grid_sidee: 8\n");
    EXPECT_EQ(run({"synth-city", "--config", (dir / "unknown.yaml").string(), "--out", dir.string()}, &err), 2);
    EXPECT_NE(err.find("city.grid_sidee"), std::string::npos) << err;

    write(dir / "invalid.yaml", "city:\n  grid_side: 1\n");
    EXPECT_EQ(run({"synth-city", "--config", (dir / "invalid.yaml").string(), "--out", dir.string()}, &err), 2);
    EXPECT_NE(err.find("city.grid_side"), std::string::npos) << err;
}

TEST(CliUsage, BadAblationIsUsageError) {
    EXPECT_EQ(run({"generate", "--config", kCiConfig.string(), "--data", ".", "--checkpoint", "x", "--out", ".",
                   "--ablation", "half"}),
              2);
}

TEST(CliUsage, MissingInputsAreIoErrors) {
    const auto dir = scratch_dir("cli");
    EXPECT_EQ(run({"evaluate", "--real", (dir / "r.csv").string(), "--gen", (dir / "g.csv").string(), "--out",
                   dir.string()}),
              4);
    EXPECT_EQ(run({"train", "--config", kCiConfig.string(), "--data", dir.string(), "--out", dir.string()}), 4);
}

TEST(ConfigLoader, YamlScalarsAndQuoting) {
    const auto j = yaml_to_json("a: 3\nb: 2.5\nc: true\nd: \"7\"\ne: [1, 2]\nf: text\ng: ~\nh: 1e-4\n");
    EXPECT_TRUE(j["a"].is_number_integer());
    EXPECT_EQ(j["a"].get<int>(), 3);
    EXPECT_DOUBLE_EQ(j["b"].get<double>(), 2.5);
    EXPECT_TRUE(j["c"].get<bool>());
    EXPECT_TRUE(j["d"].is_string());
    EXPECT_EQ(j["e"], nlohmann::json::array({1, 2}));
    EXPECT_EQ(j["f"], "text");
    EXPECT_TRUE(j["g"].is_null());
    EXPECT_DOUBLE_EQ(j["h"].get<double>(), 1e-4);
}

TEST(ConfigLoader, YamlErrorsAreConfigErrors) {
    EXPECT_THROW(yaml_to_json("a: [1, 2\n"), ConfigError);
    EXPECT_THROW(yaml_to_json("a: 1\na: 2\n"), ConfigError);
}

TEST(ConfigLoader, YamlAndJsonAgree) {
    const auto dir = scratch_dir("cfg");
    const RunConfig from_yaml = load_run_config(kCiConfig);
    write(dir / "ci.json", to_json(from_yaml).dump());
    EXPECT_EQ(config_hash(load_run_config(dir / "ci.json")), config_hash(from_yaml));
    write(dir / "ci.txt", "");
    EXPECT_THROW(load_run_config(dir / "ci.txt"), ConfigError);
}

TEST(ConfigLoader, ConfigsInTreeValidate) {
    for (const char* name : {"ci.yaml", "desk.yaml", "large.yaml"}) {
        EXPECT_NO_THROW(load_run_config(fs::path(MOBGEN_SOURCE_DIR) / "configs" / name)) << name;
    }
}

TEST(ConfigLoader, SeedOverride) {
    const RunConfig base = load_run_config(kCiConfig);
    {
        EnvGuard g(kSeedEnv, "99");
        const RunConfig a = load_run_config(kCiConfig);
        EXPECT_NE(a.city.seed, base.city.seed);
        EXPECT_NE(a.generate.seed, base.generate.seed);
        EXPECT_NE(a.city.seed, a.data.seed);
        EXPECT_EQ(config_hash(a), config_hash(load_run_config(kCiConfig)));
    }
    {
        EnvGuard g(kSeedEnv, "12x");
        EXPECT_THROW(load_run_config(kCiConfig), ConfigError);
    }
    EnvGuard g(kSeedEnv, nullptr);
    EXPECT_EQ(config_hash(load_run_config(kCiConfig)), config_hash(base));
}

TEST(CliPipeline, EmitsDeclaredArtifactsAndManifest) {
    const auto dir = scratch_dir("pipe");
    pipeline(dir);
    ASSERT_EQ(run({"privacy", "--train", (dir / kTrainFile).string(), "--holdout", (dir / kHoldoutFile).string(),
                   "--gen", (dir / "gen_full.csv").string(), "--out", dir.string(), "--members", "64",
                   "--nonmembers", "64", "--svg"}),
              0);
    ASSERT_EQ(run({"analyze", "--checkpoint", (dir / kCheckpointFile).string(), "--data",
                   (dir / kHoldoutFile).string(), "--out", dir.string(), "--steps", "10", "--max", "32"}),
              0);
    ASSERT_EQ(run({"utility-probe", "--real", (dir / kTrainFile).string(), "--gen", (dir / "gen_full.csv").string(),
                   "--test", (dir / kHoldoutFile).string(), "--out", dir.string(), "--mix", "0", "0.25"}),
              0);
    for (const char* f : {"city.json", "flows.csv", "train.csv", "holdout.csv", "model.ckpt", "loss.csv",
                          "gen_full.csv", "gen_no_prior.csv", "gen_no_fusion.csv", "metrics.json", "distributions.csv",
                          "uniqueness.csv", "uniqueness.json", "uniqueness.svg", "mia.json", "noise_analysis.json",
                          "move_scatter.csv", "noise_vectors.csv", "utility.json"}) {
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    }
    const auto lines = read_manifests(dir);
    ASSERT_EQ(lines.size(), 7u);
    const std::vector<std::string> commands{"synth-city", "train",   "generate",     "evaluate",
                                            "privacy",    "analyze", "utility-probe"};
    for (std::size_t i = 0; i < lines.size(); ++i) {
        EXPECT_EQ(lines[i]["command"], commands[i]);
        EXPECT_FALSE(lines[i]["outputs"].empty());
        EXPECT_TRUE(lines[i].contains("timings"));
        EXPECT_EQ(lines[i]["tool_version"], kToolVersion);
    }
    EXPECT_EQ(lines[0]["config_hash"], config_hash(load_run_config(kCiConfig)));
    EXPECT_EQ(lines[1]["seeds"]["train"], load_run_config(kCiConfig).train.seed);
    // Every output of the last write of a file carries that file's checksum.
    std::map<std::string, std::string> last;
    for (const auto& l : lines) {
        for (const auto& o : l["outputs"]) last[o["path"]] = o["sha256"];
    }
    for (const auto& [path, sha] : last) EXPECT_EQ(sha256_file(path), sha) << path;
    const auto metrics = metric_report_from_json(nlohmann::json::parse(read_text_file(dir / "metrics.json")));
    EXPECT_EQ(metrics.n_gen, 64u);
    EXPECT_GE(metrics.cpc, 0.0);
}

TEST(CliPipeline, IdempotentAndByteIdentical) {
    const auto a = scratch_dir("a");
    const auto b = scratch_dir("b");
    pipeline(a);
    pipeline(b);
    const auto ha = hashes(a);
    const auto hb = hashes(b);
    for (const char* f : {"city.json", "flows.csv", "train.csv", "holdout.csv", "model.ckpt", "loss.csv",
                          "gen_full.csv", "gen_no_prior.csv", "gen_no_fusion.csv", "metrics.json",
                          "distributions.csv"}) {
        ASSERT_TRUE(ha.count(f)) << f;
        EXPECT_EQ(ha.at(f), hb.at(f)) << f;
    }
}

TEST(CliPipeline, CommandsDoNotMutateInputs) {
    const auto dir = scratch_dir("inputs");
    const auto out = scratch_dir("outputs");
    ASSERT_EQ(run({"synth-city", "--config", kCiConfig.string(), "--out", dir.string()}), 0);
    const auto before = hashes(dir);
    ASSERT_EQ(run({"train", "--config", kCiConfig.string(), "--data", dir.string(), "--out", out.string()}), 0);
    ASSERT_EQ(run({"generate", "--config", kCiConfig.string(), "--data", dir.string(), "--checkpoint",
                   (out / kCheckpointFile).string(), "--out", out.string(), "--n", "8", "--seed", "5"}),
              0);
    ASSERT_EQ(run({"evaluate", "--real", (dir / kHoldoutFile).string(), "--gen", (out / "gen_full.csv").string(),
                   "--out", out.string()}),
              0);
    EXPECT_EQ(hashes(dir), before);
    EXPECT_EQ(read_dataset(out / "gen_full.csv").size(), 8u);
}

TEST(CliPipeline, CorruptedInputIsIoError) {
    const auto dir = scratch_dir("corrupt");
    ASSERT_EQ(run({"synth-city", "--config", kCiConfig.string(), "--out", dir.string()}), 0);
    std::string text = read_text_file(dir / kHoldoutFile);
    text[text.size() / 2] = text[text.size() / 2] == '1' ? '2' : '1';
    write(dir / kHoldoutFile, text);
    std::string err;
    EXPECT_EQ(run({"evaluate", "--real", (dir / kHoldoutFile).string(), "--gen", (dir / kTrainFile).string(),
                   "--out", dir.string()},
                  &err),
              4);
    EXPECT_NE(err.find("holdout.csv"), std::string::npos) << err;
}

TEST(CliPipeline, SeedOverrideChangesWorld) {
    const auto a = scratch_dir("s1");
    const auto b = scratch_dir("s2");
    ASSERT_EQ(run({"synth-city", "--config", kCiConfig.string(), "--out", a.string()}), 0);
    {
        EnvGuard g(kSeedEnv, "4242");
        ASSERT_EQ(run({"synth-city", "--config", kCiConfig.string(), "--out", b.string()}), 0);
    }
    EXPECT_NE(sha256_file(a / kTrainFile), sha256_file(b / kTrainFile));
}
