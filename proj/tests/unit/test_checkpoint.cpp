#include <gtest/gtest.h>

#include "mobgen/checkpoint.hpp"
#include "mobgen/error.hpp"
#include "mobgen/hash.hpp"
#include "mobgen/io.hpp"
#include "mobgen/model.hpp"
#include "test_support.hpp"

namespace {

using namespace mobgen;
using mobgen::testing::random_batch;
using mobgen::testing::scratch_dir;

DenoiserConfig small_config() {
    DenoiserConfig c;
    c.traj_len = 8;
    c.hidden_dim = 8;
    c.channel_mult = {1, 2};
    c.freq_bands = 8;
    c.emb_mult = 2;
    return c;
}

Checkpoint sample_checkpoint() {
    Checkpoint ck;
    ck.config = small_config();
    ck.params = init_params(ck.config, 3);
    randomize_params(ck.params, 4, 0.2);
    ck.params.round_to_float();
    ck.schedule = make_vp_schedule(50, 1e-4, 0.02);
    ck.schedule.spacing = 1.5;
    ck.affine.offset = {0.25, -0.125};
    ck.affine.scale = {0.3, 0.7};
    ck.edm.p_mean = -1.0;
    ck.manifest = {{"moving_probability", std::vector<double>(8, 0.1)}, {"note", "unit"}};
    return ck;
}

TEST(Checkpoint, RoundTripIsExact) {
    const auto ck = sample_checkpoint();
    const auto back = parse_checkpoint(serialize_checkpoint(ck));
    EXPECT_EQ(back.params.values, ck.params.values);
    EXPECT_EQ(back.params.count(), ck.params.count());
    EXPECT_EQ(back.params.init_seed, ck.params.init_seed);
    EXPECT_EQ(to_json(back.config), to_json(ck.config));
    EXPECT_EQ(back.schedule.beta, ck.schedule.beta);
    EXPECT_EQ(back.schedule.alpha_bar, ck.schedule.alpha_bar);
    EXPECT_EQ(back.schedule.spacing, 1.5);
    EXPECT_EQ(back.schedule.hash(), ck.schedule.hash());
    EXPECT_EQ(back.affine, ck.affine);
    EXPECT_EQ(back.edm.p_mean, -1.0);
    EXPECT_EQ(back.manifest, ck.manifest);
    EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(ck));
}

TEST(Checkpoint, ReloadedModelDenoisesIdentically) {
    const auto ck = sample_checkpoint();
    const auto dir = scratch_dir("ck");
    save_checkpoint(dir / "m.ckpt", ck);
    const auto back = load_checkpoint(dir / "m.ckpt");
    const DenoiserModel a(ck.config, ck.params, ck.edm);
    const DenoiserModel b(back.config, back.params, back.edm);
    const TrajBatch x = random_batch(2, 3 * 8, 5, 0.1);
    Eigen::VectorXd sigma(3);
    sigma << 0.05, 0.5, 5.0;
    BatchCondition cond;
    cond.start = {{0.1, 0.2}, {-0.3, 0.0}, {0.0, 0.05}};
    cond.is_null = {0, 1, 0};
    EXPECT_EQ(a.denoise(x, sigma, cond), b.denoise(x, sigma, cond));
}

TEST(Checkpoint, DetectsCorruption) {
    const std::string bytes = serialize_checkpoint(sample_checkpoint());
    std::string flipped = bytes;
    flipped[bytes.size() / 2] = static_cast<char>(flipped[bytes.size() / 2] ^ 0x01);
    EXPECT_THROW(parse_checkpoint(flipped), IoError);
    EXPECT_THROW(parse_checkpoint(bytes.substr(0, bytes.size() - 1)), IoError);
    EXPECT_THROW(parse_checkpoint("MOBGENCK"), IoError);
    std::string magic = bytes;
    magic[0] = 'X';
    EXPECT_THROW(parse_checkpoint(magic), IoError);
}

TEST(Checkpoint, RejectsOtherVersions) {
    std::string bytes = serialize_checkpoint(sample_checkpoint());
    bytes[8] = 2;
    // Recompute the trailing checksum so only the version differs.
    const std::string body = bytes.substr(0, bytes.size() - 32);
    const auto digest = sha256(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(body.data()),
                                                            body.size()));
    const std::string fixed = body + std::string(digest.begin(), digest.end());
    try {
        parse_checkpoint(fixed);
        FAIL();
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("version"), std::string::npos) << e.what();
    }
}

TEST(Checkpoint, MissingFileIsIoError) {
    EXPECT_THROW(load_checkpoint("/nonexistent/dir/model.ckpt"), IoError);
}

/// Independent parameter count of the encoder-decoder from its shape rules.
std::size_t expected_param_count(const DenoiserConfig& c) {
    const std::size_t h = static_cast<std::size_t>(c.hidden_dim);
    const std::size_t e = static_cast<std::size_t>(c.emb_mult) * h;
    const std::size_t f = static_cast<std::size_t>(c.freq_bands);
    auto res = [&](std::size_t in, std::size_t out) {
        std::size_t n = 2 * in + out * 3 * in + out + out * e + out + 2 * out + out * 3 * out + out;
        if (in != out) n += out * in + out;
        return n;
    };
    std::size_t n = (e * f + e) + (e * e + e) + (2 * e + e) + e;
    n += h * 3 * static_cast<std::size_t>(c.channels) + h;
    std::size_t ch = h;
    std::vector<std::size_t> skips;
    for (int m : c.channel_mult) {
        const std::size_t out = h * static_cast<std::size_t>(m);
        for (int j = 0; j < c.blocks_per_stage; ++j) {
            n += res(ch, out);
            ch = out;
        }
        skips.push_back(ch);
    }
    n += 2 * res(ch, ch) + 2 * ch + 3 * ch * ch + 3 * ch + ch * ch + ch;
    for (std::size_t s = c.channel_mult.size(); s-- > 0;) {
        const std::size_t out = h * static_cast<std::size_t>(c.channel_mult[s]);
        n += res(ch + skips[s], out);
        ch = out;
        for (int j = 1; j < c.blocks_per_stage; ++j) n += res(ch, ch);
    }
    n += 2 * ch + static_cast<std::size_t>(c.channels) * 3 * ch + static_cast<std::size_t>(c.channels);
    return n;
}

TEST(ParamCount, DeskConfigurationsArePinned) {
    DenoiserConfig desk;
    desk.hidden_dim = 32;
    EXPECT_EQ(expected_param_count(desk), 616770u);
    EXPECT_EQ(init_params(desk, 1).count(), 616770u);
    DenoiserConfig wide;
    EXPECT_EQ(expected_param_count(wide), 2431618u);
    EXPECT_EQ(init_params(wide, 1).count(), 2431618u);
    EXPECT_EQ(init_params(small_config(), 1).count(), expected_param_count(small_config()));
}

}  // namespace
