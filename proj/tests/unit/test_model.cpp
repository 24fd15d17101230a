#include <gtest/gtest.h>

#include <cmath>

#include "mobgen/error.hpp"
#include "mobgen/model.hpp"
#include "mobgen/optimizer.hpp"
#include "test_support.hpp"

namespace {

using namespace mobgen;
using mobgen::testing::random_batch;

DenoiserConfig tiny_config() {
    DenoiserConfig cfg;
    cfg.traj_len = 8;
    cfg.hidden_dim = 8;
    cfg.channel_mult = {1, 2};
    cfg.freq_bands = 8;
    cfg.emb_mult = 2;
    return cfg;
}

BatchCondition mixed_condition(std::size_t b, std::uint64_t seed) {
    Rng rng(seed);
    BatchCondition c;
    for (std::size_t i = 0; i < b; ++i) {
        c.start.push_back(Coord{0.1 * standard_normal(rng), 0.1 * standard_normal(rng)});
        c.is_null.push_back(i % 3 == 2 ? 1 : 0);
    }
    return c;
}

Eigen::VectorXd sigmas(std::size_t b, std::uint64_t seed) {
    Rng rng(seed);
    return sample_edm_sigmas(b, rng);
}

DenoiserModel random_model(Precision prec, std::uint64_t seed = 3) {
    const auto cfg = tiny_config();
    auto p = init_params(cfg, 1);
    randomize_params(p, seed, 0.5);
    p.round_to_float();
    return DenoiserModel(cfg, p, EdmConfig{}, prec);
}

TEST(GuidedEps, HandCombinations) {
    TrajBatch c(1, 3);
    c << 1.0, -2.0, 0.5;
    TrajBatch n(1, 3);
    n << 0.25, 4.0, -1.0;
    EXPECT_EQ(guided_eps(c, n, 1.0), c);
    EXPECT_EQ(guided_eps(c, n, 0.0), n);
    const auto g = guided_eps(c, n, 3.0);
    EXPECT_NEAR(g(0, 0), 2.5, 1e-12);
    EXPECT_NEAR(g(0, 1), -14.0, 1e-12);
    EXPECT_NEAR(g(0, 2), 3.5, 1e-12);
    EXPECT_THROW(guided_eps(c, TrajBatch(1, 2), 3.0), InvalidArgument);
}

TEST(DenoiserModel, ZeroInitIsSkipOnly) {
    const auto cfg = tiny_config();
    const DenoiserModel m(cfg, init_params(cfg, 5));
    const auto x = random_batch(2, 4 * 8, 6, 0.3);
    const auto s = sigmas(4, 7);
    const auto d = m.denoise(x, s, mixed_condition(4, 8));
    for (Eigen::Index b = 0; b < 4; ++b) {
        const double c_skip = edm_coefficients(s(b)).c_skip;
        for (Eigen::Index t = 0; t < 8; ++t) {
            for (Eigen::Index ch = 0; ch < 2; ++ch) {
                EXPECT_NEAR(d(ch, b * 8 + t), c_skip * x(ch, b * 8 + t), 1e-6 * std::abs(x(ch, b * 8 + t)) + 1e-12);
            }
        }
    }
}

TEST(DenoiserModel, GuidanceCombinesConditionalAndNull) {
    auto m = random_model(Precision::f64);
    m.set_guidance_scale(3.0);
    const auto x = random_batch(2, 6 * 8, 9, 0.3);
    const auto s = sigmas(6, 10);
    const auto cond = mixed_condition(6, 11);
    const auto guided = m.denoise(x, s, cond);
    const auto dc = m.denoise_unguided(x, s, cond);
    const auto dn = m.denoise_unguided(x, s, BatchCondition::null_batch(6));
    for (Eigen::Index b = 0; b < 6; ++b) {
        const auto cols = Eigen::seqN(b * 8, 8);
        if (cond.is_null[static_cast<std::size_t>(b)]) {
            EXPECT_LT((guided(Eigen::all, cols) - dn(Eigen::all, cols)).cwiseAbs().maxCoeff(), 1e-14);
        } else {
            const TrajBatch expect = dn(Eigen::all, cols) + 3.0 * (dc(Eigen::all, cols) - dn(Eigen::all, cols));
            EXPECT_LT((guided(Eigen::all, cols) - expect).cwiseAbs().maxCoeff(), 1e-12);
        }
    }
    m.set_guidance_scale(1.0);
    EXPECT_LT((m.denoise(x, s, cond) - dc).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(DenoiserModel, LossGradientMatchesDirectionalDifference) {
    auto m = random_model(Precision::f64, 12);
    const auto x0 = random_batch(2, 4 * 8, 13, 0.1);
    const auto noise = random_batch(2, 4 * 8, 14);
    const auto s = sigmas(4, 15);
    const auto cond = mixed_condition(4, 16);
    Eigen::VectorXd w(4);
    w << 1.0, 0.5, 2.0, 1.5;
    std::vector<double> g;
    m.loss(x0, cond, s, noise, &g, &w);
    Rng rng(17);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> v(g.size());
        for (auto& e : v) e = standard_normal(rng);
        const auto base = m.params().values;
        const double h = 1e-5;
        auto& vals = m.mutable_values();
        for (std::size_t i = 0; i < v.size(); ++i) vals[i] = base[i] + h * v[i];
        m.sync();
        const double lp = m.loss(x0, cond, s, noise, nullptr, &w);
        for (std::size_t i = 0; i < v.size(); ++i) vals[i] = base[i] - h * v[i];
        m.sync();
        const double lm = m.loss(x0, cond, s, noise, nullptr, &w);
        vals = base;
        m.sync();
        double gv = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) gv += g[i] * v[i];
        EXPECT_NEAR((lp - lm) / (2 * h), gv, 1e-6 * std::abs(gv) + 1e-9);
    }
}

TEST(DenoiserModel, MicroBatchesSumToFullBatch) {
    const auto m = random_model(Precision::f64, 18);
    const auto x0 = random_batch(2, 8 * 8, 19, 0.1);
    const auto noise = random_batch(2, 8 * 8, 20);
    const auto s = sigmas(8, 21);
    const auto cond = mixed_condition(8, 22);
    std::vector<double> g_full;
    const double l_full = m.loss(x0, cond, s, noise, &g_full);
    double l_sum = 0.0;
    std::vector<double> g_sum(g_full.size(), 0.0);
    for (int part = 0; part < 2; ++part) {
        const auto cols = Eigen::seqN(part * 32, 32);
        BatchCondition c;
        c.start.assign(cond.start.begin() + part * 4, cond.start.begin() + part * 4 + 4);
        c.is_null.assign(cond.is_null.begin() + part * 4, cond.is_null.begin() + part * 4 + 4);
        std::vector<double> g;
        l_sum += m.loss(x0(Eigen::all, cols), c, s.segment(part * 4, 4), noise(Eigen::all, cols), &g, nullptr, 8.0);
        for (std::size_t i = 0; i < g.size(); ++i) g_sum[i] += g[i];
    }
    EXPECT_NEAR(l_sum, l_full, 1e-12 * l_full);
    for (std::size_t i = 0; i < g_full.size(); ++i) ASSERT_NEAR(g_sum[i], g_full[i], 1e-10 * (1.0 + std::abs(g_full[i])));
}

TEST(DenoiserModel, WeightsScaleTheLoss) {
    const auto m = random_model(Precision::f64, 23);
    const auto x0 = random_batch(2, 3 * 8, 24, 0.1);
    const auto noise = random_batch(2, 3 * 8, 25);
    const auto s = sigmas(3, 26);
    const auto cond = mixed_condition(3, 27);
    const Eigen::VectorXd two = Eigen::VectorXd::Constant(3, 2.0);
    EXPECT_NEAR(m.loss(x0, cond, s, noise, nullptr, &two), 2.0 * m.loss(x0, cond, s, noise), 1e-14);
    const Eigen::VectorXd wrong = Eigen::VectorXd::Ones(2);
    EXPECT_THROW(m.loss(x0, cond, s, noise, nullptr, &wrong), InvalidArgument);
}

TEST(DenoiserModel, ZeroInitLossMatchesAnalyticExpectation) {
    // With D = c_skip x and x0 of per-element variance sd^2 the expected
    // per-element error is sd^2 s^2 / (s^2 + sd^2), averaged over the
    // log-normal noise law by quadrature.
    const auto cfg = tiny_config();
    const DenoiserModel m(cfg, init_params(cfg, 5));
    const EdmConfig edm;
    const double sd = edm.sigma_data;
    double expect = 0.0;
    double mass = 0.0;
    for (int i = -4000; i <= 4000; ++i) {
        const double u = i * 1e-3;
        const double dens = std::exp(-0.5 * u * u);
        const double s = std::exp(edm.p_mean + edm.p_std * u);
        expect += dens * sd * sd * s * s / (s * s + sd * sd);
        mass += dens;
    }
    expect = 2.0 * 8.0 * expect / mass;
    const std::size_t B = 4096;
    const auto x0 = random_batch(2, static_cast<Eigen::Index>(B) * 8, 28, sd);
    Rng rng(29);
    const double measured = edm_loss(m, x0, BatchCondition::null_batch(B), rng, edm);
    EXPECT_NEAR(measured / expect, 1.0, 0.1);
}

TEST(DenoiserModel, FirstOptimizerStepDecreasesLoss) {
    const auto cfg = tiny_config();
    DenoiserModel m(cfg, init_params(cfg, 30), EdmConfig{}, Precision::f64);
    const auto x0 = random_batch(2, 16 * 8, 31, 0.1);
    const auto noise = random_batch(2, 16 * 8, 32);
    const auto s = sigmas(16, 33);
    const auto cond = mixed_condition(16, 34);
    for (auto kind : {OptimizerKind::sgd, OptimizerKind::adamw}) {
        DenoiserModel model(cfg, init_params(cfg, 30), EdmConfig{}, Precision::f64);
        std::vector<double> g;
        const double before = model.loss(x0, cond, s, noise, &g);
        OptimizerConfig oc;
        oc.kind = kind;
        oc.lr = kind == OptimizerKind::sgd ? 0.05 : 1e-3;
        Optimizer opt(oc, g.size(), 100);
        opt.step(model.mutable_values(), g);
        model.sync();
        EXPECT_LT(model.loss(x0, cond, s, noise), before) << to_string(kind);
    }
}

TEST(DenoiserModel, SinglePrecisionTracksDouble) {
    const auto a = random_model(Precision::f32, 35);
    const auto b = random_model(Precision::f64, 35);
    const auto x = random_batch(2, 4 * 8, 36, 0.2);
    const auto s = sigmas(4, 37);
    const auto cond = mixed_condition(4, 38);
    const auto da = a.denoise(x, s, cond);
    const auto db = b.denoise(x, s, cond);
    EXPECT_LT((da - db).cwiseAbs().maxCoeff(), 1e-4 * (1.0 + db.cwiseAbs().maxCoeff()));
}

TEST(DenoiserModel, RejectsShapeMismatch) {
    const auto m = random_model(Precision::f64, 39);
    const auto x0 = random_batch(2, 4 * 8, 40, 0.1);
    const auto s = sigmas(3, 41);
    EXPECT_THROW(m.loss(x0, mixed_condition(3, 42), s, x0), InvalidArgument);
    EXPECT_THROW(DenoiserModel(tiny_config(), ParamStore{}), InvalidArgument);
}

}  // namespace
