#include <gtest/gtest.h>

#include <cmath>

#include "mobgen/error.hpp"
#include "mobgen/optimizer.hpp"

namespace {

using namespace mobgen;

TEST(OneCycle, EndpointsAndShape) {
    OptimizerConfig c;
    c.lr = 5e-4;
    const long total = 100;
    EXPECT_DOUBLE_EQ(one_cycle_lr(0, total, c), 5e-4 / 25.0);
    EXPECT_DOUBLE_EQ(one_cycle_lr(29, total, c), 5e-4);
    EXPECT_NEAR(one_cycle_lr(99, total, c), 5e-4 / 25.0 / 1e4, 1e-20);
    for (long s = 1; s <= 29; ++s) EXPECT_GT(one_cycle_lr(s, total, c), one_cycle_lr(s - 1, total, c));
    for (long s = 30; s <= 99; ++s) EXPECT_LT(one_cycle_lr(s, total, c), one_cycle_lr(s - 1, total, c));
    // Halfway through the warm-up the cosine sits at the arithmetic mean.
    OptimizerConfig d = c;
    d.pct_start = 0.5;
    EXPECT_NEAR(one_cycle_lr(50, 202, d), 0.5 * (5e-4 / 25.0 + 5e-4), 1e-18);
}

TEST(Sgd, FirstStepByHand) {
    OptimizerConfig c;
    c.kind = OptimizerKind::sgd;
    Optimizer opt(c, 2, 100);
    std::vector<double> p{1.0, -2.0};
    opt.step(p, {0.5, 0.0});
    const double lr0 = 5e-4 / 25.0;
    EXPECT_DOUBLE_EQ(p[0], 1.0 - lr0 * (0.5 + 0.03 * 1.0));
    EXPECT_DOUBLE_EQ(p[1], -2.0 - lr0 * (0.03 * -2.0));
    const double m0 = 0.5 + 0.03;
    const double before = p[0];
    const double lr1 = one_cycle_lr(1, 100, c);
    opt.step(p, {0.5, 0.0});
    EXPECT_DOUBLE_EQ(p[0], before - lr1 * (0.9 * m0 + 0.5 + 0.03 * before));
    EXPECT_EQ(opt.steps_taken(), 2);
}

TEST(AdamW, FirstStepMovesByLearningRate) {
    OptimizerConfig c;
    c.kind = OptimizerKind::adamw;
    c.lr = 1e-2;
    Optimizer opt(c, 2, 10);
    std::vector<double> p{1.0, 1.0};
    opt.step(p, {3.0, -0.25});
    const double lr0 = 1e-2 / 25.0;
    const double decayed = 1.0 - lr0 * 0.03;
    EXPECT_NEAR(p[0], decayed - lr0 * 3.0 / (3.0 + 1e-8), 1e-15);
    EXPECT_NEAR(p[1], decayed + lr0 * 0.25 / (0.25 + 1e-8), 1e-15);
}

TEST(Optimizer, ClipsGlobalNorm) {
    OptimizerConfig c;
    c.kind = OptimizerKind::sgd;
    c.weight_decay = 0.0;
    c.grad_clip = 1.0;
    Optimizer opt(c, 2, 10);
    std::vector<double> p{0.0, 0.0};
    opt.step(p, {6.0, 8.0});
    EXPECT_DOUBLE_EQ(opt.last_grad_norm(), 10.0);
    const double lr0 = c.lr / 25.0;
    EXPECT_NEAR(p[0], -lr0 * 0.6, 1e-18);
    EXPECT_NEAR(p[1], -lr0 * 0.8, 1e-18);
}

TEST(Optimizer, RejectsBadInput) {
    OptimizerConfig c;
    Optimizer opt(c, 2, 10);
    std::vector<double> p{0.0, 0.0};
    EXPECT_THROW(opt.step(p, {1.0}), InvalidArgument);
    EXPECT_THROW(opt.step(p, {std::nan(""), 0.0}), NumericError);
    OptimizerConfig bad;
    bad.lr = -1.0;
    EXPECT_THROW(bad.validate(), Error);
    bad = {};
    bad.pct_start = 1.5;
    EXPECT_THROW(bad.validate(), Error);
}

TEST(Optimizer, BothKindsMinimizeAQuadratic) {
    for (auto kind : {OptimizerKind::sgd, OptimizerKind::adamw}) {
        OptimizerConfig c;
        c.kind = kind;
        c.lr = kind == OptimizerKind::sgd ? 0.05 : 0.1;
        c.weight_decay = 0.0;
        const long steps = 400;
        Optimizer opt(c, 3, steps);
        std::vector<double> p{3.0, -2.0, 1.0};
        const std::vector<double> scale{1.0, 2.0, 0.5};
        for (long s = 0; s < steps; ++s) {
            std::vector<double> g(3);
            for (int i = 0; i < 3; ++i) g[static_cast<std::size_t>(i)] = scale[static_cast<std::size_t>(i)] * p[static_cast<std::size_t>(i)];
            opt.step(p, g);
        }
        for (double v : p) EXPECT_LT(std::abs(v), 1e-2) << to_string(kind);
    }
}

TEST(OptimizerConfig, JsonRoundTrip) {
    OptimizerConfig c;
    c.kind = OptimizerKind::adamw;
    c.lr = 2e-3;
    c.grad_clip = 1.5;
    const auto back = optimizer_config_from_json(to_json(c));
    EXPECT_EQ(back.kind, c.kind);
    EXPECT_EQ(back.lr, c.lr);
    EXPECT_EQ(back.grad_clip, c.grad_clip);
    EXPECT_EQ(to_json(back), to_json(c));
    EXPECT_EQ(optimizer_kind_from_string("sgd"), OptimizerKind::sgd);
    EXPECT_THROW(optimizer_kind_from_string("lion"), Error);
}

}  // namespace
