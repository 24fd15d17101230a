#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "mobgen/analysis.hpp"
#include "mobgen/error.hpp"
#include "mobgen/rng.hpp"
#include "test_support.hpp"

namespace {

using namespace mobgen;
using mobgen::testing::make_dataset;
using mobgen::testing::random_batch;
using mobgen::testing::scratch_dir;
using mobgen::testing::ZeroEps;

constexpr double kPi = std::numbers::pi;

TEST(LeastSquares, MatchesNormalEquations) {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 5 + static_cast<int>(rng() % 200);
        std::vector<double> x(static_cast<std::size_t>(n));
        std::vector<double> y(x.size());
        Eigen::MatrixXd A(n, 2);
        Eigen::VectorXd b(n);
        for (int i = 0; i < n; ++i) {
            x[static_cast<std::size_t>(i)] = 3.0 * standard_normal(rng) + 1.0;
            y[static_cast<std::size_t>(i)] = -0.7 * x[static_cast<std::size_t>(i)] + 2.0 + standard_normal(rng);
            A(i, 0) = x[static_cast<std::size_t>(i)];
            A(i, 1) = 1.0;
            b(i) = y[static_cast<std::size_t>(i)];
        }
        const Eigen::Vector2d beta = (A.transpose() * A).ldlt().solve(A.transpose() * b);
        const Eigen::VectorXd resid = b - A * beta;
        const double r2 = 1.0 - resid.squaredNorm() / (b.array() - b.mean()).square().sum();
        const auto r = least_squares(x, y);
        EXPECT_NEAR(r.slope, beta(0), 1e-9);
        EXPECT_NEAR(r.intercept, beta(1), 1e-9);
        EXPECT_NEAR(r.r_squared, r2, 1e-9);
        EXPECT_EQ(r.n_points, static_cast<std::size_t>(n));
    }
}

TEST(LeastSquares, EdgeCases) {
    const std::vector<double> x{0, 1, 2, 3};
    const auto exact = least_squares(x, std::vector<double>{1, 3, 5, 7});
    EXPECT_NEAR(exact.slope, 2.0, 1e-15);
    EXPECT_NEAR(exact.intercept, 1.0, 1e-15);
    EXPECT_NEAR(exact.r_squared, 1.0, 1e-15);
    const auto flat = least_squares(x, std::vector<double>{4, 4, 4, 4});
    EXPECT_EQ(flat.slope, 0.0);
    EXPECT_EQ(flat.r_squared, 1.0);
    EXPECT_THROW(least_squares(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), NumericError);
    EXPECT_THROW(least_squares(std::vector<double>{1, 2}, std::vector<double>{1, 2}), InvalidArgument);
    EXPECT_THROW(least_squares(x, std::vector<double>{1, 2, 3}), InvalidArgument);
}

TEST(Pearson, HandValues) {
    const std::vector<double> x{1, 2, 3};
    EXPECT_NEAR(*pearson(x, std::vector<double>{2, 4, 6}), 1.0, 1e-15);
    EXPECT_NEAR(*pearson(x, std::vector<double>{3, 2, 1}), -1.0, 1e-15);
    EXPECT_FALSE(pearson(x, std::vector<double>{5, 5, 5}).has_value());
}

TEST(UnwrapNear, WithinPiAndCongruent) {
    Rng rng(9);
    for (int i = 0; i < 10000; ++i) {
        const double a = (uniform01(rng) - 0.5) * 40.0;
        const double ref = (uniform01(rng) - 0.5) * 2.0 * kPi;
        const double u = unwrap_near(a, ref);
        ASSERT_LE(std::abs(u - ref), kPi + 1e-12);
        const double turns = (u - a) / (2.0 * kPi);
        ASSERT_NEAR(turns, std::round(turns), 1e-9);
    }
    EXPECT_NEAR(unwrap_near(-kPi + 0.1, kPi), kPi + 0.1, 1e-12);
}

TEST(PairMoves, HandValues) {
    // Grid 4: cell 0 at (-0.75,-0.75), cell 1 at (-0.25,-0.75), cell 5 at (-0.25,-0.25).
    const auto ds = make_dataset(4, {{0, 1, 1}, {5, 5, 1}});
    TrajBatch z = TrajBatch::Zero(2, 6);
    z.col(1) << 0.0, 2.0;   // noise step for traj 0 slot 1 is (0,2)
    z.col(4) << 1.0, 1.0;
    z.col(5) << 1.0, -2.0;  // noise step for traj 1 slot 2 is (0,-3)
    const auto moves = pair_moves(ds, z);
    ASSERT_EQ(moves.size(), 2u);
    EXPECT_EQ(moves[0].traj, 0u);
    EXPECT_EQ(moves[0].slot, 1);
    EXPECT_DOUBLE_EQ(moves[0].real_angle, 0.0);
    EXPECT_DOUBLE_EQ(moves[0].noise_angle, kPi / 2);
    EXPECT_DOUBLE_EQ(moves[0].real_distance, 0.5);
    EXPECT_DOUBLE_EQ(moves[0].noise_distance, 2.0);
    EXPECT_EQ(moves[1].slot, 2);
    EXPECT_DOUBLE_EQ(moves[1].real_angle, -kPi / 2);
    EXPECT_DOUBLE_EQ(moves[1].noise_angle, -kPi / 2);
    EXPECT_DOUBLE_EQ(moves[1].noise_distance, 3.0);
    EXPECT_THROW(pair_moves(ds, TrajBatch::Zero(2, 5)), InvalidArgument);
}

TrajectoryDataset random_walkers(std::size_t n, int grid, int T, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Trajectory> out;
    for (std::size_t i = 0; i < n; ++i) {
        int x = static_cast<int>(rng() % static_cast<std::uint64_t>(grid));
        int y = static_cast<int>(rng() % static_cast<std::uint64_t>(grid));
        Trajectory t;
        for (int s = 0; s < T; ++s) {
            if (s > 0 && uniform01(rng) < 0.5) {
                const int d = static_cast<int>(rng() % 4);
                const int len = 1 + static_cast<int>(rng() % 2);
                x = std::clamp(x + len * ((d == 0) - (d == 1)), 0, grid - 1);
                y = std::clamp(y + len * ((d == 2) - (d == 3)), 0, grid - 1);
            }
            t.locs.push_back(LocId{static_cast<std::uint32_t>(y * grid + x)});
        }
        out.push_back(std::move(t));
    }
    return TrajectoryDataset(grid, 1.0, T, SplitTag::train, std::move(out));
}

TEST(DirectionRegression, AlignedNoiseIsRecovered) {
    const auto ds = random_walkers(300, 16, 24, 1);
    // Noise that steps exactly along each move, scaled.
    TrajBatch z = TrajBatch::Zero(2, static_cast<Eigen::Index>(ds.size()) * 24);
    for (std::size_t b = 0; b < ds.size(); ++b) {
        for (int s = 0; s < 24; ++s) {
            const Coord c = loc_to_coord(16, ds[b].locs[static_cast<std::size_t>(s)]);
            z(0, static_cast<Eigen::Index>(b) * 24 + s) = 3.0 * c.x;
            z(1, static_cast<Eigen::Index>(b) * 24 + s) = 3.0 * c.y;
        }
    }
    const auto moves = pair_moves(ds, z);
    ASSERT_GT(moves.size(), 1000u);
    const auto dir = direction_regression(moves);
    EXPECT_NEAR(dir.slope, 1.0, 1e-12);
    EXPECT_NEAR(dir.r_squared, 1.0, 1e-12);
    const auto dist = distance_regression(moves);
    EXPECT_NEAR(dist.slope, 3.0, 1e-12);
}

TEST(DirectionRegression, IndependentNoiseNullIsInflatedByUnwrapping) {
    // With four lattice directions the real angles have variance 5 pi^2 / 16
    // and the unwrapped residual is uniform on a 2 pi window (variance
    // pi^2 / 3), so the null R^2 is (5/16) / (5/16 + 1/3) = 15/31.
    const auto ds = random_walkers(2000, 16, 24, 2);
    const auto z = random_batch(2, static_cast<Eigen::Index>(ds.size()) * 24, 3);
    const auto moves = pair_moves(ds, z);
    const auto dir = direction_regression(moves);
    EXPECT_NEAR(dir.r_squared, 15.0 / 31.0, 0.03);
    EXPECT_NEAR(dir.slope, 1.0, 0.05);
    const auto dist = distance_regression(moves);
    EXPECT_LT(dist.r_squared, 0.01);
}

TEST(VarianceRhythm, TracksConstructedProfile) {
    const int T = 24;
    std::vector<double> p(T);
    for (int t = 0; t < T; ++t) p[static_cast<std::size_t>(t)] = 0.1 + 0.4 * std::sin(kPi * t / T);
    const Eigen::Index B = 4000;
    auto z = random_batch(2, B * T, 4);
    for (Eigen::Index b = 0; b < B; ++b) {
        for (int t = 0; t < T; ++t) z.col(b * T + t) *= std::sqrt(p[static_cast<std::size_t>(t)]);
    }
    const auto v = variance_rhythm(z, T, p);
    ASSERT_TRUE(v.correlation.has_value());
    EXPECT_GT(*v.correlation, 0.98);
    for (int t = 0; t < T; ++t) EXPECT_NEAR(v.variance[static_cast<std::size_t>(t)], p[static_cast<std::size_t>(t)], 0.05);
    EXPECT_THROW(variance_rhythm(z, T, std::vector<double>(T - 1, 0.1)), InvalidArgument);
}

TEST(AnalyzeNoise, ShuffledBaselineAndJson) {
    const auto ds = random_walkers(64, 8, 12, 5);
    ZeroEps eps;
    const auto sched = make_vp_schedule(500, 1e-4, 0.02);
    const auto a = analyze_noise(eps, ds, sched, 20, 16, 3);
    EXPECT_EQ(a.z.cols(), 64 * 12);
    EXPECT_EQ(a.direction.n_points, a.moves.size());
    EXPECT_EQ(a.direction_shuffled.n_points, a.moves.size());
    // Zero predicted noise keeps the inversion an affine image of the data.
    EXPECT_GT(a.direction.r_squared, 0.999);
    const auto j = to_json(a);
    EXPECT_EQ(j["n_trajectories"].get<int>(), 64);
    EXPECT_TRUE(j.contains("direction_shuffled_pairs"));
    const auto b = analyze_noise(eps, ds, sched, 20, 16, 3);
    EXPECT_EQ(a.direction_shuffled.r_squared, b.direction_shuffled.r_squared);
}

TEST(NoiseVectors, ExportRoundTrip) {
    const auto ds = make_dataset(4, {{0, 1, 1}, {5, 5, 5}});
    const auto z = random_batch(2, 6, 6);
    const auto path = scratch_dir("noise") / "z.csv";
    export_noise_vectors(path, z, ds);
    const auto back = read_noise_vectors(path, 3);
    ASSERT_EQ(back.cols(), 6);
    EXPECT_EQ(back, z);
    EXPECT_THROW(read_noise_vectors(path, 4), Error);
    EXPECT_THROW(export_noise_vectors(path, random_batch(2, 4, 1), ds), InvalidArgument);
}

TEST(MoveScatterCsv, Header) {
    const auto ds = make_dataset(4, {{0, 1}});
    TrajBatch z = TrajBatch::Zero(2, 2);
    z(0, 1) = 1.0;
    const auto csv = move_scatter_csv(pair_moves(ds, z));
    EXPECT_EQ(csv, "traj,slot,real_angle,noise_angle,real_distance,noise_distance\n0,1,0,0,0.5,1\n");
}

}  // namespace
