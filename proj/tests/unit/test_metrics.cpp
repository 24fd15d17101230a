#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "mobgen/error.hpp"
#include "mobgen/metrics.hpp"
#include "test_support.hpp"

namespace {

using namespace mobgen;
using mobgen::testing::make_dataset;

double brute_ks(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> support = a;
    support.insert(support.end(), b.begin(), b.end());
    double d = 0.0;
    for (double x : support) {
        std::size_t ca = 0;
        std::size_t cb = 0;
        for (double v : a) ca += v <= x ? 1 : 0;
        for (double v : b) cb += v <= x ? 1 : 0;
        d = std::max(d, std::abs(static_cast<double>(ca) / static_cast<double>(a.size()) -
                                 static_cast<double>(cb) / static_cast<double>(b.size())));
    }
    return d;
}

FlowMatrix matrix(std::size_t n, std::vector<double> v, bool self = true) {
    return FlowMatrix(n, std::move(v), self);
}

TEST(RadiusOfGyration, HandValues) {
    const std::vector<Coord> still(5, Coord{0.3, -0.2});
    EXPECT_EQ(radius_of_gyration(still), 0.0);
    const std::vector<Coord> split{{0, 0}, {0, 0}, {2, 0}, {2, 0}};
    EXPECT_DOUBLE_EQ(radius_of_gyration(split), 1.0);
    std::vector<Coord> moved = split;
    for (auto& c : moved) {
        c.x += 0.7;
        c.y -= 3.0;
    }
    EXPECT_NEAR(radius_of_gyration(moved), 1.0, 1e-15);
    EXPECT_THROW(radius_of_gyration(std::vector<Coord>{}), InvalidArgument);
}

TEST(TravelDistances, MovesOnly) {
    EXPECT_TRUE(travel_distances(make_trajectory({3, 3, 3}), 4).empty());
    const auto one = travel_distances(make_trajectory({0, 0, 1, 1}), 4);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_DOUBLE_EQ(one[0], 2.0 / 4.0);
    const auto back = travel_distances(make_trajectory({0, 1, 0}), 2);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0], back[1]);
}

TEST(Durations, RunLengths) {
    EXPECT_TRUE(durations(Trajectory{std::vector<LocId>(48, LocId{2})}).empty());
    Trajectory half(std::vector<LocId>(24, LocId{1}));
    half.locs.insert(half.locs.end(), 24, LocId{5});
    EXPECT_EQ(durations(half), (std::vector<int>{24, 24}));
    Trajectory alt;
    for (int t = 0; t < 48; ++t) alt.locs.push_back(LocId{static_cast<std::uint32_t>(t % 2)});
    EXPECT_EQ(durations(alt), std::vector<int>(48, 1));
}

TEST(DailyLoc, DistinctCells) {
    EXPECT_EQ(dailyloc(make_trajectory({3, 9, 3})), 2);
    EXPECT_EQ(dailyloc(make_trajectory({0, 1, 2, 3, 4})), 5);
    EXPECT_EQ(dailyloc(make_trajectory({7, 7})), 1);
}

TEST(KsStatistic, HandValues) {
    const std::vector<double> a{1, 2, 3};
    EXPECT_EQ(ks_statistic(a, a), 0.0);
    EXPECT_EQ(ks_statistic(a, std::vector<double>{10, 11}), 1.0);
    EXPECT_DOUBLE_EQ(ks_statistic(a, std::vector<double>{2, 3, 4}), 1.0 / 3.0);
    EXPECT_THROW(ks_statistic(a, std::vector<double>{}), InvalidArgument);
}

TEST(KsStatistic, MatchesBruteForceExactly) {
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng() % 40;
        const std::size_t m = 1 + rng() % 40;
        // Small integer supports force ties, which the sweep must handle.
        const bool ties = trial % 2 == 0;
        std::vector<double> a(n);
        std::vector<double> b(m);
        for (auto& v : a) v = ties ? static_cast<double>(rng() % 6) : standard_normal(rng);
        for (auto& v : b) v = ties ? static_cast<double>(rng() % 6) : standard_normal(rng) + 0.3;
        ASSERT_EQ(ks_statistic(a, b), brute_ks(a, b)) << "trial " << trial;
    }
}

TEST(Cpc, HandTable) {
    const auto f = matrix(2, {1, 2, 3, 4});
    EXPECT_EQ(cpc(f, f), 1.0);
    EXPECT_EQ(cpc(matrix(2, {1, 0, 0, 0}), matrix(2, {0, 0, 0, 5})), 0.0);
    EXPECT_DOUBLE_EQ(cpc(matrix(2, {2, 0, 0, 2}), matrix(2, {1, 1, 1, 1})), 0.5);
    EXPECT_THROW(cpc(matrix(2, {0, 0, 0, 0}), matrix(2, {0, 0, 0, 0})), InvalidArgument);
    EXPECT_THROW(cpc(matrix(2, {1, 0, 0, 0}), matrix(3, std::vector<double>(9, 1.0))), InvalidArgument);
}

TEST(Cpc, SymmetricAndScaleFree) {
    Rng rng(5);
    std::vector<double> a(16);
    std::vector<double> b(16);
    for (auto& v : a) v = uniform01(rng) * 10.0;
    for (auto& v : b) v = uniform01(rng) * 10.0;
    const auto fa = matrix(4, a);
    const auto fb = matrix(4, b);
    EXPECT_EQ(cpc(fa, fb), cpc(fb, fa));
    std::vector<double> a4(a);
    std::vector<double> b4(b);
    for (auto& v : a4) v *= 4.0;
    for (auto& v : b4) v *= 4.0;
    EXPECT_NEAR(cpc(matrix(4, a4), matrix(4, b4)), cpc(fa, fb), 1e-15);
}

TEST(Mape, HandTable) {
    const auto f = matrix(2, {0.5, 0.5, 0.25, 0.75});
    EXPECT_EQ(mape(f, f), 0.0);
    EXPECT_NEAR(mape(matrix(1, {1.0}), matrix(1, {1.0})), 0.0, 0.0);
    const auto x = matrix(2, {0.5, 0.5, 0.0, 0.0});
    const auto y = matrix(2, {0.6, 0.4, 0.3, 0.7});
    EXPECT_NEAR(mape(x, y), 0.2, 1e-15);
    EXPECT_EQ(mape(matrix(2, {0.995, 0.005, 0, 0}), matrix(2, {0.995, 0.5, 0, 0})), 0.0);
    EXPECT_THROW(mape(matrix(2, {0.001, 0, 0, 0}), matrix(2, {1, 0, 0, 0})), InvalidArgument);
}

TEST(Mape, RowAndGlobalAveragingDiffer) {
    // Row 0: one entry with error 1; row 1: three entries with error 0.
    const auto x = matrix(4, {1, 0, 0, 0, 0, 0.4, 0.3, 0.3, 0, 0, 0, 0, 0, 0, 0, 0});
    const auto y = matrix(4, {0, 0, 0, 0, 0, 0.4, 0.3, 0.3, 0, 0, 0, 0, 0, 0, 0, 0});
    EXPECT_DOUBLE_EQ(mape(x, y, 0.01, MapeAveraging::per_row), 0.5);
    EXPECT_DOUBLE_EQ(mape(x, y, 0.01, MapeAveraging::global), 0.25);
}

TEST(Diversity, ExactMatchesOnly) {
    const auto real = make_dataset(4, {{0, 1, 2}, {3, 4, 5}, {6, 7, 8}});
    EXPECT_EQ(diversity(real, real), 1.0);
    const auto other = make_dataset(4, {{9, 9, 9}, {10, 11, 12}});
    EXPECT_EQ(diversity(other, real), 0.0);
    const auto perm = make_dataset(4, {{2, 1, 0}});
    EXPECT_EQ(diversity(perm, real), 0.0);
    std::vector<Trajectory> gen;
    for (int i = 0; i < 10; ++i) {
        gen.push_back(i < 3 ? real[static_cast<std::size_t>(i)]
                            : make_trajectory({static_cast<std::uint32_t>(i), 15, 15}));
    }
    const TrajectoryDataset g(4, 1.0, 3, SplitTag::generated, gen);
    EXPECT_DOUBLE_EQ(diversity(g, real), 0.3);
}

TEST(TransitionMatrix, RowsSumToOneOrZero) {
    const auto t = transition_matrix(matrix(3, {0, 2, 2, 0, 0, 0, 1, 3, 0}, false));
    EXPECT_DOUBLE_EQ(t(0, 1), 0.5);
    EXPECT_EQ(t.row_sum(1), 0.0);
    EXPECT_DOUBLE_EQ(t(2, 1), 0.75);
    const auto u = unit_total(matrix(2, {1, 1, 1, 1}));
    EXPECT_DOUBLE_EQ(u(1, 0), 0.25);
}

TEST(EvaluateAll, IdenticalDatasets) {
    const auto ds = make_dataset(4, {{0, 0, 1, 1, 5}, {2, 2, 2, 6, 6}, {3, 3, 3, 3, 3}, {0, 4, 4, 8, 0}});
    const auto r = evaluate_all(ds, ds);
    EXPECT_EQ(r.ks_radius, 0.0);
    EXPECT_EQ(r.ks_distance, 0.0);
    EXPECT_EQ(r.ks_duration, 0.0);
    EXPECT_EQ(r.ks_dailyloc, 0.0);
    EXPECT_DOUBLE_EQ(r.cpc, 1.0);
    EXPECT_EQ(r.mape, 0.0);
    EXPECT_EQ(r.diversity, 1.0);
    EXPECT_EQ(r.n_real_moving, 3u);
    EXPECT_EQ(r.n_real_moves, 6u);
}

TEST(EvaluateAll, ReportJsonRoundTrip) {
    const auto a = make_dataset(4, {{0, 0, 1, 1, 5}, {2, 2, 2, 6, 6}, {0, 4, 4, 8, 0}});
    const auto b = make_dataset(4, {{0, 1, 1, 1, 5}, {2, 6, 2, 6, 6}, {15, 4, 4, 8, 0}});
    const auto r = evaluate_all(a, b);
    const auto j = to_json(r);
    EXPECT_EQ(to_json(metric_report_from_json(nlohmann::json::parse(j.dump()))), j);
    EXPECT_THROW(metric_report_from_json(nlohmann::json::object()), IoError);
}

TEST(EvaluateAll, DistancesReportedInKilometres) {
    std::vector<Trajectory> t{make_trajectory({0, 1})};
    const TrajectoryDataset ds(4, 2.5, 2, SplitTag::train, t);
    const auto s = trajectory_stats(ds);
    ASSERT_EQ(s.distance.size(), 1u);
    EXPECT_DOUBLE_EQ(s.distance[0], 2.5);
    EXPECT_DOUBLE_EQ(s.radius[0], 1.25);
}

TEST(EvaluateAll, UniformRandomGenerationHasLowCpc) {
    // Concentrated reference: everyone commutes between two neighbouring cells.
    std::vector<Trajectory> real;
    for (int i = 0; i < 200; ++i) real.push_back(make_trajectory({5, 5, 6, 6, 5}));
    Rng rng(3);
    std::vector<Trajectory> gen;
    for (int i = 0; i < 200; ++i) {
        Trajectory t;
        for (int s = 0; s < 5; ++s) t.locs.push_back(LocId{static_cast<std::uint32_t>(rng() % 64)});
        gen.push_back(t);
    }
    const TrajectoryDataset r(8, 1.0, 5, SplitTag::train, real);
    const TrajectoryDataset g(8, 1.0, 5, SplitTag::generated, gen);
    EXPECT_LT(evaluate_all(r, g).cpc, 0.3);
}

TEST(DistributionCsv, SortedWithHeader) {
    TrajectoryStats a;
    a.radius = {3.0, 1.0};
    TrajectoryStats b;
    b.distance = {2.0};
    const auto csv = distribution_csv(a, b);
    EXPECT_EQ(csv, "metric,set,value\nradius,real,1\nradius,real,3\ndistance,generated,2\n");
}

}  // namespace
