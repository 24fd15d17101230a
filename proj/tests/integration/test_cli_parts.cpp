#include <string>

#include <gtest/gtest.h>

#include "mobgen/error.hpp"
#include "mobgen/io.hpp"
#include "mobgen_cli/manifest.hpp"
#include "mobgen_cli/svg.hpp"
#include "mobgen_cli/utility_probe.hpp"
#include "test_support.hpp"

using namespace mobgen;
using namespace mobgen::cli;
using mobgen::testing::make_dataset;
using mobgen::testing::scratch_dir;

TEST(UtilityProbe, MarkovPredictorHandTable) {
    const auto train = make_dataset(2, {{0, 1, 1, 2}, {0, 1, 2, 2}});
    MarkovPredictor m(4);
    m.fit(train);
    EXPECT_EQ(m.predict(LocId{0}).index, 1u);
    EXPECT_EQ(m.predict(LocId{1}).index, 2u);
    EXPECT_EQ(m.predict(LocId{2}).index, 2u);
    EXPECT_EQ(m.predict(LocId{3}).index, 3u);
    EXPECT_THROW(m.predict(LocId{4}), InvalidArgument);
}

TEST(UtilityProbe, AccuracyHandTable) {
    const auto real = make_dataset(2, {{0, 1, 1, 2}, {0, 1, 2, 2}});
    const auto test = make_dataset(2, {{0, 1, 2, 3}}, SplitTag::holdout);
    const auto r = utility_probe(real, real, test, 0.0);
    EXPECT_EQ(r.n_pairs, 3u);
    EXPECT_EQ(r.n_move_pairs, 3u);
    EXPECT_DOUBLE_EQ(r.accuracy, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(r.move_accuracy, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(r.persistence_accuracy, 0.0);
}

TEST(UtilityProbe, MixReplacesRealTrajectories) {
    const auto real = make_dataset(2, {{0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}});
    const auto gen = make_dataset(2, {{0, 3, 0, 3}, {0, 3, 0, 3}, {0, 3, 0, 3}, {0, 3, 0, 3}});
    const auto test = make_dataset(2, {{0, 3, 0, 3}}, SplitTag::holdout);
    const auto r0 = utility_probe(real, gen, test, 0.0);
    const auto r1 = utility_probe(real, gen, test, 1.0);
    EXPECT_EQ(r0.n_train_gen, 0u);
    EXPECT_EQ(r1.n_train_real, 0u);
    EXPECT_DOUBLE_EQ(r0.accuracy, 0.0);
    EXPECT_DOUBLE_EQ(r1.accuracy, 1.0);
    const auto half = utility_probe(real, gen, test, 0.5);
    EXPECT_EQ(half.n_train_gen, 2u);
    EXPECT_EQ(half.n_train_real, 2u);
    EXPECT_THROW(utility_probe(real, gen, test, 1.5), InvalidArgument);
    const auto small = make_dataset(2, {{0, 3, 0, 3}});
    EXPECT_THROW(utility_probe(real, small, test, 0.75), InvalidArgument);
    EXPECT_THROW(utility_probe(real, make_dataset(3, {{0, 1, 2, 3}}), test, 0.0), InvalidArgument);
}

TEST(Svg, ChartsAreWellFormed) {
    const std::string line = svg_line_chart({{"a<b", {0, 1, 2}, {1, 0.5, 0.25}}}, "loss & more", "epoch", "loss");
    EXPECT_EQ(line.rfind("<svg", 0), 0u);
    EXPECT_NE(line.find("</svg>"), std::string::npos);
    EXPECT_NE(line.find("a&lt;b"), std::string::npos);
    EXPECT_NE(line.find("loss &amp; more"), std::string::npos);
    EXPECT_THROW(svg_line_chart({{"x", {0, 1}, {1}}}, "t", "x", "y"), InvalidArgument);

    const std::string ecdf = svg_ecdf({{"real", {3, 1, 2}}}, "t", "x");
    EXPECT_NE(ecdf.find("<polyline"), std::string::npos);

    FlowMatrix f(4);
    f(0, 1) = 5;
    f(2, 3) = 1;
    const std::string heat = svg_flow_heatmap(f, "flows");
    std::size_t rects = 0;
    for (std::size_t p = heat.find("<rect x="); p != std::string::npos; p = heat.find("<rect x=", p + 1)) ++rects;
    EXPECT_EQ(rects, 2u);
}

TEST(Manifest, AppendsOneLinePerRunWithChecksums) {
    const auto dir = scratch_dir("manifest");
    write_text_file(dir / "out.txt", "abc");
    RunManifest m;
    m.command = "test";
    m.seeds["x"] = 3;
    m.add_output(dir / "out.txt");
    append_manifest(dir, m);
    append_manifest(dir, m);
    const auto lines = read_manifests(dir);
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_EQ(lines[0]["outputs"][0]["sha256"], "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(lines[1]["seeds"]["x"], 3);
    EXPECT_THROW(m.add_output(dir / "missing.txt"), IoError);
}
