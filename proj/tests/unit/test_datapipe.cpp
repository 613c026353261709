#include <cmath>

#include <gtest/gtest.h>

#include "gen.hpp"
#include "quanvseg/datapipe.hpp"

using namespace quanvseg;
using namespace quanvseg::data;

TEST(WindowCount, Formula) {
    EXPECT_EQ(window_count(1024, 256, 128), 7u);
    EXPECT_EQ(window_count(256, 256, 128), 1u);
    EXPECT_EQ(window_count(255, 256, 128), 0u);
    EXPECT_EQ(window_count(300, 256, 128), 1u);
    EXPECT_EQ(window_count(10, 4, 3), 3u);
}

TEST(ExtractPatches, CountsAndContents) {
    gen::Gen g(91);
    const auto img = g.raster(20, 14);
    auto mask = g.raster(20, 14);
    const auto set = extract_patches(img, mask, 8, 4);
    ASSERT_EQ(set.items.size(), 4u * 2u);
    const auto& p = set.items[3];
    EXPECT_EQ(p.row, 4u);
    EXPECT_EQ(p.col, 4u);
    for (std::size_t r = 0; r < 8; ++r)
        for (std::size_t c = 0; c < 8; ++c) {
            EXPECT_EQ(p.input.at(r, c), img.at(p.row + r, p.col + c));
            EXPECT_EQ(p.mask.at(r, c), mask.at(p.row + r, p.col + c) > 0.5 ? 1.0 : 0.0);
        }
}

TEST(ExtractPatches, OverlapSharesPixels) {
    gen::for_all(20, 92, [](gen::Gen& g, std::uint64_t) {
        const std::size_t patch = g.size(2, 6), stride = g.size(1, patch);
        const auto img = g.raster(g.size(patch, 20), g.size(patch, 20));
        const auto set = extract_patches(img, Raster(img.height, img.width), patch, stride);
        EXPECT_EQ(set.items.size(), window_count(img.height, patch, stride) * window_count(img.width, patch, stride));
        for (const auto& p : set.items) EXPECT_EQ(p.input.at(patch - 1, 0), img.at(p.row + patch - 1, p.col));
    });
}

TEST(ExtractPatches, Errors) {
    EXPECT_THROW(extract_patches(Raster(10, 10), Raster(10, 9), 4, 2), ShapeError);
    EXPECT_THROW(extract_patches(Raster(10, 10), Raster(10, 10), 11, 2), SizeError);
}

TEST(Split, CeilRuleAndDeterminism) {
    const auto set = extract_patches(Raster(40, 40), Raster(40, 40), 8, 4);
    ASSERT_EQ(set.items.size(), 81u);
    const auto a = split(set, 0.2, 7);
    EXPECT_EQ(a.count(Split::Test), 17u);
    EXPECT_EQ(a.count(Split::Train), 64u);
    const auto b = split(set, 0.2, 7);
    for (std::size_t i = 0; i < a.items.size(); ++i) EXPECT_EQ(a.items[i].split, b.items[i].split);
    EXPECT_THROW(split(set, 0.0, 1), ConfigError);
    EXPECT_THROW(split(set, 1.0, 1), ConfigError);
}

TEST(Split, PartitionKeepsOrderAndHitsCeilCount) {
    gen::for_all(30, 93, [](gen::Gen& g, std::uint64_t s) {
        const std::size_t h = g.size(8, 30), w = g.size(8, 30);
        const auto base = extract_patches(g.raster(h, w), Raster(h, w), 4, 2);
        const double frac = g.real(0.05, 0.95);
        const auto out = split(base, frac, s);
        ASSERT_EQ(out.items.size(), base.items.size());
        const auto n = static_cast<double>(base.items.size());
        EXPECT_EQ(out.count(Split::Test), static_cast<std::size_t>(std::ceil(n * frac)));
        EXPECT_EQ(out.count(Split::Test) + out.count(Split::Train), base.items.size());
        for (std::size_t i = 0; i < out.items.size(); ++i) {
            EXPECT_EQ(out.items[i].row, base.items[i].row);
            EXPECT_EQ(out.items[i].input, base.items[i].input);
        }
    });
}

TEST(NormalizeDb, MapsRangeAndClips) {
    Raster db(1, 4);
    db.values = {-30, -25, -10, 10};
    const auto n = normalize_db(db);
    EXPECT_EQ(n.values, (std::vector<double>{0, 0, 0.5, 1}));
    EXPECT_THROW(normalize_db(db, 5, 5), ConfigError);
}

TEST(SynthScene, ShapesLevelsAndDeterminism) {
    const auto clean = synth_scene(3, 64, 48, 5, kNoSpeckle);
    EXPECT_EQ(clean.image.height, 64u);
    EXPECT_EQ(clean.image.width, 48u);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < clean.mask.values.size(); ++i) {
        const double m = clean.mask.values[i];
        ASSERT_TRUE(m == 0.0 || m == 1.0);
        EXPECT_EQ(clean.image.values[i], m == 1.0 ? kBuildingLevel : kBackgroundLevel);
        pos += m == 1.0;
    }
    EXPECT_GT(pos, 0u);
    const auto a = synth_scene(9, 32, 32, 3, 4);
    const auto b = synth_scene(9, 32, 32, 3, 4);
    EXPECT_EQ(a.image, b.image);
    EXPECT_EQ(a.mask, b.mask);
    for (double v : a.image.values) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    EXPECT_THROW(synth_scene(1, 16, 64, 1, 4), SizeError);
}
