#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "quanvseg/raster.hpp"

namespace quanvseg::data {

enum class Split { Train, Test };

struct Patch {
    Raster input;
    Raster mask;  // {0, 1}
    std::size_t row = 0;
    std::size_t col = 0;
    Split split = Split::Train;
};

struct PatchSet {
    std::size_t patch_size = 0;
    std::size_t stride = 0;
    std::vector<Patch> items;

    std::size_t count(Split s) const;
    std::vector<const Patch*> select(Split s) const;
};

// floor((extent - patch) / stride) + 1, or 0 when the patch does not fit
std::size_t window_count(std::size_t extent, std::size_t patch, std::size_t stride);

// Row-major full windows; trailing pixels that do not fill a window are
// dropped. Mask values are binarised at 0.5.
PatchSet extract_patches(const Raster& image, const Raster& mask, std::size_t patch_size, std::size_t stride);

// Seeded shuffle, then ceil(n * test_fraction) items are labelled Test.
PatchSet split(PatchSet set, double test_fraction, std::uint64_t seed);

inline constexpr double kDefaultLoDb = -25.0;
inline constexpr double kDefaultHiDb = 5.0;

Raster normalize_db(const Raster& db, double lo_db = kDefaultLoDb, double hi_db = kDefaultHiDb);

struct Scene {
    Raster image;
    Raster mask;
};

inline constexpr double kBackgroundLevel = 0.15;
inline constexpr double kBuildingLevel = 0.65;
inline constexpr std::size_t kMinBuilding = 4;
inline constexpr std::size_t kMaxBuilding = 32;
// Passing this as looks disables speckle.
inline constexpr double kNoSpeckle = std::numeric_limits<double>::infinity();

Scene synth_scene(std::uint64_t seed, std::size_t height, std::size_t width, std::size_t n_buildings, double looks);

}  // namespace quanvseg::data
