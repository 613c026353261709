#include "quanvseg/datapipe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "quanvseg/errors.hpp"
#include "quanvseg/random.hpp"

namespace quanvseg::data {

std::size_t PatchSet::count(Split s) const {
    return static_cast<std::size_t>(
        std::count_if(items.begin(), items.end(), [s](const Patch& p) { return p.split == s; }));
}

std::vector<const Patch*> PatchSet::select(Split s) const {
    std::vector<const Patch*> out;
    for (const auto& p : items)
        if (p.split == s) out.push_back(&p);
    return out;
}

std::size_t window_count(std::size_t extent, std::size_t patch, std::size_t stride) {
    if (patch == 0 || stride == 0 || patch > extent) return 0;
    return (extent - patch) / stride + 1;
}

PatchSet extract_patches(const Raster& image, const Raster& mask, std::size_t patch_size, std::size_t stride) {
    if (image.height != mask.height || image.width != mask.width) {
        throw ShapeError("image " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                         " and mask " + std::to_string(mask.height) + "x" + std::to_string(mask.width) +
                         " differ in size");
    }
    if (patch_size == 0 || stride == 0) throw ConfigError("patch size and stride must be positive");
    if (patch_size > image.height || patch_size > image.width) {
        throw SizeError("patch size " + std::to_string(patch_size) + " exceeds image " +
                        std::to_string(image.height) + "x" + std::to_string(image.width));
    }
    PatchSet set;
    set.patch_size = patch_size;
    set.stride = stride;
    const std::size_t rows = window_count(image.height, patch_size, stride);
    const std::size_t cols = window_count(image.width, patch_size, stride);
    set.items.reserve(rows * cols);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            Patch p;
            p.row = i * stride;
            p.col = j * stride;
            p.input = Raster(patch_size, patch_size);
            p.mask = Raster(patch_size, patch_size);
            for (std::size_t r = 0; r < patch_size; ++r) {
                const std::size_t src = (p.row + r) * image.width + p.col;
                std::copy_n(image.values.begin() + static_cast<std::ptrdiff_t>(src), patch_size,
                            p.input.values.begin() + static_cast<std::ptrdiff_t>(r * patch_size));
                for (std::size_t c = 0; c < patch_size; ++c) {
                    p.mask.at(r, c) = mask.values[src + c] > 0.5 ? 1.0 : 0.0;
                }
            }
            set.items.push_back(std::move(p));
        }
    }
    return set;
}

PatchSet split(PatchSet set, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ConfigError("test fraction must lie strictly between 0 and 1, got " + std::to_string(test_fraction));
    }
    const std::size_t n = set.items.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    shuffle_in_place(std::span<std::size_t>(order), rng);
    const auto n_test = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * test_fraction - 1e-12));
    for (std::size_t k = 0; k < n; ++k) set.items[order[k]].split = k < n_test ? Split::Test : Split::Train;
    return set;
}

Raster normalize_db(const Raster& db, double lo_db, double hi_db) {
    if (!(lo_db < hi_db)) throw ConfigError("normalisation bounds must satisfy lo_db < hi_db");
    Raster out(db.height, db.width);
    const double span = hi_db - lo_db;
    for (std::size_t i = 0; i < db.values.size(); ++i) {
        const double v = db.values[i];
        if (std::isnan(v)) throw DataError("NaN in dB raster at pixel " + std::to_string(i));
        out.values[i] = (std::clamp(v, lo_db, hi_db) - lo_db) / span;
    }
    return out;
}

Scene synth_scene(std::uint64_t seed, std::size_t height, std::size_t width, std::size_t n_buildings, double looks) {
    if (height < kMaxBuilding || width < kMaxBuilding) {
        throw SizeError("synthetic scenes need at least 32x32 pixels");
    }
    if (!(looks >= 1.0)) throw ConfigError("looks must be >= 1");
    std::mt19937_64 rng(seed);
    Scene s{Raster(height, width, kBackgroundLevel), Raster(height, width, 0.0)};
    const std::uint64_t sizes = kMaxBuilding - kMinBuilding + 1;
    for (std::size_t b = 0; b < n_buildings; ++b) {
        const std::size_t h = kMinBuilding + uniform_index(rng, sizes);
        const std::size_t w = kMinBuilding + uniform_index(rng, sizes);
        const std::size_t r0 = uniform_index(rng, height - h + 1);
        const std::size_t c0 = uniform_index(rng, width - w + 1);
        for (std::size_t r = r0; r < r0 + h; ++r) {
            for (std::size_t c = c0; c < c0 + w; ++c) {
                s.image.at(r, c) = kBuildingLevel;
                s.mask.at(r, c) = 1.0;
            }
        }
    }
    if (std::isfinite(looks)) {
        std::gamma_distribution<double> speckle(looks, 1.0 / looks);
        for (double& v : s.image.values) v = std::clamp(v * speckle(rng), 0.0, 1.0);
    }
    return s;
}

}  // namespace quanvseg::data
