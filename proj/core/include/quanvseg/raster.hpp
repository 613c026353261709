#pragma once

#include <cstddef>
#include <vector>

namespace quanvseg {

// Single-band image, row-major.
struct Raster {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values;

    Raster() = default;
    Raster(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), values(h * w, fill) {}

    double& at(std::size_t r, std::size_t c) { return values[r * width + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * width + c]; }

    friend bool operator==(const Raster&, const Raster&) = default;
};

}  // namespace quanvseg
