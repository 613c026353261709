#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "quanvseg/qsim.hpp"
#include "quanvseg/raster.hpp"

namespace quanvseg::quanv {

enum class Padding { Valid, SameReflect };

std::string_view padding_name(Padding p);
Padding padding_from_name(std::string_view name);  // "valid" | "same-reflect"

struct QuanvConfig {
    int kernel_size = 3;
    int stride = 1;
    Padding padding = Padding::SameReflect;
    bool rescale = true;  // map <Z> in [-1, 1] to (1 + <Z>) / 2
    qsim::CircuitSpec circuit;

    // n_qubits is taken from the circuit. Throws ConfigError when
    // n_qubits < kernel_size^2 or stride < 1.
    QuanvConfig(int kernel_size, int stride, Padding padding, bool rescale, qsim::CircuitSpec circuit);

    int n_qubits() const noexcept { return circuit.n_qubits(); }
    void validate() const;
};

// One channel per qubit, channel-major (c, row, col).
struct FeatureStack {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> data;

    double& at(std::size_t c, std::size_t r, std::size_t col) { return data[(c * height + r) * width + col]; }
    double at(std::size_t c, std::size_t r, std::size_t col) const { return data[(c * height + r) * width + col]; }

    friend bool operator==(const FeatureStack&, const FeatureStack&) = default;
};

// Top-left corner of a window in input coordinates. With same-reflect
// padding the corner sits (k - 1) / 2 pixels above and left of the output
// pixel, so an even kernel gets its extra row and column on the bottom and
// right. Out-of-range pixels are mirrored.
struct WindowOrigin {
    long row;
    long col;
    friend bool operator==(const WindowOrigin&, const WindowOrigin&) = default;
};

struct OutputShape {
    std::size_t height;
    std::size_t width;
};

OutputShape output_shape(std::size_t height, std::size_t width, int kernel, int stride, Padding padding);

// Row-major list of window origins. Throws SizeError when the kernel does not
// fit the (padded) image.
std::vector<WindowOrigin> window_positions(std::size_t height, std::size_t width, int kernel, int stride,
                                           Padding padding);

// Mirror index into [0, n) without repeating the edge pixel.
std::size_t reflect_index(long i, std::size_t n);

// Row-major k*k window at origin, with reflection applied for indices that
// fall outside the image.
void gather_window(const Raster& image, WindowOrigin origin, int kernel, std::span<double> out);

FeatureStack quanvolve(const Raster& image, const QuanvConfig& config);

}  // namespace quanvseg::quanv
