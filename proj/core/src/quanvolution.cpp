#include "quanvseg/quanvolution.hpp"

#include <cmath>
#include <string>

#include "quanvseg/errors.hpp"
#include "quanvseg/parallel.hpp"

namespace quanvseg::quanv {

std::string_view padding_name(Padding p) { return p == Padding::Valid ? "valid" : "same-reflect"; }

Padding padding_from_name(std::string_view name) {
    if (name == "valid") return Padding::Valid;
    if (name == "same-reflect" || name == "same") return Padding::SameReflect;
    throw ConfigError("unknown padding '" + std::string(name) + "'");
}

QuanvConfig::QuanvConfig(int kernel_size_, int stride_, Padding padding_, bool rescale_, qsim::CircuitSpec circuit_)
    : kernel_size(kernel_size_), stride(stride_), padding(padding_), rescale(rescale_), circuit(std::move(circuit_)) {
    validate();
}

void QuanvConfig::validate() const {
    if (kernel_size < 1) throw ConfigError("kernel size must be >= 1");
    if (stride < 1) throw ConfigError("stride must be >= 1");
    if (n_qubits() < kernel_size * kernel_size) {
        throw ConfigError("need at least kernel_size^2 = " + std::to_string(kernel_size * kernel_size) +
                          " qubits, circuit has " + std::to_string(n_qubits()));
    }
}

OutputShape output_shape(std::size_t height, std::size_t width, int kernel, int stride, Padding padding) {
    if (kernel < 1 || stride < 1) throw ConfigError("kernel and stride must be >= 1");
    const auto k = static_cast<std::size_t>(kernel);
    const auto s = static_cast<std::size_t>(stride);
    if (padding == Padding::Valid) {
        if (k > height || k > width) {
            throw SizeError("kernel " + std::to_string(k) + " larger than image " + std::to_string(height) + "x" +
                            std::to_string(width));
        }
        return {(height - k) / s + 1, (width - k) / s + 1};
    }
    if (height == 0 || width == 0) throw SizeError("empty image");
    // windows centred on pixels 0, s, 2s, ...
    return {(height + s - 1) / s, (width + s - 1) / s};
}

std::vector<WindowOrigin> window_positions(std::size_t height, std::size_t width, int kernel, int stride,
                                           Padding padding) {
    const auto shape = output_shape(height, width, kernel, stride, padding);
    const long offset = padding == Padding::Valid ? 0 : (kernel - 1) / 2;
    std::vector<WindowOrigin> out;
    out.reserve(shape.height * shape.width);
    for (std::size_t r = 0; r < shape.height; ++r)
        for (std::size_t c = 0; c < shape.width; ++c)
            out.push_back({static_cast<long>(r) * stride - offset, static_cast<long>(c) * stride - offset});
    return out;
}

std::size_t reflect_index(long i, std::size_t n) {
    if (n == 1) return 0;
    const long period = 2 * (static_cast<long>(n) - 1);
    long m = std::abs(i) % period;
    if (m >= static_cast<long>(n)) m = period - m;
    return static_cast<std::size_t>(m);
}

void gather_window(const Raster& image, WindowOrigin origin, int kernel, std::span<double> out) {
    std::size_t k = 0;
    for (int dr = 0; dr < kernel; ++dr) {
        const std::size_t r = reflect_index(origin.row + dr, image.height);
        for (int dc = 0; dc < kernel; ++dc) {
            out[k++] = image.at(r, reflect_index(origin.col + dc, image.width));
        }
    }
}

FeatureStack quanvolve(const Raster& image, const QuanvConfig& config) {
    config.validate();
    if (image.values.size() != image.height * image.width) throw ShapeError("raster size mismatch");
    for (double v : image.values) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw EncodingRangeError("pixel value " + std::to_string(v) + " outside [0, 1]");
        }
    }

    const auto shape = output_shape(image.height, image.width, config.kernel_size, config.stride, config.padding);
    const long offset = config.padding == Padding::Valid ? 0 : (config.kernel_size - 1) / 2;
    const auto n_qubits = static_cast<std::size_t>(config.n_qubits());
    const auto window_len = static_cast<std::size_t>(config.kernel_size * config.kernel_size);
    const qsim::CompiledCircuit compiled(config.circuit);

    FeatureStack out;
    out.channels = n_qubits;
    out.height = shape.height;
    out.width = shape.width;
    out.data.assign(n_qubits * shape.height * shape.width, 0.0);

    // One output row per task; each task writes only its own row.
    parallel_for(shape.height, [&](std::size_t r) {
        std::vector<double> window(window_len);
        std::vector<double> z(n_qubits);
        std::vector<qsim::Complex> scratch;
        for (std::size_t c = 0; c < shape.width; ++c) {
            const WindowOrigin origin{static_cast<long>(r) * config.stride - offset,
                                      static_cast<long>(c) * config.stride - offset};
            gather_window(image, origin, config.kernel_size, window);
            compiled.expectations(window, z, scratch);
            for (std::size_t q = 0; q < n_qubits; ++q) {
                out.at(q, r, c) = config.rescale ? 0.5 * (1.0 + z[q]) : z[q];
            }
        }
    });
    return out;
}

}  // namespace quanvseg::quanv
