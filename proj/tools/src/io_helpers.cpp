#include "io_helpers.hpp"

#include <cstdio>
#include <filesystem>

#include "quanvseg/formats.hpp"

namespace quanvseg::cli {

bool has_extension(const std::string& path, const std::string& ext) {
    return path.size() >= ext.size() && path.compare(path.size() - ext.size(), ext.size(), ext) == 0;
}

void require_file(const std::string& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) throw FileError(path, "no such file");
}

void ensure_directory(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw FileError(path, "cannot create directory");
}

std::string numbered(const std::string& dir, const std::string& stem, std::size_t i, const std::string& ext) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04zu", i);
    return (std::filesystem::path(dir) / (stem + "_" + buf + ext)).string();
}

nn::Tensor<double> load_stack(const std::string& path, std::size_t* source_rank) {
    require_file(path);
    if (has_extension(path, ".pgm")) {
        if (source_rank) *source_rank = 2;
        const Raster r = io::pgm_to_raster(io::read_pgm(path));
        return nn::Tensor<double>({1, 1, r.height, r.width}, r.values);
    }
    const nn::Tensor<double> t = io::read_tensor(path).to_double();
    const auto& d = t.dims();
    if (source_rank) *source_rank = t.rank();
    switch (t.rank()) {
        case 2: return t.reshaped({1, 1, d[0], d[1]});
        case 3: return t.reshaped({d[0], 1, d[1], d[2]});
        case 4: return t;
        default: throw ShapeError("expected image data of rank 2 to 4 in " + path + ", got " + nn::dims_to_string(d));
    }
}

Raster channel_raster(const nn::Tensor<double>& stack, std::size_t n, std::size_t c) {
    Raster r(stack.dim(2), stack.dim(3));
    const std::size_t plane = r.height * r.width;
    const double* src = stack.ptr() + (n * stack.dim(1) + c) * plane;
    std::copy(src, src + plane, r.values.begin());
    return r;
}

std::vector<Raster> to_rasters(const nn::Tensor<double>& stack) {
    if (stack.dim(1) != 1) {
        throw ShapeError("expected single-channel images, got " + nn::dims_to_string(stack.dims()));
    }
    std::vector<Raster> out;
    for (std::size_t n = 0; n < stack.dim(0); ++n) out.push_back(channel_raster(stack, n, 0));
    return out;
}

nn::Tensor<float> load_float(const std::string& path) {
    const auto t = load_stack(path);
    return t.cast<float>();
}

}  // namespace quanvseg::cli
