#pragma once

#include <string>
#include <vector>

#include "quanvseg/raster.hpp"
#include "quanvseg/tensor.hpp"

namespace quanvseg::cli {

bool has_extension(const std::string& path, const std::string& ext);

// PGM or QVT1 image data as N x C x H x W. A PGM or a rank-2 tensor is one
// single-channel image, rank 3 is a stack of single-channel images.
nn::Tensor<double> load_stack(const std::string& path, std::size_t* source_rank = nullptr);

// Single-channel images of a N x 1 x H x W stack.
std::vector<Raster> to_rasters(const nn::Tensor<double>& stack);
Raster channel_raster(const nn::Tensor<double>& stack, std::size_t n, std::size_t c);

nn::Tensor<float> load_float(const std::string& path);

// Throws FileError naming the path when it does not exist.
void require_file(const std::string& path);
void ensure_directory(const std::string& path);
std::string numbered(const std::string& dir, const std::string& stem, std::size_t i, const std::string& ext);

}  // namespace quanvseg::cli
