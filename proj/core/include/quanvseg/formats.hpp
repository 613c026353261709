#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "quanvseg/raster.hpp"
#include "quanvseg/tensor.hpp"

namespace quanvseg::io {

// QVT1 tensor files:
//   "QVT1" | dtype u8 (1 = f32, 2 = f64) | ndim u8 (1..4) | ndim x u32 extents | payload
// All multi-byte values little-endian, payload row-major.
enum class DType : std::uint8_t { F32 = 1, F64 = 2 };

struct StoredTensor {
    DType dtype = DType::F32;
    nn::Tensor<float> f32;
    nn::Tensor<double> f64;

    const nn::Dims& dims() const noexcept { return dtype == DType::F32 ? f32.dims() : f64.dims(); }
    nn::Tensor<float> to_float() const;
    nn::Tensor<double> to_double() const;
};

inline constexpr std::size_t kQvtMaxRank = 4;

void write_tensor(std::ostream& out, const nn::Tensor<float>& t);
void write_tensor(std::ostream& out, const nn::Tensor<double>& t);
void write_tensor(const std::string& path, const nn::Tensor<float>& t);
void write_tensor(const std::string& path, const nn::Tensor<double>& t);

// Reads one tensor starting at the stream's position. Offsets in errors are
// counted from base_offset.
StoredTensor read_tensor(std::istream& in, std::size_t base_offset = 0);
StoredTensor read_tensor(const std::string& path);

// Size in bytes of the encoded tensor.
std::size_t encoded_size(const nn::Dims& dims, DType dtype);

// Binary PGM (P5). 16-bit samples are big-endian as Netpbm requires.
struct Pgm {
    std::size_t height = 0;
    std::size_t width = 0;
    std::uint32_t maxval = 255;
    std::vector<std::uint16_t> samples;
};

Pgm read_pgm(const std::string& path);
Pgm parse_pgm(const std::vector<std::uint8_t>& bytes);
void write_pgm(const std::string& path, const Pgm& image);
std::vector<std::uint8_t> encode_pgm(const Pgm& image);

// samples / maxval
Raster pgm_to_raster(const Pgm& image);
// values clipped to [0, 1] and rounded to the nearest level
Pgm raster_to_pgm(const Raster& raster, std::uint32_t maxval = 255);

// Masks hold only 0 and maxval; anything else is a DataError.
Raster read_mask(const std::string& path);
void write_mask(const std::string& path, const Raster& mask, std::uint32_t maxval = 255);

}  // namespace quanvseg::io
