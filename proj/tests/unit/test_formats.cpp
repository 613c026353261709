#include <cstring>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "gen.hpp"
#include "quanvseg/formats.hpp"

using namespace quanvseg;
using namespace quanvseg::io;
using quanvseg::nn::Dims;
using quanvseg::nn::Tensor;

namespace {

std::string encode(const Tensor<float>& t) {
    std::ostringstream out;
    write_tensor(out, t);
    return out.str();
}

StoredTensor decode(const std::string& bytes) {
    std::istringstream in(bytes);
    return read_tensor(in);
}

std::size_t format_offset(const std::string& bytes) {
    try {
        decode(bytes);
    } catch (const FormatError& e) {
        return e.offset();
    }
    return 9999;
}

}  // namespace

TEST(Qvt, HeaderLayout) {
    const Tensor<float> t({2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6});
    const auto bytes = encode(t);
    ASSERT_EQ(bytes.size(), encoded_size(t.dims(), DType::F32));
    EXPECT_EQ(bytes.size(), 4u + 1 + 1 + 8 + 24);
    EXPECT_EQ(bytes.substr(0, 4), "QVT1");
    EXPECT_EQ(bytes[4], 1);
    EXPECT_EQ(bytes[5], 2);
    EXPECT_EQ(static_cast<unsigned char>(bytes[6]), 2u);
    EXPECT_EQ(bytes[7], 0);
    EXPECT_EQ(static_cast<unsigned char>(bytes[10]), 3u);
    float first;
    std::memcpy(&first, bytes.data() + 14, 4);
    EXPECT_EQ(first, 1.0f);
}

TEST(Qvt, RoundTripBothDtypes) {
    gen::for_all(40, 101, [](gen::Gen& g, std::uint64_t) {
        Dims dims(g.size(1, 4));
        for (auto& d : dims) d = g.size(1, 5);
        const auto t = g.tensor(dims, -1e6, 1e6);
        std::ostringstream out;
        write_tensor(out, t);
        write_tensor(out, t.cast<float>());
        std::istringstream in(out.str());
        const auto a = read_tensor(in);
        const auto b = read_tensor(in);
        EXPECT_EQ(a.dtype, DType::F64);
        EXPECT_EQ(a.f64, t);
        EXPECT_EQ(b.dtype, DType::F32);
        EXPECT_EQ(b.f32, t.cast<float>());
    });
}

TEST(Qvt, CorruptHeadersReportOffsets) {
    auto bytes = encode(Tensor<float>({2, 2}));
    auto bad = bytes;
    bad[0] = 'X';
    EXPECT_EQ(format_offset(bad), 0u);
    bad = bytes;
    bad[4] = 3;
    EXPECT_EQ(format_offset(bad), 4u);
    bad = bytes;
    bad[5] = 5;
    EXPECT_EQ(format_offset(bad), 5u);
    bad = bytes;
    bad[5] = 0;
    EXPECT_EQ(format_offset(bad), 5u);
}

TEST(Qvt, TruncatedPayloadIsLengthError) {
    const auto bytes = encode(Tensor<float>({3, 3}));
    EXPECT_THROW(decode(bytes.substr(0, bytes.size() - 1)), LengthError);
    EXPECT_THROW(decode(bytes.substr(0, 14)), LengthError);
}

TEST(Qvt, TruncatedHeaderIsFormatError) {
    const auto bytes = encode(Tensor<float>({3, 3}));
    EXPECT_EQ(format_offset(bytes.substr(0, 2)), 2u);
    EXPECT_EQ(format_offset(bytes.substr(0, 9)), 6u);
}

TEST(Qvt, WriterRejectsRankFive) {
    std::ostringstream out;
    EXPECT_THROW(write_tensor(out, Tensor<float>({1, 1, 1, 1, 1})), ShapeError);
}

TEST(Qvt, MissingFileIsFileError) {
    EXPECT_THROW(read_tensor(::testing::TempDir() + "nope.qvt"), FileError);
}

TEST(Pgm, EightBitRoundTrip) {
    Pgm p{2, 3, 255, {0, 1, 2, 128, 254, 255}};
    const auto bytes = encode_pgm(p);
    const std::string header(bytes.begin(), bytes.begin() + 11);
    EXPECT_EQ(header, "P5\n3 2\n255\n");
    const auto back = parse_pgm(bytes);
    EXPECT_EQ(back.samples, p.samples);
    EXPECT_EQ(back.width, 3u);
}

TEST(Pgm, SixteenBitIsBigEndian) {
    Pgm p{1, 2, 65535, {0x0102, 0xfffe}};
    const auto bytes = encode_pgm(p);
    ASSERT_EQ(bytes.size(), std::string("P5\n2 1\n65535\n").size() + 4);
    EXPECT_EQ(bytes[bytes.size() - 4], 0x01);
    EXPECT_EQ(bytes[bytes.size() - 3], 0x02);
    EXPECT_EQ(parse_pgm(bytes).samples, p.samples);
}

TEST(Pgm, HeaderCommentsAndErrors) {
    const std::string text = "P5\n# made by hand\n2 1\n255\n";
    std::vector<std::uint8_t> bytes(text.begin(), text.end());
    bytes.push_back(7);
    bytes.push_back(9);
    EXPECT_EQ(parse_pgm(bytes).samples, (std::vector<std::uint16_t>{7, 9}));
    bytes.pop_back();
    EXPECT_THROW(parse_pgm(bytes), LengthError);
    std::vector<std::uint8_t> p2{'P', '2', '\n', '1', ' ', '1', '\n', '2', '5', '5', '\n', '0'};
    EXPECT_THROW(parse_pgm(p2), FormatError);
}

TEST(Pgm, RasterConversion) {
    Raster r(1, 3);
    r.values = {0.0, 0.5, 1.2};
    const auto p = raster_to_pgm(r);
    EXPECT_EQ(p.samples, (std::vector<std::uint16_t>{0, 128, 255}));
    const auto back = pgm_to_raster(p);
    EXPECT_DOUBLE_EQ(back.values[2], 1.0);
}

TEST(Pgm, MaskFileRoundTripAndValidation) {
    const std::string path = ::testing::TempDir() + "mask_rt.pgm";
    Raster m(2, 2);
    m.values = {0, 1, 1, 0};
    write_mask(path, m, 65535);
    EXPECT_EQ(read_mask(path), m);
    write_pgm(path, Pgm{1, 2, 255, {0, 17}});
    EXPECT_THROW(read_mask(path), DataError);
}
