#include "quanvseg/formats.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace quanvseg::io {

namespace {

constexpr char kMagic[4] = {'Q', 'V', 'T', '1'};

void put_u32(std::vector<char>& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_u64(std::vector<char>& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

template <typename T>
void write_impl(std::ostream& out, const nn::Tensor<T>& t, DType dtype) {
    if (t.rank() < 1 || t.rank() > kQvtMaxRank) {
        throw ShapeError("QVT1 supports ranks 1 to 4, got " + nn::dims_to_string(t.dims()));
    }
    std::vector<char> buf(kMagic, kMagic + 4);
    buf.push_back(static_cast<char>(dtype));
    buf.push_back(static_cast<char>(t.rank()));
    for (std::size_t d : t.dims()) {
        if (d > 0xffffffffu) throw ShapeError("extent does not fit in 32 bits");
        put_u32(buf, static_cast<std::uint32_t>(d));
    }
    buf.reserve(buf.size() + t.size() * sizeof(T));
    for (T v : t.data()) {
        if constexpr (sizeof(T) == 4) {
            put_u32(buf, std::bit_cast<std::uint32_t>(v));
        } else {
            put_u64(buf, std::bit_cast<std::uint64_t>(v));
        }
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw Error("write failed");
}

template <typename T>
void write_path(const std::string& path, const nn::Tensor<T>& t, DType dtype) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FileError(path, "cannot create file");
    write_impl(out, t, dtype);
}

std::size_t read_exact(std::istream& in, char* dst, std::size_t n) {
    in.read(dst, static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(in.gcount());
}

}  // namespace

nn::Tensor<float> StoredTensor::to_float() const { return dtype == DType::F32 ? f32 : f64.cast<float>(); }
nn::Tensor<double> StoredTensor::to_double() const { return dtype == DType::F64 ? f64 : f32.cast<double>(); }

std::size_t encoded_size(const nn::Dims& dims, DType dtype) {
    return 6 + 4 * dims.size() + nn::element_count(dims) * (dtype == DType::F32 ? 4 : 8);
}

void write_tensor(std::ostream& out, const nn::Tensor<float>& t) { write_impl(out, t, DType::F32); }
void write_tensor(std::ostream& out, const nn::Tensor<double>& t) { write_impl(out, t, DType::F64); }
void write_tensor(const std::string& path, const nn::Tensor<float>& t) { write_path(path, t, DType::F32); }
void write_tensor(const std::string& path, const nn::Tensor<double>& t) { write_path(path, t, DType::F64); }

StoredTensor read_tensor(std::istream& in, std::size_t base_offset) {
    char magic[4];
    const std::size_t got = read_exact(in, magic, 4);
    for (std::size_t i = 0; i < 4; ++i) {
        if (i >= got) throw FormatError(base_offset + i, "file too short for QVT1 magic");
        if (magic[i] != kMagic[i]) throw FormatError(base_offset, "bad magic, expected QVT1");
    }
    unsigned char head[2];
    const std::size_t hgot = read_exact(in, reinterpret_cast<char*>(head), 2);
    if (hgot < 1) throw FormatError(base_offset + 4, "missing dtype byte");
    if (head[0] != 1 && head[0] != 2) {
        throw FormatError(base_offset + 4, "unknown dtype " + std::to_string(head[0]));
    }
    if (hgot < 2) throw FormatError(base_offset + 5, "missing ndim byte");
    if (head[1] < 1 || head[1] > kQvtMaxRank) {
        throw FormatError(base_offset + 5, "ndim must be 1..4, got " + std::to_string(head[1]));
    }
    StoredTensor st;
    st.dtype = static_cast<DType>(head[0]);
    const std::size_t ndim = head[1];
    nn::Dims dims(ndim);
    for (std::size_t i = 0; i < ndim; ++i) {
        unsigned char b[4];
        if (read_exact(in, reinterpret_cast<char*>(b), 4) < 4) {
            throw FormatError(base_offset + 6 + 4 * i, "truncated extent list");
        }
        dims[i] = std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 | std::uint32_t{b[2]} << 16 |
                  std::uint32_t{b[3]} << 24;
    }
    const std::size_t width = st.dtype == DType::F32 ? 4 : 8;
    const std::size_t count = nn::element_count(dims);
    std::vector<unsigned char> payload(count * width);
    const std::size_t pgot = read_exact(in, reinterpret_cast<char*>(payload.data()), payload.size());
    if (pgot < payload.size()) {
        throw LengthError("QVT1 payload truncated: expected " + std::to_string(payload.size()) + " bytes, found " +
                          std::to_string(pgot));
    }
    if (st.dtype == DType::F32) {
        std::vector<float> v(count);
        for (std::size_t i = 0; i < count; ++i) {
            std::uint32_t u = 0;
            for (int k = 0; k < 4; ++k) u |= std::uint32_t{payload[4 * i + k]} << (8 * k);
            v[i] = std::bit_cast<float>(u);
        }
        st.f32 = nn::Tensor<float>(dims, std::move(v));
    } else {
        std::vector<double> v(count);
        for (std::size_t i = 0; i < count; ++i) {
            std::uint64_t u = 0;
            for (int k = 0; k < 8; ++k) u |= std::uint64_t{payload[8 * i + k]} << (8 * k);
            v[i] = std::bit_cast<double>(u);
        }
        st.f64 = nn::Tensor<double>(dims, std::move(v));
    }
    return st;
}

StoredTensor read_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError(path);
    return read_tensor(in, 0);
}

// ---- PGM -------------------------------------------------------------------

namespace {

struct PgmCursor {
    const std::vector<std::uint8_t>& bytes;
    std::size_t pos = 0;

    void skip_space_and_comments() {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    }

    std::uint64_t number(const char* what) {
        skip_space_and_comments();
        const std::size_t start = pos;
        std::uint64_t v = 0;
        while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
            v = v * 10 + (bytes[pos] - '0');
            if (v > 0xffffffffu) throw FormatError(start, std::string(what) + " too large");
            ++pos;
        }
        if (pos == start) throw FormatError(start, std::string("expected ") + what);
        return v;
    }
};

}  // namespace

Pgm parse_pgm(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw FormatError(0, "not a binary PGM (P5)");
    PgmCursor cur{bytes, 2};
    Pgm img;
    img.width = cur.number("width");
    img.height = cur.number("height");
    const std::size_t maxval_at = cur.pos;
    const auto maxval = cur.number("maxval");
    if (img.width == 0 || img.height == 0) throw FormatError(2, "zero image extent");
    if (maxval != 255 && maxval != 65535) {
        throw FormatError(maxval_at, "maxval must be 255 or 65535, got " + std::to_string(maxval));
    }
    img.maxval = static_cast<std::uint32_t>(maxval);
    if (cur.pos >= bytes.size() || !std::isspace(bytes[cur.pos])) {
        throw FormatError(cur.pos, "expected a single whitespace byte before the raster");
    }
    ++cur.pos;
    const std::size_t n = img.height * img.width;
    const std::size_t bps = img.maxval > 255 ? 2 : 1;
    if (bytes.size() - cur.pos < n * bps) {
        throw LengthError("PGM raster truncated: expected " + std::to_string(n * bps) + " bytes, found " +
                          std::to_string(bytes.size() - cur.pos));
    }
    img.samples.resize(n);
    const std::uint8_t* p = bytes.data() + cur.pos;
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint16_t s = bps == 1 ? p[i] : static_cast<std::uint16_t>(p[2 * i] << 8 | p[2 * i + 1]);
        if (s > img.maxval) throw FormatError(cur.pos + i * bps, "sample exceeds maxval");
        img.samples[i] = s;
    }
    return img;
}

Pgm read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError(path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_pgm(bytes);
}

std::vector<std::uint8_t> encode_pgm(const Pgm& image) {
    if (image.maxval != 255 && image.maxval != 65535) throw ConfigError("PGM maxval must be 255 or 65535");
    if (image.samples.size() != image.height * image.width) throw ShapeError("PGM sample count mismatch");
    const std::string header =
        "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n" +
        std::to_string(image.maxval) + "\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    for (std::uint16_t s : image.samples) {
        if (image.maxval > 255) out.push_back(static_cast<std::uint8_t>(s >> 8));
        out.push_back(static_cast<std::uint8_t>(s & 0xff));
    }
    return out;
}

void write_pgm(const std::string& path, const Pgm& image) {
    const auto bytes = encode_pgm(image);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FileError(path, "cannot create file");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed: " + path);
}

Raster pgm_to_raster(const Pgm& image) {
    Raster r(image.height, image.width);
    const double scale = 1.0 / image.maxval;
    for (std::size_t i = 0; i < r.values.size(); ++i) r.values[i] = image.samples[i] * scale;
    return r;
}

Pgm raster_to_pgm(const Raster& raster, std::uint32_t maxval) {
    Pgm img{raster.height, raster.width, maxval, {}};
    img.samples.resize(raster.values.size());
    for (std::size_t i = 0; i < raster.values.size(); ++i) {
        const double v = std::clamp(raster.values[i], 0.0, 1.0);
        img.samples[i] = static_cast<std::uint16_t>(std::lround(v * maxval));
    }
    return img;
}

Raster read_mask(const std::string& path) {
    const Pgm img = read_pgm(path);
    Raster r(img.height, img.width);
    for (std::size_t i = 0; i < img.samples.size(); ++i) {
        if (img.samples[i] != 0 && img.samples[i] != img.maxval) {
            throw DataError("mask " + path + " has a value other than 0 or maxval at pixel " + std::to_string(i));
        }
        r.values[i] = img.samples[i] ? 1.0 : 0.0;
    }
    return r;
}

void write_mask(const std::string& path, const Raster& mask, std::uint32_t maxval) {
    Pgm img{mask.height, mask.width, maxval, {}};
    img.samples.resize(mask.values.size());
    for (std::size_t i = 0; i < mask.values.size(); ++i) {
        img.samples[i] = static_cast<std::uint16_t>(mask.values[i] > 0.5 ? maxval : 0);
    }
    write_pgm(path, img);
}

}  // namespace quanvseg::io
