#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "gen.hpp"
#include "quanvseg/errors.hpp"
#include "quanvseg/parallel.hpp"
#include "quanvseg/quanvolution.hpp"

using namespace quanvseg;
using namespace quanvseg::quanv;
using quanvseg::qsim::CircuitSpec;
using quanvseg::qsim::Template;

namespace {

QuanvConfig config(int k, int stride, Padding p, bool rescale, int qubits, std::uint64_t seed = 0,
                   Template t = Template::BasicEntangled) {
    return QuanvConfig(k, stride, p, rescale, qsim::build_circuit(t, qubits, 1, seed));
}

std::vector<double> oracle_window(const CircuitSpec& spec, std::span<const double> window, bool rescale) {
    const auto u = qsim::dense_unitary_oracle(spec);
    const auto enc = qsim::angle_encode(window, spec.n_qubits());
    const auto out = qsim::StateVector::from_amplitudes(qsim::apply_dense(u, enc.amplitudes()));
    auto z = qsim::measure_z_expectations(out);
    if (rescale)
        for (double& v : z) v = 0.5 * (1 + v);
    return z;
}

}  // namespace

TEST(OutputShape, ValidAndSame) {
    auto s = output_shape(8, 8, 2, 2, Padding::Valid);
    EXPECT_EQ(s.height, 4u);
    EXPECT_EQ(s.width, 4u);
    s = output_shape(10, 7, 3, 1, Padding::Valid);
    EXPECT_EQ(s.height, 8u);
    EXPECT_EQ(s.width, 5u);
    s = output_shape(10, 7, 3, 1, Padding::SameReflect);
    EXPECT_EQ(s.height, 10u);
    EXPECT_EQ(s.width, 7u);
    s = output_shape(9, 9, 3, 2, Padding::SameReflect);
    EXPECT_EQ(s.height, 5u);
    EXPECT_THROW(output_shape(2, 8, 3, 1, Padding::Valid), SizeError);
}

TEST(WindowPositions, FourByFourKernelTwoStrideTwo) {
    const auto pos = window_positions(4, 4, 2, 2, Padding::Valid);
    const std::vector<WindowOrigin> want{{0, 0}, {0, 2}, {2, 0}, {2, 2}};
    EXPECT_EQ(pos, want);
}

TEST(WindowPositions, SameReflectStartsOutsideImage) {
    const auto pos = window_positions(3, 3, 3, 1, Padding::SameReflect);
    ASSERT_EQ(pos.size(), 9u);
    EXPECT_EQ(pos.front(), (WindowOrigin{-1, -1}));
    EXPECT_EQ(pos.back(), (WindowOrigin{1, 1}));
}

TEST(WindowPositions, EvenKernelSamePadsBottomRight) {
    const auto pos = window_positions(3, 3, 2, 1, Padding::SameReflect);
    ASSERT_EQ(pos.size(), 9u);
    EXPECT_EQ(pos.front(), (WindowOrigin{0, 0}));
    EXPECT_EQ(pos.back(), (WindowOrigin{2, 2}));
}

TEST(ReflectIndex, MirrorsWithoutRepeatingEdge) {
    EXPECT_EQ(reflect_index(-1, 5), 1u);
    EXPECT_EQ(reflect_index(-2, 5), 2u);
    EXPECT_EQ(reflect_index(5, 5), 3u);
    EXPECT_EQ(reflect_index(6, 5), 2u);
    EXPECT_EQ(reflect_index(3, 5), 3u);
    EXPECT_EQ(reflect_index(-3, 1), 0u);
}

TEST(GatherWindow, ReflectsAtCorner) {
    Raster img(3, 3);
    for (std::size_t i = 0; i < 9; ++i) img.values[i] = static_cast<double>(i) / 10;
    std::vector<double> w(9);
    gather_window(img, {-1, -1}, 3, w);
    const std::vector<double> want{0.4, 0.3, 0.4, 0.1, 0.0, 0.1, 0.4, 0.3, 0.4};
    for (std::size_t i = 0; i < 9; ++i) EXPECT_DOUBLE_EQ(w[i], want[i]);
}

TEST(QuanvConfig, Validation) {
    EXPECT_THROW(config(3, 1, Padding::Valid, true, 4), ConfigError);
    EXPECT_NO_THROW(config(2, 1, Padding::SameReflect, true, 4));
    EXPECT_THROW(config(2, 0, Padding::Valid, true, 4), ConfigError);
    EXPECT_NO_THROW(config(2, 1, Padding::Valid, true, 5));
    EXPECT_EQ(padding_from_name("same"), Padding::SameReflect);
    EXPECT_EQ(padding_from_name("valid"), Padding::Valid);
    EXPECT_THROW(padding_from_name("zero"), ConfigError);
}

TEST(Quanvolve, ZeroImageEmptyCircuitGivesOnes) {
    const QuanvConfig cfg(2, 2, Padding::Valid, true, CircuitSpec(4, {}));
    const auto out = quanvolve(Raster(4, 4, 0.0), cfg);
    EXPECT_EQ(out.channels, 4u);
    EXPECT_EQ(out.height, 2u);
    EXPECT_EQ(out.width, 2u);
    for (double v : out.data) EXPECT_EQ(v, 1.0);
}

TEST(Quanvolve, WithoutRescaleValuesInSignedRange) {
    gen::Gen g(31);
    const auto out = quanvolve(g.raster(6, 6), config(2, 1, Padding::Valid, false, 4, 3, Template::Random));
    bool negative = false;
    for (double v : out.data) {
        EXPECT_GE(v, -1.0);
        EXPECT_LE(v, 1.0);
        negative |= v < 0;
    }
    EXPECT_TRUE(negative);
}

TEST(Quanvolve, RejectsOutOfRangePixels) {
    Raster img(4, 4, 0.5);
    img.at(1, 2) = 1.01;
    EXPECT_THROW(quanvolve(img, config(2, 2, Padding::Valid, true, 4)), EncodingRangeError);
    EXPECT_THROW(quanvolve(Raster(1, 4, 0.5), config(2, 2, Padding::Valid, true, 4)), SizeError);
}

TEST(Quanvolve, RescaledOutputInUnitInterval) {
    gen::for_all(30, 32, [](gen::Gen& g, std::uint64_t s) {
        const auto img = g.raster(g.size(3, 10), g.size(3, 10));
        const auto out = quanvolve(img, config(3, g.integer(1, 2), Padding::SameReflect, true, 9, s, g.templ()));
        for (double v : out.data) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    });
}

TEST(Quanvolve, MatchesPerWindowOracle) {
    gen::for_all(20, 33, [](gen::Gen& g, std::uint64_t s) {
        // the dense oracle stops at 6 qubits, so kernels stay at 1 or 2
        const int k = g.integer(1, 2);
        const auto padding = g.coin() ? Padding::SameReflect : Padding::Valid;
        const int qubits = k * k + g.integer(0, 2);
        const auto cfg = QuanvConfig(k, g.integer(1, 2), padding, g.coin(),
                                     qsim::build_circuit(g.templ(), qubits, g.integer(1, 2), s));
        const auto img = g.raster(g.size(4, 9), g.size(4, 9));
        const auto out = quanvolve(img, cfg);
        const auto pos = window_positions(img.height, img.width, k, cfg.stride, padding);
        ASSERT_EQ(pos.size(), out.height * out.width);
        std::vector<double> w(static_cast<std::size_t>(k * k));
        for (std::size_t i = 0; i < pos.size(); ++i) {
            gather_window(img, pos[i], k, w);
            const auto want = oracle_window(cfg.circuit, w, cfg.rescale);
            for (std::size_t q = 0; q < want.size(); ++q)
                EXPECT_NEAR(out.at(q, i / out.width, i % out.width), want[q], 1e-9);
        }
    });
}

TEST(Quanvolve, SingleQubitChannelIsCosineOfPixel) {
    // 1x1 kernel on an empty circuit: channel 0 is (1 + cos(pi x)) / 2
    const QuanvConfig cfg(1, 1, Padding::Valid, true, CircuitSpec(1, {}));
    gen::Gen g(34);
    const auto img = g.raster(5, 5);
    const auto out = quanvolve(img, cfg);
    for (std::size_t i = 0; i < img.values.size(); ++i)
        EXPECT_NEAR(out.data[i], 0.5 * (1 + std::cos(std::numbers::pi * img.values[i])), 1e-12);
}

TEST(Quanvolve, ThreadCountDoesNotChangeOutput) {
    gen::Gen g(35);
    const auto img = g.raster(24, 20);
    const auto cfg = config(3, 1, Padding::SameReflect, true, 9, 1, Template::StronglyEntangled);
    const int saved = thread_count();
    set_thread_count(1);
    const auto one = quanvolve(img, cfg);
    set_thread_count(4);
    const auto four = quanvolve(img, cfg);
    set_thread_count(saved);
    EXPECT_EQ(one, four);
}
