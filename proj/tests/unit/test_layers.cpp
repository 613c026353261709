#include <cmath>

#include <gtest/gtest.h>

#include "gen.hpp"
#include "quanvseg/layers.hpp"

using namespace quanvseg;
using namespace quanvseg::nn;

namespace {

// Direct-loop cross-correlation with zero padding.
Tensor<double> conv_oracle(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b, int stride,
                           int pad) {
    const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const std::size_t cout = w.dim(0), k = w.dim(2);
    const std::size_t oh = (h + 2 * pad - k) / stride + 1, ow = (wd + 2 * pad - k) / stride + 1;
    Tensor<double> y({n, cout, oh, ow});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t o = 0; o < cout; ++o)
            for (std::size_t r = 0; r < oh; ++r)
                for (std::size_t c = 0; c < ow; ++c) {
                    double acc = b.empty() ? 0.0 : b[o];
                    for (std::size_t ci = 0; ci < cin; ++ci)
                        for (std::size_t dr = 0; dr < k; ++dr)
                            for (std::size_t dc = 0; dc < k; ++dc) {
                                const long rr = static_cast<long>(r * stride + dr) - pad;
                                const long cc = static_cast<long>(c * stride + dc) - pad;
                                if (rr < 0 || cc < 0 || rr >= static_cast<long>(h) || cc >= static_cast<long>(wd))
                                    continue;
                                acc += x.at(i, ci, rr, cc) * w.at(o, ci, dr, dc);
                            }
                    y.at(i, o, r, c) = acc;
                }
    return y;
}

void expect_close(const Tensor<double>& a, const Tensor<double>& b, double tol) {
    ASSERT_EQ(a.dims(), b.dims());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "index " << i;
}

double dot(const Tensor<double>& a, const Tensor<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

TEST(Conv2d, IdentityKernel) {
    Tensor<double> x({1, 1, 3, 3});
    for (std::size_t i = 0; i < 9; ++i) x[i] = static_cast<double>(i);
    Tensor<double> w({1, 1, 3, 3});
    w.at(0, 0, 1, 1) = 1;
    const auto y = conv2d_forward(x, w, Tensor<double>(), 1, 1);
    expect_close(y, x, 0);
}

TEST(Conv2d, MatchesDirectLoopOracle) {
    gen::for_all(40, 41, [](gen::Gen& g, std::uint64_t) {
        const int k = g.coin() ? 3 : 1;
        const int stride = g.integer(1, 2);
        const int pad = k == 3 ? g.integer(0, 1) : 0;
        const auto x = g.tensor({g.size(1, 2), g.size(1, 3), g.size(3, 7), g.size(3, 7)});
        const auto w = g.tensor({g.size(1, 4), x.dim(1), static_cast<std::size_t>(k), static_cast<std::size_t>(k)});
        const auto b = g.coin() ? g.tensor({w.dim(0)}) : Tensor<double>();
        expect_close(conv2d_forward(x, w, b, stride, pad), conv_oracle(x, w, b, stride, pad), 1e-12);
    });
}

TEST(Conv2d, BackwardIsAdjointOfForward) {
    // <dy, conv(x)> is linear in x, so grad_x . x must equal dy . (conv(x) - bias)
    gen::for_all(20, 42, [](gen::Gen& g, std::uint64_t) {
        const auto x = g.tensor({2, 2, 5, 6});
        const auto w = g.tensor({3, 2, 3, 3});
        const auto y = conv2d_forward(x, w, Tensor<double>(), 1, 1);
        const auto dy = g.tensor(y.dims());
        const auto grads = conv2d_backward(x, w, false, dy, 1, 1);
        EXPECT_NEAR(dot(grads.input, x), dot(dy, y), 1e-10);
        EXPECT_NEAR(dot(grads.weight, w), dot(dy, y), 1e-10);
        EXPECT_TRUE(grads.bias.empty());
    });
}

TEST(Conv2d, ShapeErrors) {
    EXPECT_THROW(conv2d_forward(Tensor<double>({1, 2, 4, 4}), Tensor<double>({1, 3, 3, 3}), Tensor<double>(), 1, 1),
                 ShapeError);
    EXPECT_THROW(conv2d_forward(Tensor<double>({2, 4, 4}), Tensor<double>({1, 2, 3, 3}), Tensor<double>(), 1, 1),
                 ShapeError);
}

TEST(TransposedConv, EachInputPixelPaintsTwoByTwoBlock) {
    Tensor<double> x({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
    Tensor<double> w({1, 1, 2, 2}, std::vector<double>{1, 10, 100, 1000});
    const auto y = transposed_conv2x_forward(x, w, Tensor<double>({1}, 0.5));
    ASSERT_EQ(y.dims(), (Dims{1, 1, 4, 4}));
    EXPECT_DOUBLE_EQ(y.at(0, 0, 0, 0), 1.5);
    EXPECT_DOUBLE_EQ(y.at(0, 0, 1, 1), 1000.5);
    EXPECT_DOUBLE_EQ(y.at(0, 0, 2, 3), 40.5);
    EXPECT_DOUBLE_EQ(y.at(0, 0, 3, 2), 400.5);
    EXPECT_DOUBLE_EQ(y.at(0, 0, 3, 0), 300.5);
}

TEST(Pointwise, ReluAndSigmoid) {
    Tensor<double> x({4}, std::vector<double>{-2, -0.0, 0.5, 3});
    const auto r = relu_forward(x);
    EXPECT_EQ(r.storage(), (std::vector<double>{0, 0, 0.5, 3}));
    const auto s = sigmoid_forward(x);
    EXPECT_DOUBLE_EQ(s[1], 0.5);
    EXPECT_NEAR(s[3], 1 / (1 + std::exp(-3.0)), 1e-15);
    const auto ds = sigmoid_backward(s, Tensor<double>({4}, 1.0));
    EXPECT_DOUBLE_EQ(ds[1], 0.25);
    const auto big = sigmoid_forward(Tensor<double>({2}, std::vector<double>{-800, 800}));
    EXPECT_EQ(big[0], 0.0);
    EXPECT_EQ(big[1], 1.0);
}

TEST(Pointwise, MulBroadcastsSingleChannel) {
    gen::Gen g(43);
    const auto a = g.tensor({2, 3, 2, 2});
    const auto b = g.tensor({2, 1, 2, 2});
    const auto y = mul_forward(a, b);
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < 2; ++i)
                for (std::size_t j = 0; j < 2; ++j) EXPECT_DOUBLE_EQ(y.at(n, c, i, j), a.at(n, c, i, j) * b.at(n, 0, i, j));
    const auto grads = mul_backward(a, b, Tensor<double>(y.dims(), 1.0));
    EXPECT_EQ(grads.b.dims(), b.dims());
    EXPECT_NEAR(grads.b.at(1, 0, 1, 0), a.at(1, 0, 1, 0) + a.at(1, 1, 1, 0) + a.at(1, 2, 1, 0), 1e-15);
    EXPECT_THROW(mul_forward(a, g.tensor({2, 2, 2, 2})), ShapeError);
}

TEST(Resampling, MaxpoolPicksBlockMaximum) {
    Tensor<double> x({1, 1, 2, 4}, std::vector<double>{1, 5, 2, 2, 3, 4, 2, 2});
    const auto y = maxpool2x2_forward(x);
    EXPECT_EQ(y.storage(), (std::vector<double>{5, 2}));
    const auto dx = maxpool2x2_backward(x, Tensor<double>({1, 1, 1, 2}, std::vector<double>{1, 7}));
    // ties go to the first maximum in row-major order
    EXPECT_EQ(dx.storage(), (std::vector<double>{0, 1, 7, 0, 0, 0, 0, 0}));
}

TEST(Resampling, NearestUpsampleRoundTrip) {
    gen::Gen g(44);
    const auto x = g.tensor({1, 2, 3, 3});
    const auto up = nearest_upsample2x_forward(x);
    ASSERT_EQ(up.dims(), (Dims{1, 2, 6, 6}));
    EXPECT_EQ(up.at(0, 1, 5, 4), x.at(0, 1, 2, 2));
    EXPECT_EQ(maxpool2x2_forward(up), x);
    const auto back = nearest_upsample2x_backward(Tensor<double>(up.dims(), 1.0));
    for (double v : back.data()) EXPECT_EQ(v, 4.0);
}

TEST(Resampling, ConcatSplitsBack) {
    gen::Gen g(45);
    const auto a = g.tensor({2, 2, 3, 3});
    const auto b = g.tensor({2, 3, 3, 3});
    const auto c = concat_channels_forward(a, b);
    ASSERT_EQ(c.dims(), (Dims{2, 5, 3, 3}));
    const auto parts = concat_channels_backward(c, 2);
    EXPECT_EQ(parts.a, a);
    EXPECT_EQ(parts.b, b);
}

TEST(BatchNorm, TrainModeNormalisesAndUpdatesRunningStats) {
    Tensor<double> x({2, 1, 1, 2}, std::vector<double>{1, 2, 3, 4});
    const auto st = BatchNormState<double>::fresh(1);
    const auto r = batchnorm_forward(x, Tensor<double>({1}, 1.0), Tensor<double>({1}, 0.0), st, Mode::Train);
    const double mean = 2.5, var = 1.25;
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(r.output[i], (x[i] - mean) / std::sqrt(var + 1e-5), 1e-12);
    EXPECT_NEAR(r.running.running_mean[0], 0.1 * mean, 1e-15);
    EXPECT_NEAR(r.running.running_var[0], 0.9 + 0.1 * (5.0 / 3.0), 1e-15);
    EXPECT_EQ(st.running_mean[0], 0.0);
}

TEST(BatchNorm, EvalModeUsesRunningStats) {
    Tensor<double> x({1, 2, 1, 1}, std::vector<double>{3, 3});
    BatchNormState<double> st{Tensor<double>({2}, std::vector<double>{1, 2}), Tensor<double>({2}, std::vector<double>{4, 1})};
    const auto r = batchnorm_forward(x, Tensor<double>({2}, 2.0), Tensor<double>({2}, 0.5), st, Mode::Eval);
    EXPECT_NEAR(r.output[0], 2 * 2 / std::sqrt(4 + 1e-5) + 0.5, 1e-12);
    EXPECT_NEAR(r.output[1], 2 * 1 / std::sqrt(1 + 1e-5) + 0.5, 1e-12);
    EXPECT_EQ(r.running.running_mean, st.running_mean);
}

TEST(BatchNorm, TrainGradientSumsToZeroPerChannel) {
    gen::Gen g(46);
    const auto x = g.tensor({3, 2, 3, 3});
    const auto r = batchnorm_forward(x, g.tensor({2}, 0.5, 2), g.tensor({2}), BatchNormState<double>::fresh(2),
                                     Mode::Train);
    const auto grads = batchnorm_backward(r.cache, g.tensor({2}, 0.5, 2), g.tensor(x.dims()));
    for (std::size_t c = 0; c < 2; ++c) {
        double s = 0;
        for (std::size_t n = 0; n < 3; ++n)
            for (std::size_t i = 0; i < 9; ++i) s += grads.input[(n * 2 + c) * 9 + i];
        EXPECT_NEAR(s, 0.0, 1e-12);
    }
}

TEST(Loss, BceValueAndClamp) {
    Tensor<double> p({2}, std::vector<double>{0.8, 0.3});
    Tensor<double> t({2}, std::vector<double>{1, 0});
    const auto l = bce_loss(p, t);
    EXPECT_NEAR(l.loss, -(std::log(0.8) + std::log(0.7)) / 2, 1e-15);
    EXPECT_NEAR(l.grad[0], -1 / (0.8 * 2), 1e-12);
    const auto clamped = bce_loss(Tensor<double>({1}, 0.0), Tensor<double>({1}, 1.0));
    EXPECT_NEAR(clamped.loss, -std::log(1e-7), 1e-9);
    EXPECT_TRUE(std::isfinite(clamped.grad[0]));
}

TEST(Loss, LogitsFormMatchesProbabilityForm) {
    gen::for_all(50, 47, [](gen::Gen& g, std::uint64_t) {
        const auto z = g.tensor({1, 1, 3, 3}, -5, 5);
        Tensor<double> t(z.dims());
        for (auto& v : t.data()) v = g.coin() ? 1 : 0;
        const auto a = bce_with_logits(z, t);
        const auto b = bce_loss(sigmoid_forward(z), t);
        EXPECT_NEAR(a.loss, b.loss, 1e-9);
        const auto p = sigmoid_forward(z);
        for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(a.grad[i], (p[i] - t[i]) / 9.0, 1e-12);
    });
}

TEST(Loss, LogitsStableAtExtremes) {
    const auto l = bce_with_logits(Tensor<double>({2}, std::vector<double>{-1000, 1000}),
                                   Tensor<double>({2}, std::vector<double>{1, 0}));
    // the reported loss uses the same clamp as the probability form while the
    // gradient keeps its full magnitude
    EXPECT_NEAR(l.loss, -std::log(1e-7), 1e-6);
    EXPECT_NEAR(l.grad[0], -0.5, 1e-12);
    EXPECT_NEAR(l.grad[1], 0.5, 1e-12);
}

TEST(Layers, FloatAndDoubleAgree) {
    gen::Gen g(48);
    const auto x = g.tensor({1, 2, 6, 6});
    const auto w = g.tensor({3, 2, 3, 3});
    const auto b = g.tensor({3});
    const auto yd = conv2d_forward(x, w, b, 1, 1);
    const auto yf = conv2d_forward(x.cast<float>(), w.cast<float>(), b.cast<float>(), 1, 1);
    for (std::size_t i = 0; i < yd.size(); ++i) EXPECT_NEAR(yf[i], yd[i], 1e-5);
}
