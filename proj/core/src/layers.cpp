#include "quanvseg/layers.hpp"

#include <Eigen/Core>
#include <cmath>

#include "quanvseg/parallel.hpp"

namespace quanvseg::nn {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

struct ConvGeometry {
    std::size_t n, cin, h, w, cout, k, ho, wo;
    int stride, pad;
    std::size_t patch() const { return cin * k * k; }
    std::size_t positions() const { return ho * wo; }
};

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& x, const Tensor<T>& weight, int stride, int padding) {
    require_rank(x, 4, "conv2d input");
    require_rank(weight, 4, "conv2d weight");
    require(weight.dim(2) == weight.dim(3), "conv2d kernel must be square");
    require(weight.dim(1) == x.dim(1), "conv2d: weight expects " + std::to_string(weight.dim(1)) +
                                           " input channels, got " + std::to_string(x.dim(1)));
    require(stride >= 1 && padding >= 0, "conv2d: stride must be >= 1 and padding >= 0");
    ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), weight.dim(0), weight.dim(2), 0, 0, stride, padding};
    const long hp = static_cast<long>(g.h) + 2L * padding - static_cast<long>(g.k);
    const long wp = static_cast<long>(g.w) + 2L * padding - static_cast<long>(g.k);
    require(hp >= 0 && wp >= 0, "conv2d: kernel larger than padded input");
    g.ho = static_cast<std::size_t>(hp / stride + 1);
    g.wo = static_cast<std::size_t>(wp / stride + 1);
    return g;
}

// cols: positions x patch, row-major, for sample n
template <typename T>
void im2col(const Tensor<T>& x, std::size_t n, const ConvGeometry& g, T* cols) {
    const std::size_t patch = g.patch();
    for (std::size_t oh = 0; oh < g.ho; ++oh) {
        for (std::size_t ow = 0; ow < g.wo; ++ow) {
            T* row = cols + (oh * g.wo + ow) * patch;
            std::size_t idx = 0;
            for (std::size_t ci = 0; ci < g.cin; ++ci) {
                const T* plane = x.ptr() + (n * g.cin + ci) * g.h * g.w;
                for (std::size_t kh = 0; kh < g.k; ++kh) {
                    const long ih = static_cast<long>(oh) * g.stride - g.pad + static_cast<long>(kh);
                    for (std::size_t kw = 0; kw < g.k; ++kw, ++idx) {
                        const long iw = static_cast<long>(ow) * g.stride - g.pad + static_cast<long>(kw);
                        row[idx] = (ih >= 0 && iw >= 0 && ih < static_cast<long>(g.h) && iw < static_cast<long>(g.w))
                                       ? plane[static_cast<std::size_t>(ih) * g.w + static_cast<std::size_t>(iw)]
                                       : T{0};
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im(const T* cols, const ConvGeometry& g, T* dx_sample) {
    const std::size_t patch = g.patch();
    std::fill(dx_sample, dx_sample + g.cin * g.h * g.w, T{0});
    for (std::size_t oh = 0; oh < g.ho; ++oh) {
        for (std::size_t ow = 0; ow < g.wo; ++ow) {
            const T* row = cols + (oh * g.wo + ow) * patch;
            std::size_t idx = 0;
            for (std::size_t ci = 0; ci < g.cin; ++ci) {
                T* plane = dx_sample + ci * g.h * g.w;
                for (std::size_t kh = 0; kh < g.k; ++kh) {
                    const long ih = static_cast<long>(oh) * g.stride - g.pad + static_cast<long>(kh);
                    for (std::size_t kw = 0; kw < g.k; ++kw, ++idx) {
                        const long iw = static_cast<long>(ow) * g.stride - g.pad + static_cast<long>(kw);
                        if (ih >= 0 && iw >= 0 && ih < static_cast<long>(g.h) && iw < static_cast<long>(g.w)) {
                            plane[static_cast<std::size_t>(ih) * g.w + static_cast<std::size_t>(iw)] += row[idx];
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void require_nchw(const Tensor<T>& t, const char* name) {
    require_rank(t, 4, name);
}

}  // namespace

// ---- convolution -----------------------------------------------------------

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, int stride,
                         int padding) {
    const ConvGeometry g = conv_geometry(x, weight, stride, padding);
    if (!bias.empty()) require(bias.size() == g.cout, "conv2d: bias length must equal output channels");

    Tensor<T> y({g.n, g.cout, g.ho, g.wo});
    const std::size_t patch = g.patch();
    const std::size_t pos = g.positions();
    ConstMapMat<T> w(weight.ptr(), static_cast<Eigen::Index>(g.cout), static_cast<Eigen::Index>(patch));

    parallel_for(g.n, [&](std::size_t n) {
        std::vector<T> cols(pos * patch);
        im2col(x, n, g, cols.data());
        ConstMapMat<T> c(cols.data(), static_cast<Eigen::Index>(pos), static_cast<Eigen::Index>(patch));
        MapMat<T> out(y.ptr() + n * g.cout * pos, static_cast<Eigen::Index>(g.cout), static_cast<Eigen::Index>(pos));
        out.noalias() = w * c.transpose();
        if (!bias.empty()) {
            for (std::size_t co = 0; co < g.cout; ++co) out.row(static_cast<Eigen::Index>(co)).array() += bias[co];
        }
    });
    return y;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight, bool has_bias, const Tensor<T>& grad_out,
                               int stride, int padding) {
    const ConvGeometry g = conv_geometry(x, weight, stride, padding);
    require(grad_out.dims() == Dims{g.n, g.cout, g.ho, g.wo}, "conv2d_backward: gradient shape " +
                                                                  dims_to_string(grad_out.dims()) +
                                                                  " does not match output");
    const std::size_t patch = g.patch();
    const std::size_t pos = g.positions();

    Conv2dGrads<T> grads{Tensor<T>(x.dims()), Tensor<T>(weight.dims()), Tensor<T>()};
    ConstMapMat<T> w(weight.ptr(), static_cast<Eigen::Index>(g.cout), static_cast<Eigen::Index>(patch));

    std::vector<T> all_cols(g.n * pos * patch);
    parallel_for(g.n, [&](std::size_t n) {
        im2col(x, n, g, all_cols.data() + n * pos * patch);
        ConstMapMat<T> dy(grad_out.ptr() + n * g.cout * pos, static_cast<Eigen::Index>(g.cout),
                          static_cast<Eigen::Index>(pos));
        std::vector<T> dcols(pos * patch);
        MapMat<T> dc(dcols.data(), static_cast<Eigen::Index>(pos), static_cast<Eigen::Index>(patch));
        dc.noalias() = dy.transpose() * w;
        col2im(dcols.data(), g, grads.input.ptr() + n * g.cin * g.h * g.w);
    });

    // Weight gradient reduced over the batch in a fixed order.
    MapMat<T> dw(grads.weight.ptr(), static_cast<Eigen::Index>(g.cout), static_cast<Eigen::Index>(patch));
    dw.setZero();
    for (std::size_t n = 0; n < g.n; ++n) {
        ConstMapMat<T> dy(grad_out.ptr() + n * g.cout * pos, static_cast<Eigen::Index>(g.cout),
                          static_cast<Eigen::Index>(pos));
        ConstMapMat<T> c(all_cols.data() + n * pos * patch, static_cast<Eigen::Index>(pos),
                         static_cast<Eigen::Index>(patch));
        dw.noalias() += dy * c;
    }

    if (has_bias) {
        grads.bias = Tensor<T>({g.cout});
        for (std::size_t co = 0; co < g.cout; ++co) {
            double acc = 0;
            for (std::size_t n = 0; n < g.n; ++n) {
                const T* p = grad_out.ptr() + (n * g.cout + co) * pos;
                for (std::size_t i = 0; i < pos; ++i) acc += p[i];
            }
            grads.bias[co] = static_cast<T>(acc);
        }
    }
    return grads;
}

template <typename T>
Tensor<T> transposed_conv2x_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
    require_nchw(x, "transposed conv input");
    require_rank(weight, 4, "transposed conv weight");
    require(weight.dim(0) == x.dim(1) && weight.dim(2) == 2 && weight.dim(3) == 2,
            "transposed conv weight must be Cin x Cout x 2 x 2 with Cin = " + std::to_string(x.dim(1)));
    const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3), cout = weight.dim(1);
    require(bias.empty() || bias.size() == cout, "transposed conv bias length must equal output channels");
    const std::size_t pos = h * w;

    Tensor<T> y({n, cout, 2 * h, 2 * w});
    ConstMapMat<T> wm(weight.ptr(), static_cast<Eigen::Index>(cin), static_cast<Eigen::Index>(cout * 4));
    parallel_for(n, [&](std::size_t s) {
        ConstMapMat<T> xs(x.ptr() + s * cin * pos, static_cast<Eigen::Index>(cin), static_cast<Eigen::Index>(pos));
        RowMat<T> taps = wm.transpose() * xs;  // (cout*4) x pos
        for (std::size_t co = 0; co < cout; ++co) {
            const T b = bias.empty() ? T{0} : bias[co];
            for (std::size_t a = 0; a < 2; ++a)
                for (std::size_t bb = 0; bb < 2; ++bb) {
                    const auto row = static_cast<Eigen::Index>(co * 4 + a * 2 + bb);
                    for (std::size_t i = 0; i < h; ++i)
                        for (std::size_t j = 0; j < w; ++j)
                            y.at(s, co, 2 * i + a, 2 * j + bb) = taps(row, static_cast<Eigen::Index>(i * w + j)) + b;
                }
        }
    });
    return y;
}

template <typename T>
Conv2dGrads<T> transposed_conv2x_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& grad_out) {
    require_nchw(x, "transposed conv input");
    const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3), cout = weight.dim(1);
    require(grad_out.dims() == Dims{n, cout, 2 * h, 2 * w}, "transposed conv gradient shape mismatch");
    const std::size_t pos = h * w;

    // Gather the stride-2 output gradient into (cout*4) x pos per sample.
    std::vector<T> gathered(n * cout * 4 * pos);
    parallel_for(n, [&](std::size_t s) {
        T* g = gathered.data() + s * cout * 4 * pos;
        for (std::size_t co = 0; co < cout; ++co)
            for (std::size_t a = 0; a < 2; ++a)
                for (std::size_t b = 0; b < 2; ++b) {
                    T* row = g + (co * 4 + a * 2 + b) * pos;
                    for (std::size_t i = 0; i < h; ++i)
                        for (std::size_t j = 0; j < w; ++j) row[i * w + j] = grad_out.at(s, co, 2 * i + a, 2 * j + b);
                }
    });

    Conv2dGrads<T> grads{Tensor<T>(x.dims()), Tensor<T>(weight.dims()), Tensor<T>({cout})};
    ConstMapMat<T> wm(weight.ptr(), static_cast<Eigen::Index>(cin), static_cast<Eigen::Index>(cout * 4));
    parallel_for(n, [&](std::size_t s) {
        ConstMapMat<T> gs(gathered.data() + s * cout * 4 * pos, static_cast<Eigen::Index>(cout * 4),
                          static_cast<Eigen::Index>(pos));
        MapMat<T> dx(grads.input.ptr() + s * cin * pos, static_cast<Eigen::Index>(cin), static_cast<Eigen::Index>(pos));
        dx.noalias() = wm * gs;
    });
    MapMat<T> dw(grads.weight.ptr(), static_cast<Eigen::Index>(cin), static_cast<Eigen::Index>(cout * 4));
    dw.setZero();
    for (std::size_t s = 0; s < n; ++s) {
        ConstMapMat<T> xs(x.ptr() + s * cin * pos, static_cast<Eigen::Index>(cin), static_cast<Eigen::Index>(pos));
        ConstMapMat<T> gs(gathered.data() + s * cout * 4 * pos, static_cast<Eigen::Index>(cout * 4),
                          static_cast<Eigen::Index>(pos));
        dw.noalias() += xs * gs.transpose();
    }
    for (std::size_t co = 0; co < cout; ++co) {
        double acc = 0;
        for (std::size_t s = 0; s < n; ++s)
            for (std::size_t k = 0; k < 4 * pos; ++k) acc += gathered[(s * cout * 4 + co * 4) * pos + k];
        grads.bias[co] = static_cast<T>(acc);
    }
    return grads;
}

// ---- pointwise ------------------------------------------------------------

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
    Tensor<T> y(x.dims());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
    return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
    require_same_shape(x, grad_out, "relu_backward");
    Tensor<T> g(x.dims());
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i] > T{0} ? grad_out[i] : T{0};
    return g;
}

template <typename T>
Tensor<T> sigmoid_forward(const Tensor<T>& x) {
    Tensor<T> y(x.dims());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const T v = x[i];
        // split by sign so exp never overflows
        if (v >= T{0}) {
            y[i] = T{1} / (T{1} + std::exp(-v));
        } else {
            const T e = std::exp(v);
            y[i] = e / (T{1} + e);
        }
    }
    return y;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& y, const Tensor<T>& grad_out) {
    require_same_shape(y, grad_out, "sigmoid_backward");
    Tensor<T> g(y.dims());
    for (std::size_t i = 0; i < y.size(); ++i) g[i] = grad_out[i] * y[i] * (T{1} - y[i]);
    return g;
}

template <typename T>
Tensor<T> add_forward(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "add");
    Tensor<T> y(a.dims());
    for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] + b[i];
    return y;
}

template <typename T>
PairGrads<T> add_backward(const Tensor<T>& grad_out) {
    return {grad_out, grad_out};
}

namespace {
template <typename T>
bool broadcasts_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.same_shape(b)) return false;
    require(a.rank() == 4 && b.rank() == 4 && b.dim(1) == 1 && a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) &&
                a.dim(3) == b.dim(3),
            "mul: shapes " + dims_to_string(a.dims()) + " and " + dims_to_string(b.dims()) + " are not compatible");
    return true;
}
}  // namespace

template <typename T>
Tensor<T> mul_forward(const Tensor<T>& a, const Tensor<T>& b) {
    Tensor<T> y(a.dims());
    if (!broadcasts_channels(a, b)) {
        for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] * b[i];
        return y;
    }
    const std::size_t n = a.dim(0), c = a.dim(1), plane = a.dim(2) * a.dim(3);
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t i = 0; i < plane; ++i)
                y[(s * c + ch) * plane + i] = a[(s * c + ch) * plane + i] * b[s * plane + i];
    return y;
}

template <typename T>
PairGrads<T> mul_backward(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& grad_out) {
    require_same_shape(a, grad_out, "mul_backward");
    PairGrads<T> g{Tensor<T>(a.dims()), Tensor<T>(b.dims())};
    if (!broadcasts_channels(a, b)) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            g.a[i] = grad_out[i] * b[i];
            g.b[i] = grad_out[i] * a[i];
        }
        return g;
    }
    const std::size_t n = a.dim(0), c = a.dim(1), plane = a.dim(2) * a.dim(3);
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t i = 0; i < plane; ++i) {
            double acc = 0;
            for (std::size_t ch = 0; ch < c; ++ch) {
                const std::size_t k = (s * c + ch) * plane + i;
                g.a[k] = grad_out[k] * b[s * plane + i];
                acc += static_cast<double>(grad_out[k]) * a[k];
            }
            g.b[s * plane + i] = static_cast<T>(acc);
        }
    return g;
}

// ---- resampling -----------------------------------------------------------

template <typename T>
Tensor<T> maxpool2x2_forward(const Tensor<T>& x) {
    require_nchw(x, "maxpool input");
    const std::size_t n = x.dim(0), c = x.dim(1), ho = x.dim(2) / 2, wo = x.dim(3) / 2;
    require(ho > 0 && wo > 0, "maxpool input smaller than 2x2");
    Tensor<T> y({n, c, ho, wo});
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t i = 0; i < ho; ++i)
                for (std::size_t j = 0; j < wo; ++j) {
                    T m = x.at(s, ch, 2 * i, 2 * j);
                    m = std::max(m, x.at(s, ch, 2 * i, 2 * j + 1));
                    m = std::max(m, x.at(s, ch, 2 * i + 1, 2 * j));
                    m = std::max(m, x.at(s, ch, 2 * i + 1, 2 * j + 1));
                    y.at(s, ch, i, j) = m;
                }
    return y;
}

template <typename T>
Tensor<T> maxpool2x2_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
    require_nchw(x, "maxpool input");
    const std::size_t n = x.dim(0), c = x.dim(1), ho = x.dim(2) / 2, wo = x.dim(3) / 2;
    require(grad_out.dims() == Dims{n, c, ho, wo}, "maxpool gradient shape mismatch");
    Tensor<T> g(x.dims());
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t i = 0; i < ho; ++i)
                for (std::size_t j = 0; j < wo; ++j) {
                    // first maximum in scan order receives the gradient
                    std::size_t bi = 2 * i, bj = 2 * j;
                    for (std::size_t a = 0; a < 2; ++a)
                        for (std::size_t b = 0; b < 2; ++b)
                            if (x.at(s, ch, 2 * i + a, 2 * j + b) > x.at(s, ch, bi, bj)) {
                                bi = 2 * i + a;
                                bj = 2 * j + b;
                            }
                    g.at(s, ch, bi, bj) += grad_out.at(s, ch, i, j);
                }
    return g;
}

template <typename T>
Tensor<T> nearest_upsample2x_forward(const Tensor<T>& x) {
    require_nchw(x, "upsample input");
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor<T> y({n, c, 2 * h, 2 * w});
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t i = 0; i < 2 * h; ++i)
                for (std::size_t j = 0; j < 2 * w; ++j) y.at(s, ch, i, j) = x.at(s, ch, i / 2, j / 2);
    return y;
}

template <typename T>
Tensor<T> nearest_upsample2x_backward(const Tensor<T>& grad_out) {
    require_nchw(grad_out, "upsample gradient");
    require(grad_out.dim(2) % 2 == 0 && grad_out.dim(3) % 2 == 0, "upsample gradient must have even extents");
    const std::size_t n = grad_out.dim(0), c = grad_out.dim(1), h = grad_out.dim(2) / 2, w = grad_out.dim(3) / 2;
    Tensor<T> g({n, c, h, w});
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t i = 0; i < 2 * h; ++i)
                for (std::size_t j = 0; j < 2 * w; ++j) g.at(s, ch, i / 2, j / 2) += grad_out.at(s, ch, i, j);
    return g;
}

template <typename T>
Tensor<T> concat_channels_forward(const Tensor<T>& a, const Tensor<T>& b) {
    require_nchw(a, "concat input");
    require_nchw(b, "concat input");
    require(a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3),
            "concat: " + dims_to_string(a.dims()) + " and " + dims_to_string(b.dims()) + " differ outside channels");
    const std::size_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1), plane = a.dim(2) * a.dim(3);
    Tensor<T> y({n, ca + cb, a.dim(2), a.dim(3)});
    for (std::size_t s = 0; s < n; ++s) {
        std::copy_n(a.ptr() + s * ca * plane, ca * plane, y.ptr() + s * (ca + cb) * plane);
        std::copy_n(b.ptr() + s * cb * plane, cb * plane, y.ptr() + (s * (ca + cb) + ca) * plane);
    }
    return y;
}

template <typename T>
PairGrads<T> concat_channels_backward(const Tensor<T>& grad_out, std::size_t channels_a) {
    require_nchw(grad_out, "concat gradient");
    const std::size_t n = grad_out.dim(0), c = grad_out.dim(1), h = grad_out.dim(2), w = grad_out.dim(3);
    require(channels_a <= c, "concat split exceeds channel count");
    const std::size_t cb = c - channels_a, plane = h * w;
    PairGrads<T> g{Tensor<T>({n, channels_a, h, w}), Tensor<T>({n, cb, h, w})};
    for (std::size_t s = 0; s < n; ++s) {
        std::copy_n(grad_out.ptr() + s * c * plane, channels_a * plane, g.a.ptr() + s * channels_a * plane);
        std::copy_n(grad_out.ptr() + (s * c + channels_a) * plane, cb * plane, g.b.ptr() + s * cb * plane);
    }
    return g;
}

// ---- batch normalisation --------------------------------------------------

template <typename T>
BatchNormResult<T> batchnorm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                                     const BatchNormState<T>& running, Mode mode) {
    require_nchw(x, "batchnorm input");
    const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
    require(gamma.size() == c && beta.size() == c && running.running_mean.size() == c &&
                running.running_var.size() == c,
            "batchnorm parameters expect " + std::to_string(gamma.size()) + " channels, input has " +
                std::to_string(c));
    const std::size_t count = n * plane;

    BatchNormResult<T> r{Tensor<T>(x.dims()), {Tensor<T>(x.dims()), std::vector<T>(c), mode}, running};
    for (std::size_t ch = 0; ch < c; ++ch) {
        double mean, var;
        if (mode == Mode::Train) {
            double sum = 0;
            for (std::size_t s = 0; s < n; ++s) {
                const T* p = x.ptr() + (s * c + ch) * plane;
                for (std::size_t i = 0; i < plane; ++i) sum += p[i];
            }
            mean = sum / static_cast<double>(count);
            double sq = 0;
            for (std::size_t s = 0; s < n; ++s) {
                const T* p = x.ptr() + (s * c + ch) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    const double d = p[i] - mean;
                    sq += d * d;
                }
            }
            var = sq / static_cast<double>(count);
            const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
            r.running.running_mean[ch] =
                static_cast<T>((1 - kBatchNormMomentum) * running.running_mean[ch] + kBatchNormMomentum * mean);
            r.running.running_var[ch] =
                static_cast<T>((1 - kBatchNormMomentum) * running.running_var[ch] + kBatchNormMomentum * unbiased);
        } else {
            mean = running.running_mean[ch];
            var = running.running_var[ch];
        }
        const double inv_std = 1.0 / std::sqrt(var + kBatchNormEps);
        r.cache.inv_std[ch] = static_cast<T>(inv_std);
        for (std::size_t s = 0; s < n; ++s) {
            const std::size_t base = (s * c + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                const T xh = static_cast<T>((x[base + i] - mean) * inv_std);
                r.cache.x_hat[base + i] = xh;
                r.output[base + i] = gamma[ch] * xh + beta[ch];
            }
        }
    }
    return r;
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>& cache, const Tensor<T>& gamma,
                                     const Tensor<T>& grad_out) {
    require_same_shape(cache.x_hat, grad_out, "batchnorm_backward");
    const std::size_t n = grad_out.dim(0), c = grad_out.dim(1), plane = grad_out.dim(2) * grad_out.dim(3);
    if (gamma.size() != c || cache.inv_std.size() != c) throw StateError("batchnorm cache does not match gamma");
    const double count = static_cast<double>(n * plane);

    BatchNormGrads<T> g{Tensor<T>(grad_out.dims()), Tensor<T>({c}), Tensor<T>({c})};
    for (std::size_t ch = 0; ch < c; ++ch) {
        double sum_dy = 0, sum_dy_xh = 0;
        for (std::size_t s = 0; s < n; ++s) {
            const std::size_t base = (s * c + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                sum_dy += grad_out[base + i];
                sum_dy_xh += static_cast<double>(grad_out[base + i]) * cache.x_hat[base + i];
            }
        }
        g.beta[ch] = static_cast<T>(sum_dy);
        g.gamma[ch] = static_cast<T>(sum_dy_xh);
        const double scale = static_cast<double>(gamma[ch]) * cache.inv_std[ch];
        for (std::size_t s = 0; s < n; ++s) {
            const std::size_t base = (s * c + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                const double dy = grad_out[base + i];
                g.input[base + i] = cache.mode == Mode::Train
                                        ? static_cast<T>(scale * (dy - sum_dy / count -
                                                                  cache.x_hat[base + i] * sum_dy_xh / count))
                                        : static_cast<T>(scale * dy);
            }
        }
    }
    return g;
}

// ---- loss -----------------------------------------------------------------

template <typename T>
LossResult<T> bce_loss(const Tensor<T>& predictions, const Tensor<T>& targets) {
    require_same_shape(predictions, targets, "bce_loss");
    require(!predictions.empty(), "bce_loss on empty tensors");
    const double count = static_cast<double>(predictions.size());
    LossResult<T> r{0.0, Tensor<T>(predictions.dims())};
    double total = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double p = std::clamp(static_cast<double>(predictions[i]), kProbabilityClamp, 1 - kProbabilityClamp);
        const double y = targets[i];
        total += -(y * std::log(p) + (1 - y) * std::log(1 - p));
        r.grad[i] = static_cast<T>((p - y) / (p * (1 - p)) / count);
    }
    r.loss = total / count;
    return r;
}

template <typename T>
LossResult<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& targets) {
    require_same_shape(logits, targets, "bce_with_logits");
    require(!logits.empty(), "bce_with_logits on empty tensors");
    const double count = static_cast<double>(logits.size());
    LossResult<T> r{0.0, Tensor<T>(logits.dims())};
    double total = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double z = logits[i];
        const double y = targets[i];
        const double p = z >= 0 ? 1 / (1 + std::exp(-z)) : std::exp(z) / (1 + std::exp(z));
        const double pc = std::clamp(p, kProbabilityClamp, 1 - kProbabilityClamp);
        total += -(y * std::log(pc) + (1 - y) * std::log(1 - pc));
        r.grad[i] = static_cast<T>((p - y) / count);
    }
    r.loss = total / count;
    return r;
}

#define QUANVSEG_INSTANTIATE_LAYERS(T)                                                                             \
    template Tensor<T> conv2d_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int);             \
    template Conv2dGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, bool, const Tensor<T>&, int, int); \
    template Tensor<T> transposed_conv2x_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);            \
    template Conv2dGrads<T> transposed_conv2x_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);      \
    template Tensor<T> relu_forward(const Tensor<T>&);                                                             \
    template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                                          \
    template Tensor<T> sigmoid_forward(const Tensor<T>&);                                                          \
    template Tensor<T> sigmoid_backward(const Tensor<T>&, const Tensor<T>&);                                       \
    template Tensor<T> add_forward(const Tensor<T>&, const Tensor<T>&);                                            \
    template PairGrads<T> add_backward(const Tensor<T>&);                                                          \
    template Tensor<T> mul_forward(const Tensor<T>&, const Tensor<T>&);                                            \
    template PairGrads<T> mul_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                      \
    template Tensor<T> maxpool2x2_forward(const Tensor<T>&);                                                       \
    template Tensor<T> maxpool2x2_backward(const Tensor<T>&, const Tensor<T>&);                                    \
    template Tensor<T> nearest_upsample2x_forward(const Tensor<T>&);                                               \
    template Tensor<T> nearest_upsample2x_backward(const Tensor<T>&);                                              \
    template Tensor<T> concat_channels_forward(const Tensor<T>&, const Tensor<T>&);                                \
    template PairGrads<T> concat_channels_backward(const Tensor<T>&, std::size_t);                                 \
    template BatchNormResult<T> batchnorm_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,            \
                                                  const BatchNormState<T>&, Mode);                                 \
    template BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>&, const Tensor<T>&, const Tensor<T>&);   \
    template LossResult<T> bce_loss(const Tensor<T>&, const Tensor<T>&);                                           \
    template LossResult<T> bce_with_logits(const Tensor<T>&, const Tensor<T>&);

QUANVSEG_INSTANTIATE_LAYERS(float)
QUANVSEG_INSTANTIATE_LAYERS(double)

#undef QUANVSEG_INSTANTIATE_LAYERS

}  // namespace quanvseg::nn
