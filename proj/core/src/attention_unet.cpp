#include "quanvseg/attention_unet.hpp"

#include <cmath>
#include <random>

namespace quanvseg::unet {

// ---- configuration ---------------------------------------------------------

std::string_view upsample_name(UpsampleKind k) {
    return k == UpsampleKind::Transposed ? "transposed" : "nearest-conv";
}

UpsampleKind upsample_from_name(std::string_view name) {
    if (name == "transposed") return UpsampleKind::Transposed;
    if (name == "nearest-conv" || name == "nearest") return UpsampleKind::NearestConv;
    throw ConfigError("unknown upsample kind '" + std::string(name) + "'");
}

int AttentionUNetConfig::gate_width(int level) const {
    if (!gate_widths.empty()) return gate_widths.at(static_cast<std::size_t>(level));
    return std::max(1, widths.at(static_cast<std::size_t>(level)) / 2);
}

void AttentionUNetConfig::validate() const {
    if (in_channels < 1) throw ConfigError("in_channels must be >= 1");
    if (widths.size() < 2) throw ConfigError("depth must be >= 2 (at least one skip connection)");
    if (widths.size() > 8) throw ConfigError("depth above 8 is not supported");
    for (int w : widths)
        if (w < 1) throw ConfigError("all widths must be >= 1");
    if (!gate_widths.empty()) {
        if (gate_widths.size() != widths.size() - 1) {
            throw ConfigError("gate_widths needs depth - 1 = " + std::to_string(widths.size() - 1) + " entries");
        }
        for (int w : gate_widths)
            if (w < 1) throw ConfigError("all gate widths must be >= 1");
    }
}

AttentionUNetConfig AttentionUNetConfig::baseline_reference() {
    AttentionUNetConfig c;
    c.in_channels = 1;
    c.widths = {64, 128, 256, 512, 1024};
    c.upsample = UpsampleKind::NearestConv;
    return c;
}

AttentionUNetConfig AttentionUNetConfig::quantum_reference() {
    AttentionUNetConfig c;
    c.in_channels = 9;
    c.widths = {16, 32, 64, 128, 256};
    c.upsample = UpsampleKind::NearestConv;
    return c;
}

std::uint64_t conv_param_count(std::uint64_t in, std::uint64_t out, std::uint64_t kernel, bool bias) {
    return out * in * kernel * kernel + (bias ? out : 0);
}

std::uint64_t count_params(const AttentionUNetConfig& config) {
    config.validate();
    const auto w = [&](int i) { return static_cast<std::uint64_t>(config.widths[static_cast<std::size_t>(i)]); };
    const auto double_conv = [](std::uint64_t in, std::uint64_t out) {
        return conv_param_count(in, out, 3, true) + 2 * out + conv_param_count(out, out, 3, true) + 2 * out;
    };
    const int depth = config.depth();

    std::uint64_t total = 0;
    std::uint64_t in = static_cast<std::uint64_t>(config.in_channels);
    for (int i = 0; i < depth; ++i) {
        total += double_conv(in, w(i));
        in = w(i);
    }
    for (int j = 0; j < depth - 1; ++j) {
        if (config.upsample == UpsampleKind::Transposed) {
            total += w(j + 1) * w(j) * 4 + w(j);
        } else {
            total += conv_param_count(w(j + 1), w(j), 3, true) + 2 * w(j);
        }
        const auto f = static_cast<std::uint64_t>(config.gate_width(j));
        total += 2 * conv_param_count(w(j), f, 1, true) + 2 * f + conv_param_count(f, 1, 1, true);
        total += double_conv(2 * w(j), w(j));
    }
    total += conv_param_count(w(0), 1, 1, true);
    return total;
}

// ---- parameter allocation --------------------------------------------------

namespace {

template <typename T>
ConvLayer<T> conv_shape(std::size_t in, std::size_t out, std::size_t k) {
    return {Tensor<T>({out, in, k, k}), Tensor<T>({out})};
}

template <typename T>
BatchNormLayer<T> bn_shape(std::size_t c) {
    return {Tensor<T>({c}, T{1}), Tensor<T>({c}), nn::BatchNormState<T>::fresh(c)};
}

template <typename T>
DoubleConv<T> double_conv_shape(std::size_t in, std::size_t out) {
    return {{conv_shape<T>(in, out, 3), bn_shape<T>(out)}, {conv_shape<T>(out, out, 3), bn_shape<T>(out)}};
}

}  // namespace

template <typename T>
ModelParams<T> allocate_params(const AttentionUNetConfig& config) {
    config.validate();
    const auto w = [&](int i) { return static_cast<std::size_t>(config.widths[static_cast<std::size_t>(i)]); };
    const int depth = config.depth();
    ModelParams<T> p;
    std::size_t in = static_cast<std::size_t>(config.in_channels);
    for (int i = 0; i < depth - 1; ++i) {
        p.encoder.push_back(double_conv_shape<T>(in, w(i)));
        in = w(i);
    }
    p.bottleneck = double_conv_shape<T>(in, w(depth - 1));
    for (int j = 0; j < depth - 1; ++j) {
        DecoderLevel<T> d;
        if (config.upsample == UpsampleKind::Transposed) {
            d.up.conv = {Tensor<T>({w(j + 1), w(j), 2, 2}), Tensor<T>({w(j)})};
        } else {
            d.up.conv = conv_shape<T>(w(j + 1), w(j), 3);
            d.up.bn = bn_shape<T>(w(j));
        }
        d.gate = AttentionGateParams<T>::zeros(w(j), w(j), static_cast<std::size_t>(config.gate_width(j)));
        d.conv = double_conv_shape<T>(2 * w(j), w(j));
        p.decoder.push_back(std::move(d));
    }
    p.head = conv_shape<T>(w(0), 1, 1);
    return p;
}

// ---- forward tape ----------------------------------------------------------

template <typename T>
struct ConvBnReluCache {
    Tensor<T> input;
    Tensor<T> pre_relu;
    nn::BatchNormCache<T> bn;
    nn::BatchNormState<T> running;
};

template <typename T>
struct DoubleConvCache {
    ConvBnReluCache<T> first;
    ConvBnReluCache<T> second;
};

template <typename T>
struct DecoderCache {
    Tensor<T> up_input;
    Tensor<T> up_nearest;         // nearest-conv only
    ConvBnReluCache<T> up_conv;   // nearest-conv only
    AttentionGateCache<T> gate;
    std::size_t gated_channels = 0;
    DoubleConvCache<T> conv;
};

template <typename T>
struct ForwardTape {
    Mode mode = Mode::Train;
    std::vector<DoubleConvCache<T>> encoder;
    std::vector<Tensor<T>> skips;
    DoubleConvCache<T> bottleneck;
    std::vector<DecoderCache<T>> decoder;
    Tensor<T> head_input;
};

template <typename T>
const AttentionGateCache<T>& ForwardResult<T>::gate_cache(std::size_t level) const {
    return tape->decoder.at(level).gate;
}

namespace {

template <typename T>
Tensor<T> conv_bn_relu(const Tensor<T>& x, const ConvBnRelu<T>& p, Mode mode, ConvBnReluCache<T>& cache) {
    const int pad = static_cast<int>(p.conv.weight.dim(2) / 2);
    cache.input = x;
    auto y = nn::conv2d_forward(x, p.conv.weight, p.conv.bias, 1, pad);
    auto bn = nn::batchnorm_forward(y, p.bn.gamma, p.bn.beta, p.bn.running, mode);
    cache.pre_relu = std::move(bn.output);
    cache.bn = std::move(bn.cache);
    cache.running = std::move(bn.running);
    return nn::relu_forward(cache.pre_relu);
}

template <typename T>
Tensor<T> conv_bn_relu_backward(const ConvBnReluCache<T>& cache, const ConvBnRelu<T>& p, const Tensor<T>& dy,
                                ConvBnRelu<T>& grads) {
    const int pad = static_cast<int>(p.conv.weight.dim(2) / 2);
    auto d = nn::relu_backward(cache.pre_relu, dy);
    auto bn = nn::batchnorm_backward(cache.bn, p.bn.gamma, d);
    auto conv = nn::conv2d_backward(cache.input, p.conv.weight, true, bn.input, 1, pad);
    grads.conv = {std::move(conv.weight), std::move(conv.bias)};
    grads.bn.gamma = std::move(bn.gamma);
    grads.bn.beta = std::move(bn.beta);
    return std::move(conv.input);
}

template <typename T>
Tensor<T> double_conv(const Tensor<T>& x, const DoubleConv<T>& p, Mode mode, DoubleConvCache<T>& cache) {
    auto h = conv_bn_relu(x, p.first, mode, cache.first);
    return conv_bn_relu(h, p.second, mode, cache.second);
}

template <typename T>
Tensor<T> double_conv_backward(const DoubleConvCache<T>& cache, const DoubleConv<T>& p, const Tensor<T>& dy,
                               DoubleConv<T>& grads) {
    auto d = conv_bn_relu_backward(cache.second, p.second, dy, grads.second);
    return conv_bn_relu_backward(cache.first, p.first, d, grads.first);
}

template <typename T>
void he_normal(Tensor<T>& w, std::size_t fan_in, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (auto& v : w.data()) v = static_cast<T>(dist(rng));
}

}  // namespace

// ---- model -----------------------------------------------------------------

template <typename T>
AttentionUNet<T>::AttentionUNet(AttentionUNetConfig config, std::uint64_t seed)
    : config_(std::move(config)), params_(allocate_params<T>(config_)) {
    std::mt19937_64 rng(seed);
    params_.visit_trainable([&](const std::string& name, Tensor<T>& t) {
        if (name.ends_with(".weight")) {
            // transposed conv weights are Cin x Cout x 2 x 2; others Cout x Cin x k x k
            const bool transposed = name.find(".up.conv") != std::string::npos &&
                                    config_.upsample == UpsampleKind::Transposed;
            const std::size_t fan_in = transposed ? t.dim(0) : t.dim(1) * t.dim(2) * t.dim(3);
            he_normal(t, fan_in, rng);
        }
    });
}

template <typename T>
AttentionUNet<T>::AttentionUNet(AttentionUNetConfig config, ModelParams<T> params)
    : config_(std::move(config)), params_(std::move(params)) {
    const ModelParams<T> expected = allocate_params<T>(config_);
    std::vector<nn::Dims> want;
    expected.visit_trainable([&](const std::string&, const Tensor<T>& t) { want.push_back(t.dims()); });
    expected.visit_buffers([&](const std::string&, const Tensor<T>& t) { want.push_back(t.dims()); });
    std::size_t k = 0;
    auto check = [&](const std::string& name, const Tensor<T>& t) {
        if (k >= want.size() || want[k] != t.dims()) {
            throw ShapeError("parameter " + name + " has shape " + nn::dims_to_string(t.dims()) +
                             " which does not match the configuration");
        }
        ++k;
    };
    params_.visit_trainable(check);
    params_.visit_buffers(check);
    if (k != want.size()) throw ShapeError("parameter set is incomplete for the configuration");
}

template <typename T>
ForwardResult<T> AttentionUNet<T>::forward(const Tensor<T>& input, Mode mode) const {
    nn::require_rank(input, 4, "model input");
    if (input.dim(1) != static_cast<std::size_t>(config_.in_channels)) {
        throw ShapeError("model expects " + std::to_string(config_.in_channels) + " input channels, got " +
                         std::to_string(input.dim(1)));
    }
    const auto mult = static_cast<std::size_t>(config_.spatial_multiple());
    if (input.dim(2) % mult != 0 || input.dim(3) % mult != 0 || input.dim(2) == 0 || input.dim(3) == 0) {
        throw ShapeError("spatial extents " + nn::dims_to_string(input.dims()) + " must be multiples of " +
                         std::to_string(mult));
    }

    auto tape = std::make_shared<ForwardTape<T>>();
    tape->mode = mode;
    const std::size_t levels = params_.encoder.size();
    tape->encoder.resize(levels);
    tape->decoder.resize(levels);

    Tensor<T> h = input;
    for (std::size_t i = 0; i < levels; ++i) {
        Tensor<T> skip = double_conv(h, params_.encoder[i], mode, tape->encoder[i]);
        h = nn::maxpool2x2_forward(skip);
        tape->skips.push_back(std::move(skip));
    }
    h = double_conv(h, params_.bottleneck, mode, tape->bottleneck);

    for (std::size_t j = levels; j-- > 0;) {
        const auto& p = params_.decoder[j];
        auto& c = tape->decoder[j];
        c.up_input = h;
        Tensor<T> g;
        if (config_.upsample == UpsampleKind::Transposed) {
            g = nn::transposed_conv2x_forward(h, p.up.conv.weight, p.up.conv.bias);
        } else {
            c.up_nearest = nn::nearest_upsample2x_forward(h);
            g = conv_bn_relu(c.up_nearest, ConvBnRelu<T>{p.up.conv, p.up.bn}, mode, c.up_conv);
        }
        auto gate = attention_gate_forward(g, tape->skips[j], p.gate, mode);
        c.gate = std::move(gate.cache);
        c.gated_channels = gate.x_out.dim(1);
        h = double_conv(nn::concat_channels_forward(gate.x_out, g), p.conv, mode, c.conv);
    }

    tape->head_input = h;
    ForwardResult<T> r;
    r.logits = nn::conv2d_forward(h, params_.head.weight, params_.head.bias, 1, 0);
    r.output = nn::sigmoid_forward(r.logits);
    r.tape = std::move(tape);
    return r;
}

template <typename T>
ModelParams<T> AttentionUNet<T>::backward(const ForwardResult<T>& pass, const Tensor<T>& grad, GradWrt wrt,
                                          Tensor<T>* input_grad) const {
    if (!pass.tape) throw StateError("forward result has no tape");
    nn::require_same_shape(pass.output, grad, "model backward gradient");
    const auto& tape = *pass.tape;
    const std::size_t levels = params_.encoder.size();
    if (tape.decoder.size() != levels) throw StateError("tape was recorded by a different model");

    ModelParams<T> g;
    g.encoder.resize(levels);
    g.decoder.resize(levels);

    Tensor<T> d = wrt == GradWrt::Logits ? grad : nn::sigmoid_backward(pass.output, grad);
    {
        auto head = nn::conv2d_backward(tape.head_input, params_.head.weight, true, d, 1, 0);
        g.head = {std::move(head.weight), std::move(head.bias)};
        d = std::move(head.input);
    }

    std::vector<Tensor<T>> skip_grads(levels);
    for (std::size_t j = 0; j < levels; ++j) {
        const auto& p = params_.decoder[j];
        const auto& c = tape.decoder[j];
        auto& gd = g.decoder[j];
        auto d_cat = double_conv_backward(c.conv, p.conv, d, gd.conv);
        auto split = nn::concat_channels_backward(d_cat, c.gated_channels);
        auto gate = attention_gate_backward(c.gate, p.gate, split.a);
        gd.gate = std::move(gate.params);
        skip_grads[j] = std::move(gate.x);
        Tensor<T> d_g = nn::add_forward(split.b, gate.g);
        if (config_.upsample == UpsampleKind::Transposed) {
            auto up = nn::transposed_conv2x_backward(c.up_input, p.up.conv.weight, d_g);
            gd.up.conv = {std::move(up.weight), std::move(up.bias)};
            d = std::move(up.input);
        } else {
            ConvBnRelu<T> up_grads;
            auto d_near = conv_bn_relu_backward(c.up_conv, ConvBnRelu<T>{p.up.conv, p.up.bn}, d_g, up_grads);
            gd.up.conv = std::move(up_grads.conv);
            gd.up.bn = std::move(up_grads.bn);
            d = nn::nearest_upsample2x_backward(d_near);
        }
    }

    d = double_conv_backward(tape.bottleneck, params_.bottleneck, d, g.bottleneck);
    for (std::size_t i = levels; i-- > 0;) {
        Tensor<T> d_skip = nn::add_forward(nn::maxpool2x2_backward(tape.skips[i], d), skip_grads[i]);
        d = double_conv_backward(tape.encoder[i], params_.encoder[i], d_skip, g.encoder[i]);
    }
    if (input_grad) *input_grad = std::move(d);
    return g;
}

template <typename T>
void AttentionUNet<T>::commit_running_stats(const ForwardResult<T>& pass) {
    if (!pass.tape) throw StateError("forward result has no tape");
    const auto& tape = *pass.tape;
    if (tape.mode != Mode::Train) return;
    auto adopt_dc = [](DoubleConv<T>& p, const DoubleConvCache<T>& c) {
        p.first.bn.running = c.first.running;
        p.second.bn.running = c.second.running;
    };
    for (std::size_t i = 0; i < params_.encoder.size(); ++i) adopt_dc(params_.encoder[i], tape.encoder[i]);
    adopt_dc(params_.bottleneck, tape.bottleneck);
    for (std::size_t j = 0; j < params_.decoder.size(); ++j) {
        auto& p = params_.decoder[j];
        const auto& c = tape.decoder[j];
        if (config_.upsample == UpsampleKind::NearestConv) p.up.bn.running = c.up_conv.running;
        p.gate.bn.running = c.gate.running;
        adopt_dc(p.conv, c.conv);
    }
}

template <typename T>
std::uint64_t AttentionUNet<T>::enumerate_params() const {
    std::uint64_t n = 0;
    params_.visit_trainable([&](const std::string&, const Tensor<T>& t) { n += t.size(); });
    return n;
}

template <typename T>
std::vector<Tensor<T>*> AttentionUNet<T>::trainable_tensors() {
    std::vector<Tensor<T>*> out;
    params_.visit_trainable([&](const std::string&, Tensor<T>& t) { out.push_back(&t); });
    return out;
}

template <typename T>
std::vector<std::string> AttentionUNet<T>::trainable_names() const {
    std::vector<std::string> out;
    params_.visit_trainable([&](const std::string& name, const Tensor<T>&) { out.push_back(name); });
    return out;
}

template struct ForwardResult<float>;
template struct ForwardResult<double>;
template class AttentionUNet<float>;
template class AttentionUNet<double>;
template ModelParams<float> allocate_params(const AttentionUNetConfig&);
template ModelParams<double> allocate_params(const AttentionUNetConfig&);

}  // namespace quanvseg::unet
