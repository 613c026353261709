#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "quanvseg/layers.hpp"

namespace quanvseg::unet {

using nn::Mode;
using nn::Tensor;

template <typename T>
struct ConvLayer {
    Tensor<T> weight;
    Tensor<T> bias;
};

template <typename T>
struct BatchNormLayer {
    Tensor<T> gamma;
    Tensor<T> beta;
    nn::BatchNormState<T> running;
};

// ---------------------------------------------------------------------------
// Attention gate
//
//   g~   = W_g * g                  1x1 conv on decoder features
//   x~   = W_x * x                  1x1 conv on encoder skip features
//   psi  = g~ + x~
//   psi' = ReLU(psi)
//   psi''= BatchNorm(psi')
//   a    = sigmoid(psi'')
//   rho  = W_rho * a                1x1 conv to a single channel
//   out  = rho (.) x                broadcast over x's channels
//
// g must already be at x's spatial resolution.
// ---------------------------------------------------------------------------

template <typename T>
struct AttentionGateParams {
    ConvLayer<T> w_g;    // inter x g_channels x 1 x 1
    ConvLayer<T> w_x;    // inter x x_channels x 1 x 1
    BatchNormLayer<T> bn;  // inter channels
    ConvLayer<T> w_rho;  // 1 x inter x 1 x 1

    static AttentionGateParams zeros(std::size_t g_channels, std::size_t x_channels, std::size_t inter);
};

// Every intermediate of the gate, kept for the backward pass and exposed for
// inspection.
template <typename T>
struct AttentionGateCache {
    Tensor<T> g;
    Tensor<T> x;
    Tensor<T> g_proj;     // W_g * g
    Tensor<T> x_proj;     // W_x * x
    Tensor<T> psi;        // sum
    Tensor<T> psi_relu;   // psi'
    Tensor<T> psi_norm;   // psi''
    Tensor<T> alpha;
    Tensor<T> rho;
    nn::BatchNormCache<T> bn;
    nn::BatchNormState<T> running;  // running statistics after this pass
};

template <typename T>
struct AttentionGateOutput {
    Tensor<T> x_out;
    AttentionGateCache<T> cache;
};

template <typename T>
AttentionGateOutput<T> attention_gate_forward(const Tensor<T>& g, const Tensor<T>& x,
                                              const AttentionGateParams<T>& params, Mode mode);

template <typename T>
struct AttentionGateGrads {
    Tensor<T> g;
    Tensor<T> x;
    AttentionGateParams<T> params;  // running statistics left empty
};

// Throws StateError when the cache does not belong to these params or the
// upstream gradient does not match the forward output.
template <typename T>
AttentionGateGrads<T> attention_gate_backward(const AttentionGateCache<T>& cache,
                                              const AttentionGateParams<T>& params, const Tensor<T>& grad_out);

// ---------------------------------------------------------------------------
// Model configuration
// ---------------------------------------------------------------------------

enum class UpsampleKind {
    Transposed,   // 2x2 stride-2 transposed convolution
    NearestConv,  // nearest x2, then 3x3 conv + BN + ReLU
};

std::string_view upsample_name(UpsampleKind k);
UpsampleKind upsample_from_name(std::string_view name);

struct AttentionUNetConfig {
    int in_channels = 1;
    // One entry per encoder level; the last one is the bottleneck.
    std::vector<int> widths{8, 16, 32};
    // Intermediate width of the gate at each skip (depth - 1 entries). Empty
    // means max(1, widths[j] / 2).
    std::vector<int> gate_widths;
    UpsampleKind upsample = UpsampleKind::Transposed;

    int depth() const noexcept { return static_cast<int>(widths.size()); }
    int gate_width(int level) const;
    // Inputs must be divisible by this in both spatial extents.
    int spatial_multiple() const noexcept { return 1 << (depth() - 1); }
    void validate() const;

    // Reference stand-ins for the full-size models: a 64..1024 baseline on a
    // single band and a quarter-width variant on a 9-channel quanvoluted
    // stack. Both use nearest+conv upsampling.
    static AttentionUNetConfig baseline_reference();
    static AttentionUNetConfig quantum_reference();

    friend bool operator==(const AttentionUNetConfig&, const AttentionUNetConfig&) = default;
};

// Closed-form trainable parameter count (weights, biases, BN gamma/beta).
std::uint64_t count_params(const AttentionUNetConfig& config);

std::uint64_t conv_param_count(std::uint64_t in, std::uint64_t out, std::uint64_t kernel, bool bias);

// ---------------------------------------------------------------------------
// Parameter containers
// ---------------------------------------------------------------------------

template <typename T>
struct ConvBnRelu {
    ConvLayer<T> conv;
    BatchNormLayer<T> bn;
};

template <typename T>
struct DoubleConv {
    ConvBnRelu<T> first;
    ConvBnRelu<T> second;
};

template <typename T>
struct UpBlock {
    ConvLayer<T> conv;   // transposed 2x2 (Cin x Cout x 2 x 2) or 3x3 (Cout x Cin x 3 x 3)
    BatchNormLayer<T> bn;  // empty for transposed upsampling
};

template <typename T>
struct DecoderLevel {
    UpBlock<T> up;
    AttentionGateParams<T> gate;
    DoubleConv<T> conv;
};

template <typename T>
struct ModelParams {
    std::vector<DoubleConv<T>> encoder;  // depth - 1 levels
    DoubleConv<T> bottleneck;
    std::vector<DecoderLevel<T>> decoder;  // decoder[j] joins encoder level j
    ConvLayer<T> head;

    // Visits every trainable tensor as f(name, tensor) in a fixed order.
    template <typename F>
    void visit_trainable(F&& f);
    template <typename F>
    void visit_trainable(F&& f) const;
    // Running statistics (not trained).
    template <typename F>
    void visit_buffers(F&& f);
    template <typename F>
    void visit_buffers(F&& f) const;
};

// Tape of one forward pass. Holds enough to run backward and to commit the
// batch-norm running statistics produced in train mode.
template <typename T>
struct ForwardTape;

template <typename T>
struct ForwardResult {
    Tensor<T> output;  // probabilities, N x 1 x H x W
    Tensor<T> logits;
    std::shared_ptr<const ForwardTape<T>> tape;

    // Gate internals for decoder level j (instrumentation hook).
    const AttentionGateCache<T>& gate_cache(std::size_t level) const;
};

enum class GradWrt { Probabilities, Logits };

template <typename T>
class AttentionUNet {
public:
    // He-normal conv weights, zero biases, BN gamma = 1, beta = 0.
    AttentionUNet(AttentionUNetConfig config, std::uint64_t seed);
    AttentionUNet(AttentionUNetConfig config, ModelParams<T> params);

    const AttentionUNetConfig& config() const noexcept { return config_; }
    ModelParams<T>& params() noexcept { return params_; }
    const ModelParams<T>& params() const noexcept { return params_; }

    ForwardResult<T> forward(const Tensor<T>& input, Mode mode) const;

    // Gradients for every trainable tensor, shaped like params(). grad is
    // taken with respect to the output probabilities or the logits.
    ModelParams<T> backward(const ForwardResult<T>& pass, const Tensor<T>& grad, GradWrt wrt,
                            Tensor<T>* input_grad = nullptr) const;

    // Adopt the running statistics recorded by a train-mode pass.
    void commit_running_stats(const ForwardResult<T>& pass);

    // Number of trainable scalars found by walking the parameter containers.
    std::uint64_t enumerate_params() const;

    std::vector<Tensor<T>*> trainable_tensors();
    std::vector<std::string> trainable_names() const;

    template <typename U>
    AttentionUNet<U> cast() const;

private:
    AttentionUNetConfig config_;
    ModelParams<T> params_;
};

// Structure-only parameter set (all tensors zero) for a config.
template <typename T>
ModelParams<T> allocate_params(const AttentionUNetConfig& config);

// ---- visitor definitions ---------------------------------------------------

namespace detail {

template <typename Conv, typename F>
void visit_conv(Conv& c, const std::string& prefix, F& f) {
    if (!c.weight.empty()) f(prefix + ".weight", c.weight);
    if (!c.bias.empty()) f(prefix + ".bias", c.bias);
}

template <typename Bn, typename F>
void visit_bn(Bn& b, const std::string& prefix, F& f) {
    if (!b.gamma.empty()) f(prefix + ".gamma", b.gamma);
    if (!b.beta.empty()) f(prefix + ".beta", b.beta);
}

template <typename Bn, typename F>
void visit_bn_buffers(Bn& b, const std::string& prefix, F& f) {
    if (!b.running.running_mean.empty()) f(prefix + ".running_mean", b.running.running_mean);
    if (!b.running.running_var.empty()) f(prefix + ".running_var", b.running.running_var);
}

template <typename P, typename F>
void visit_all(P& p, F& f, bool buffers) {
    auto double_conv = [&](auto& dc, const std::string& prefix) {
        if (buffers) {
            visit_bn_buffers(dc.first.bn, prefix + ".bn1", f);
            visit_bn_buffers(dc.second.bn, prefix + ".bn2", f);
        } else {
            visit_conv(dc.first.conv, prefix + ".conv1", f);
            visit_bn(dc.first.bn, prefix + ".bn1", f);
            visit_conv(dc.second.conv, prefix + ".conv2", f);
            visit_bn(dc.second.bn, prefix + ".bn2", f);
        }
    };
    for (std::size_t i = 0; i < p.encoder.size(); ++i) double_conv(p.encoder[i], "enc" + std::to_string(i));
    double_conv(p.bottleneck, "bottleneck");
    for (std::size_t j = p.decoder.size(); j-- > 0;) {
        auto& d = p.decoder[j];
        const std::string prefix = "dec" + std::to_string(j);
        if (buffers) {
            visit_bn_buffers(d.up.bn, prefix + ".up.bn", f);
            visit_bn_buffers(d.gate.bn, prefix + ".gate.bn", f);
        } else {
            visit_conv(d.up.conv, prefix + ".up.conv", f);
            visit_bn(d.up.bn, prefix + ".up.bn", f);
            visit_conv(d.gate.w_g, prefix + ".gate.w_g", f);
            visit_conv(d.gate.w_x, prefix + ".gate.w_x", f);
            visit_bn(d.gate.bn, prefix + ".gate.bn", f);
            visit_conv(d.gate.w_rho, prefix + ".gate.w_rho", f);
        }
        double_conv(d.conv, prefix);
    }
    if (!buffers) visit_conv(p.head, "head", f);
}

}  // namespace detail

template <typename T>
template <typename F>
void ModelParams<T>::visit_trainable(F&& f) {
    detail::visit_all(*this, f, false);
}
template <typename T>
template <typename F>
void ModelParams<T>::visit_trainable(F&& f) const {
    detail::visit_all(*this, f, false);
}
template <typename T>
template <typename F>
void ModelParams<T>::visit_buffers(F&& f) {
    detail::visit_all(*this, f, true);
}
template <typename T>
template <typename F>
void ModelParams<T>::visit_buffers(F&& f) const {
    detail::visit_all(*this, f, true);
}

template <typename T>
template <typename U>
AttentionUNet<U> AttentionUNet<T>::cast() const {
    ModelParams<U> out = allocate_params<U>(config_);
    std::vector<const Tensor<T>*> src;
    params_.visit_trainable([&](const std::string&, const Tensor<T>& t) { src.push_back(&t); });
    params_.visit_buffers([&](const std::string&, const Tensor<T>& t) { src.push_back(&t); });
    std::size_t k = 0;
    out.visit_trainable([&](const std::string&, Tensor<U>& t) { t = src[k++]->template cast<U>(); });
    out.visit_buffers([&](const std::string&, Tensor<U>& t) { t = src[k++]->template cast<U>(); });
    return AttentionUNet<U>(config_, std::move(out));
}

}  // namespace quanvseg::unet
