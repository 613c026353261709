#include "quanvseg/attention_unet.hpp"

namespace quanvseg::unet {

template <typename T>
AttentionGateParams<T> AttentionGateParams<T>::zeros(std::size_t g_channels, std::size_t x_channels, std::size_t inter) {
    AttentionGateParams p;
    p.w_g = {Tensor<T>({inter, g_channels, 1, 1}), Tensor<T>({inter})};
    p.w_x = {Tensor<T>({inter, x_channels, 1, 1}), Tensor<T>({inter})};
    p.bn = {Tensor<T>({inter}, T{1}), Tensor<T>({inter}), nn::BatchNormState<T>::fresh(inter)};
    p.w_rho = {Tensor<T>({1, inter, 1, 1}), Tensor<T>({1})};
    return p;
}

template <typename T>
AttentionGateOutput<T> attention_gate_forward(const Tensor<T>& g, const Tensor<T>& x,
                                              const AttentionGateParams<T>& params, Mode mode) {
    nn::require_rank(g, 4, "attention gate g");
    nn::require_rank(x, 4, "attention gate x");
    if (g.dim(0) != x.dim(0) || g.dim(2) != x.dim(2) || g.dim(3) != x.dim(3)) {
        throw ShapeError("attention gate: g " + nn::dims_to_string(g.dims()) + " and x " +
                         nn::dims_to_string(x.dims()) + " are not spatially aligned");
    }
    if (params.w_rho.weight.dim(0) != 1) throw ShapeError("attention gate: W_rho must produce one channel");

    AttentionGateOutput<T> out;
    auto& c = out.cache;
    c.g = g;
    c.x = x;
    c.g_proj = nn::conv2d_forward(g, params.w_g.weight, params.w_g.bias, 1, 0);
    c.x_proj = nn::conv2d_forward(x, params.w_x.weight, params.w_x.bias, 1, 0);
    c.psi = nn::add_forward(c.g_proj, c.x_proj);
    c.psi_relu = nn::relu_forward(c.psi);
    auto bn = nn::batchnorm_forward(c.psi_relu, params.bn.gamma, params.bn.beta, params.bn.running, mode);
    c.psi_norm = std::move(bn.output);
    c.bn = std::move(bn.cache);
    c.running = std::move(bn.running);
    c.alpha = nn::sigmoid_forward(c.psi_norm);
    c.rho = nn::conv2d_forward(c.alpha, params.w_rho.weight, params.w_rho.bias, 1, 0);
    out.x_out = nn::mul_forward(x, c.rho);
    return out;
}

template <typename T>
AttentionGateGrads<T> attention_gate_backward(const AttentionGateCache<T>& cache, const AttentionGateParams<T>& params,
                                              const Tensor<T>& grad_out) {
    if (cache.rho.empty() || !cache.x.same_shape(grad_out)) {
        throw StateError("attention gate backward: cache does not match upstream gradient " +
                         nn::dims_to_string(grad_out.dims()));
    }
    if (cache.g_proj.dim(1) != params.w_g.weight.dim(0) || cache.alpha.dim(1) != params.w_rho.weight.dim(1) ||
        cache.g.dim(1) != params.w_g.weight.dim(1) || cache.x.dim(1) != params.w_x.weight.dim(1)) {
        throw StateError("attention gate backward: cache was produced with different parameters");
    }

    AttentionGateGrads<T> grads;
    // out = rho (.) x: x receives the direct term rho (.) upstream here
    auto mul = nn::mul_backward(cache.x, cache.rho, grad_out);
    auto rho_g = nn::conv2d_backward(cache.alpha, params.w_rho.weight, true, mul.b, 1, 0);
    auto d_norm = nn::sigmoid_backward(cache.alpha, rho_g.input);
    auto bn_g = nn::batchnorm_backward(cache.bn, params.bn.gamma, d_norm);
    auto d_psi = nn::relu_backward(cache.psi, bn_g.input);
    auto g_g = nn::conv2d_backward(cache.g, params.w_g.weight, true, d_psi, 1, 0);
    auto x_g = nn::conv2d_backward(cache.x, params.w_x.weight, true, d_psi, 1, 0);

    grads.g = std::move(g_g.input);
    grads.x = nn::add_forward(mul.a, x_g.input);
    grads.params.w_g = {std::move(g_g.weight), std::move(g_g.bias)};
    grads.params.w_x = {std::move(x_g.weight), std::move(x_g.bias)};
    grads.params.bn.gamma = std::move(bn_g.gamma);
    grads.params.bn.beta = std::move(bn_g.beta);
    grads.params.w_rho = {std::move(rho_g.weight), std::move(rho_g.bias)};
    return grads;
}

template struct AttentionGateParams<float>;
template struct AttentionGateParams<double>;
template AttentionGateOutput<float> attention_gate_forward(const Tensor<float>&, const Tensor<float>&,
                                                           const AttentionGateParams<float>&, Mode);
template AttentionGateOutput<double> attention_gate_forward(const Tensor<double>&, const Tensor<double>&,
                                                            const AttentionGateParams<double>&, Mode);
template AttentionGateGrads<float> attention_gate_backward(const AttentionGateCache<float>&,
                                                           const AttentionGateParams<float>&, const Tensor<float>&);
template AttentionGateGrads<double> attention_gate_backward(const AttentionGateCache<double>&,
                                                            const AttentionGateParams<double>&, const Tensor<double>&);

}  // namespace quanvseg::unet
