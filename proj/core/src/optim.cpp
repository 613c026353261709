#include "quanvseg/optim.hpp"

#include <cmath>

namespace quanvseg::nn {

template <typename T>
AdamState<T>::AdamState(AdamConfig cfg, std::span<Tensor<T>* const> params) : config(cfg) {
    m.reserve(params.size());
    v.reserve(params.size());
    for (const Tensor<T>* p : params) {
        m.emplace_back(p->dims());
        v.emplace_back(p->dims());
    }
}

template <typename T>
void adam_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>* const> grads, AdamState<T>& state) {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw ShapeError("adam_step: " + std::to_string(params.size()) + " params, " + std::to_string(grads.size()) +
                         " grads, " + std::to_string(state.m.size()) + " moment slots");
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        require_same_shape(*params[k], *grads[k], "adam_step parameter/gradient");
        require_same_shape(*params[k], state.m[k], "adam_step parameter/moment");
    }

    ++state.step;
    const auto& c = state.config;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1 - std::pow(c.beta1, t);
    const double bc2 = 1 - std::pow(c.beta2, t);

    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor<T>& p = *params[k];
        const Tensor<T>& g = *grads[k];
        Tensor<T>& m = state.m[k];
        Tensor<T>& v = state.v[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g[i];
            const double mi = c.beta1 * m[i] + (1 - c.beta1) * gi;
            const double vi = c.beta2 * v[i] + (1 - c.beta2) * gi * gi;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            const double update = c.lr * (mi / bc1) / (std::sqrt(vi / bc2) + c.eps);
            p[i] = static_cast<T>(p[i] - update);
        }
    }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(std::span<Tensor<float>* const>, std::span<const Tensor<float>* const>, AdamState<float>&);
template void adam_step(std::span<Tensor<double>* const>, std::span<const Tensor<double>* const>, AdamState<double>&);

}  // namespace quanvseg::nn
