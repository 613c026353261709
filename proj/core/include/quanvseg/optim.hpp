#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "quanvseg/tensor.hpp"

namespace quanvseg::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Moments mirror the parameter list they were created for.
template <typename T>
struct AdamState {
    AdamConfig config;
    std::int64_t step = 0;
    std::vector<Tensor<T>> m;
    std::vector<Tensor<T>> v;

    AdamState() = default;
    AdamState(AdamConfig cfg, std::span<Tensor<T>* const> params);
};

// One bias-corrected Adam update. params and grads are index-aligned with the
// tensors the state was built from.
template <typename T>
void adam_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>* const> grads, AdamState<T>& state);

}  // namespace quanvseg::nn
