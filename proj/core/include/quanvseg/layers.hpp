#pragma once

// Forward/backward kernels for the fixed set of layers the Attention U-Net
// needs. All functions are pure: inputs are never modified and batch-norm
// running statistics are returned, not updated in place. Every function is
// instantiated for float (training) and double (gradient checking).
//
// Convolutions use the cross-correlation convention (no kernel flip).

#include "quanvseg/tensor.hpp"

namespace quanvseg::nn {

enum class Mode { Train, Eval };

// ---- convolution -----------------------------------------------------------

// x: N x Cin x H x W, weight: Cout x Cin x k x k, bias: Cout or empty.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, int stride,
                         int padding);

template <typename T>
struct Conv2dGrads {
    Tensor<T> input;
    Tensor<T> weight;
    Tensor<T> bias;  // empty when the layer has no bias
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight, bool has_bias, const Tensor<T>& grad_out,
                               int stride, int padding);

// 2x2 kernel, stride 2. weight: Cin x Cout x 2 x 2, bias: Cout.
template <typename T>
Tensor<T> transposed_conv2x_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
Conv2dGrads<T> transposed_conv2x_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& grad_out);

// ---- pointwise ------------------------------------------------------------

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x);
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out);

template <typename T>
Tensor<T> sigmoid_forward(const Tensor<T>& x);
// Takes the forward output y = sigmoid(x).
template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& y, const Tensor<T>& grad_out);

template <typename T>
Tensor<T> add_forward(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
struct PairGrads {
    Tensor<T> a;
    Tensor<T> b;
};
template <typename T>
PairGrads<T> add_backward(const Tensor<T>& grad_out);

// Elementwise product. b may have a single channel, in which case it is
// broadcast across a's channels.
template <typename T>
Tensor<T> mul_forward(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
PairGrads<T> mul_backward(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& grad_out);

// ---- resampling -----------------------------------------------------------

template <typename T>
Tensor<T> maxpool2x2_forward(const Tensor<T>& x);
template <typename T>
Tensor<T> maxpool2x2_backward(const Tensor<T>& x, const Tensor<T>& grad_out);

template <typename T>
Tensor<T> nearest_upsample2x_forward(const Tensor<T>& x);
template <typename T>
Tensor<T> nearest_upsample2x_backward(const Tensor<T>& grad_out);

template <typename T>
Tensor<T> concat_channels_forward(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
PairGrads<T> concat_channels_backward(const Tensor<T>& grad_out, std::size_t channels_a);

// ---- batch normalisation --------------------------------------------------

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

template <typename T>
struct BatchNormState {
    Tensor<T> running_mean;
    Tensor<T> running_var;

    static BatchNormState fresh(std::size_t channels) {
        return {Tensor<T>({channels}, T{0}), Tensor<T>({channels}, T{1})};
    }
};

template <typename T>
struct BatchNormCache {
    Tensor<T> x_hat;
    std::vector<T> inv_std;
    Mode mode = Mode::Train;
};

template <typename T>
struct BatchNormResult {
    Tensor<T> output;
    BatchNormCache<T> cache;
    BatchNormState<T> running;  // updated in train mode, unchanged in eval mode
};

// Train mode normalises each channel over batch x spatial and blends the
// batch statistics into the running estimates (unbiased variance).
template <typename T>
BatchNormResult<T> batchnorm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                                     const BatchNormState<T>& running, Mode mode);

template <typename T>
struct BatchNormGrads {
    Tensor<T> input;
    Tensor<T> gamma;
    Tensor<T> beta;
};

template <typename T>
BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>& cache, const Tensor<T>& gamma,
                                     const Tensor<T>& grad_out);

// ---- loss -----------------------------------------------------------------

inline constexpr double kProbabilityClamp = 1e-7;

template <typename T>
struct LossResult {
    double loss = 0;
    Tensor<T> grad;
};

// Mean binary cross-entropy over all elements; predictions are clamped to
// [1e-7, 1 - 1e-7]. grad is d loss / d predictions.
template <typename T>
LossResult<T> bce_loss(const Tensor<T>& predictions, const Tensor<T>& targets);

// Same loss evaluated from pre-sigmoid logits; grad is d loss / d logits,
// which stays informative when the sigmoid saturates.
template <typename T>
LossResult<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& targets);

}  // namespace quanvseg::nn
