#include <random>

#include <benchmark/benchmark.h>

#include "quanvseg/attention_unet.hpp"
#include "quanvseg/layers.hpp"

using namespace quanvseg;

namespace {

nn::Tensor<float> noise(nn::Dims d, std::uint64_t seed) {
    nn::Tensor<float> t(std::move(d));
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> nd;
    for (auto& v : t.data()) v = nd(rng);
    return t;
}

}  // namespace

static void BM_Conv3x3Forward(benchmark::State& state) {
    const auto c = static_cast<std::size_t>(state.range(0));
    const auto x = noise({8, c, 64, 64}, 1);
    const auto w = noise({c, c, 3, 3}, 2);
    const auto b = noise({c}, 3);
    for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d_forward(x, w, b, 1, 1));
}
BENCHMARK(BM_Conv3x3Forward)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

static void BM_Conv3x3Backward(benchmark::State& state) {
    const auto c = static_cast<std::size_t>(state.range(0));
    const auto x = noise({8, c, 64, 64}, 1);
    const auto w = noise({c, c, 3, 3}, 2);
    const auto dy = noise({8, c, 64, 64}, 4);
    for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d_backward(x, w, true, dy, 1, 1));
}
BENCHMARK(BM_Conv3x3Backward)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

static void BM_UNetTrainStep(benchmark::State& state) {
    unet::AttentionUNetConfig cfg;
    const unet::AttentionUNet<float> model(cfg, 0);
    const auto x = noise({8, 1, 64, 64}, 5);
    nn::Tensor<float> y(x.dims());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] > 0 ? 1.0f : 0.0f;
    for (auto _ : state) {
        const auto pass = model.forward(x, nn::Mode::Train);
        const auto loss = nn::bce_with_logits(pass.logits, y);
        benchmark::DoNotOptimize(model.backward(pass, loss.grad, unet::GradWrt::Logits));
    }
}
BENCHMARK(BM_UNetTrainStep)->Unit(benchmark::kMillisecond);
