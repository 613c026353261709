#include <random>

#include <benchmark/benchmark.h>

#include "quanvseg/quanvolution.hpp"
#include "quanvseg/random.hpp"

using namespace quanvseg;

static void BM_Quanvolve(benchmark::State& state) {
    const auto size = static_cast<std::size_t>(state.range(0));
    Raster img(size, size);
    std::mt19937_64 rng(2);
    for (auto& v : img.values) v = uniform_unit(rng);
    const quanv::QuanvConfig cfg(3, 1, quanv::Padding::SameReflect, true,
                                 qsim::build_circuit(qsim::Template::BasicEntangled, 9, 2, 0));
    for (auto _ : state) benchmark::DoNotOptimize(quanv::quanvolve(img, cfg));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(size * size));
}
BENCHMARK(BM_Quanvolve)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
