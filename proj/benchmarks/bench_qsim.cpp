#include <random>

#include <benchmark/benchmark.h>

#include "quanvseg/qsim.hpp"
#include "quanvseg/random.hpp"

using namespace quanvseg::qsim;

static void BM_ApplyRy(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    auto s = new_zero_state(n);
    const Gate g = Gate::ry(n / 2, 0.3);
    for (auto _ : state) {
        apply_gate_in_place(s, g);
        benchmark::DoNotOptimize(s.amplitudes().data());
    }
}
BENCHMARK(BM_ApplyRy)->Arg(4)->Arg(9)->Arg(16);

static void BM_ApplyCnot(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    auto s = new_zero_state(n);
    const Gate g = Gate::cnot(0, n - 1);
    for (auto _ : state) {
        apply_gate_in_place(s, g);
        benchmark::DoNotOptimize(s.amplitudes().data());
    }
}
BENCHMARK(BM_ApplyCnot)->Arg(4)->Arg(9)->Arg(16);

static void BM_EncodeRunMeasure(benchmark::State& state) {
    const auto spec = build_circuit(Template::StronglyEntangled, 9, 2, 0);
    std::mt19937_64 rng(1);
    std::vector<double> v(9);
    for (auto& x : v) x = quanvseg::uniform_unit(rng);
    for (auto _ : state) benchmark::DoNotOptimize(measure_z_expectations(run_circuit(spec, angle_encode(v, 9))));
}
BENCHMARK(BM_EncodeRunMeasure);

static void BM_CompiledCircuit(benchmark::State& state) {
    const auto spec = build_circuit(static_cast<Template>(state.range(0)), 9, 2, 0);
    const CompiledCircuit cc(spec);
    std::mt19937_64 rng(1);
    std::vector<double> v(9), out(9);
    std::vector<Complex> scratch;
    for (auto& x : v) x = quanvseg::uniform_unit(rng);
    for (auto _ : state) {
        cc.expectations(v, out, scratch);
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_CompiledCircuit)->Arg(0)->Arg(1)->Arg(2);
