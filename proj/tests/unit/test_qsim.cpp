#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "gen.hpp"
#include "quanvseg/errors.hpp"
#include "quanvseg/qsim.hpp"

using namespace quanvseg;
using namespace quanvseg::qsim;

namespace {

constexpr double kPi = std::numbers::pi;

void expect_state(const StateVector& s, std::vector<Complex> want, double tol = 1e-12) {
    ASSERT_EQ(s.dimension(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
        EXPECT_NEAR(s[i].real(), want[i].real(), tol) << "amplitude " << i;
        EXPECT_NEAR(s[i].imag(), want[i].imag(), tol) << "amplitude " << i;
    }
}

std::vector<Gate> gates_of(const CircuitSpec& spec) { return {spec.gates().begin(), spec.gates().end()}; }

StateVector basis(int n, std::size_t index) {
    std::vector<Complex> a(std::size_t{1} << n);
    a[index] = 1;
    return StateVector::from_amplitudes(a);
}

}  // namespace

TEST(ZeroState, OneQubit) { expect_state(new_zero_state(1), {1, 0}); }

TEST(ZeroState, TwoQubits) { expect_state(new_zero_state(2), {1, 0, 0, 0}); }

TEST(ZeroState, RejectsSeventeenQubits) {
    EXPECT_THROW(new_zero_state(17), SizeError);
    EXPECT_THROW(new_zero_state(0), SizeError);
    EXPECT_NO_THROW(new_zero_state(16));
}

TEST(ApplyGate, RyPiFlipsZeroToOne) {
    expect_state(apply_gate(new_zero_state(1), Gate::ry(0, kPi)), {0, 1});
}

TEST(ApplyGate, RyHalfPiGivesEqualSuperposition) {
    const double h = 1 / std::sqrt(2.0);
    expect_state(apply_gate(new_zero_state(1), Gate::ry(0, kPi / 2)), {h, h});
}

TEST(ApplyGate, CnotTruthTableOnTenGivesEleven) {
    // qubit 0 is the most significant bit: |10> is index 2
    expect_state(apply_gate(basis(2, 2), Gate::cnot(0, 1)), {0, 0, 0, 1});
    expect_state(apply_gate(basis(2, 0), Gate::cnot(0, 1)), {1, 0, 0, 0});
    expect_state(apply_gate(basis(2, 1), Gate::cnot(0, 1)), {0, 1, 0, 0});
    expect_state(apply_gate(basis(2, 3), Gate::cnot(0, 1)), {0, 0, 1, 0});
}

TEST(ApplyGate, RxAndRzMatrices) {
    const double t = 0.7;
    auto s = apply_gate(new_zero_state(1), Gate::rx(0, t));
    expect_state(s, {std::cos(t / 2), Complex(0, -std::sin(t / 2))});
    s = apply_gate(basis(1, 1), Gate::rz(0, t));
    expect_state(s, {0, std::polar(1.0, t / 2)});
}

TEST(ApplyGate, InvalidIndicesThrow) {
    auto s = new_zero_state(2);
    EXPECT_THROW(apply_gate(s, Gate::ry(2, 0.1)), IndexError);
    EXPECT_THROW(apply_gate(s, Gate::ry(-1, 0.1)), IndexError);
    EXPECT_THROW(apply_gate(s, Gate::cnot(1, 1)), IndexError);
    EXPECT_THROW(apply_gate(s, Gate::cnot(0, 5)), IndexError);
    EXPECT_THROW(apply_gate(s, Gate::ry(0, std::nan(""))), NumericError);
}

TEST(ApplyGate, NormPreservedOverRandomSequences) {
    gen::for_all(200, 1, [](gen::Gen& g, std::uint64_t) {
        const int n = g.integer(1, 8);
        auto s = g.state(n);
        for (int k = 0; k < 40; ++k) apply_gate_in_place(s, g.gate(n));
        EXPECT_LT(std::abs(s.norm() - 1.0), 1e-10);
    });
}

TEST(AngleEncode, ZerosGiveGroundState) {
    const std::vector<double> v{0, 0, 0};
    const auto s = angle_encode(v, 3);
    EXPECT_NEAR(std::abs(s[0]), 1.0, 1e-15);
    for (double z : measure_z_expectations(s)) EXPECT_NEAR(z, 1.0, 1e-15);
}

TEST(AngleEncode, OneGivesExcitedState) {
    const std::vector<double> v{1};
    const auto z = measure_z_expectations(angle_encode(v, 1));
    EXPECT_NEAR(z[0], -1.0, 1e-12);
}

TEST(AngleEncode, HalfGivesZeroExpectation) {
    const std::vector<double> v{0.5};
    EXPECT_NEAR(measure_z_expectations(angle_encode(v, 1))[0], 0.0, 1e-10);
}

TEST(AngleEncode, RangeAndSizeErrors) {
    const std::vector<double> bad{1.5};
    EXPECT_THROW(angle_encode(bad, 1), EncodingRangeError);
    const std::vector<double> neg{-0.01};
    EXPECT_THROW(angle_encode(neg, 1), EncodingRangeError);
    const std::vector<double> many{0, 0, 0};
    EXPECT_THROW(angle_encode(many, 2), SizeError);
}

TEST(AngleEncode, SingleQubitExpectationIsCosPiX) {
    gen::for_all(500, 2, [](gen::Gen& g, std::uint64_t) {
        const std::vector<double> v{g.unit()};
        EXPECT_NEAR(measure_z_expectations(angle_encode(v, 1))[0], std::cos(kPi * v[0]), 1e-10);
    });
}

TEST(BuildCircuit, BasicEntangledThreeQubitsOneLayer) {
    const auto spec = build_circuit(Template::BasicEntangled, 3, 1, 42);
    const auto& g = spec.gates();
    ASSERT_EQ(g.size(), 6u);
    for (int q = 0; q < 3; ++q) {
        EXPECT_EQ(g[q].kind, GateKind::RY);
        EXPECT_EQ(g[q].target, q);
        EXPECT_GE(g[q].angle, 0.0);
        EXPECT_LT(g[q].angle, 2 * kPi);
    }
    EXPECT_EQ(g[3], Gate::cnot(0, 1));
    EXPECT_EQ(g[4], Gate::cnot(1, 2));
    EXPECT_EQ(g[5], Gate::cnot(2, 0));
}

TEST(BuildCircuit, BasicEntangledSmallRegisters) {
    const auto two = build_circuit(Template::BasicEntangled, 2, 1, 0);
    ASSERT_EQ(two.gates().size(), 3u);
    EXPECT_EQ(two.gates()[2], Gate::cnot(0, 1));
    const auto one = build_circuit(Template::BasicEntangled, 1, 2, 0);
    EXPECT_EQ(one.gates().size(), 2u);
}

TEST(BuildCircuit, StronglyEntangledNineQubitsTwoLayersCounts) {
    const auto spec = build_circuit(Template::StronglyEntangled, 9, 2, 7);
    std::size_t rot = 0, cnot = 0;
    for (const auto& g : spec.gates()) (g.is_rotation() ? rot : cnot)++;
    EXPECT_EQ(rot, 54u);
    EXPECT_EQ(cnot, 18u);
    // layer 1 uses range 2
    std::vector<Gate> layer1_cnots;
    for (const auto& g : spec.gates())
        if (!g.is_rotation()) layer1_cnots.push_back(g);
    EXPECT_EQ(layer1_cnots[0], Gate::cnot(0, 1));
    EXPECT_EQ(layer1_cnots[9], Gate::cnot(0, 2));
    EXPECT_EQ(layer1_cnots[17], Gate::cnot(8, 1));
}

TEST(BuildCircuit, RandomTemplateShape) {
    const auto spec = build_circuit(Template::Random, 5, 3, 11);
    std::size_t rot = 0, cnot = 0;
    for (const auto& g : spec.gates()) {
        if (g.is_rotation()) {
            ++rot;
        } else {
            ++cnot;
            EXPECT_NE(*g.control, g.target);
        }
    }
    EXPECT_EQ(rot, 15u);
    EXPECT_EQ(cnot, 6u);
}

TEST(BuildCircuit, DeterministicGivenArguments) {
    for (auto t : {Template::BasicEntangled, Template::StronglyEntangled, Template::Random}) {
        EXPECT_EQ(build_circuit(t, 6, 2, 99), build_circuit(t, 6, 2, 99));
        EXPECT_NE(gates_of(build_circuit(t, 6, 2, 99)), gates_of(build_circuit(t, 6, 2, 100)));
    }
}

TEST(BuildCircuit, RejectsBadParameters) {
    EXPECT_THROW(build_circuit(Template::BasicEntangled, 0, 1, 0), SizeError);
    EXPECT_THROW(build_circuit(Template::BasicEntangled, 3, 0, 0), ConfigError);
    EXPECT_THROW(build_circuit(Template::Custom, 3, 1, 0), ConfigError);
}

TEST(RunCircuit, EmptyCircuitIsIdentity) {
    gen::Gen g(3);
    const auto s = g.state(3);
    const CircuitSpec empty(3, {});
    const auto out = run_circuit(empty, s);
    for (std::size_t i = 0; i < s.dimension(); ++i) EXPECT_EQ(out[i], s[i]);
}

TEST(RunCircuit, HandCircuitGivesElevenState) {
    const CircuitSpec spec(2, {Gate::ry(0, kPi), Gate::ry(1, 0), Gate::cnot(0, 1)});
    const auto out = run_circuit(spec, new_zero_state(2));
    expect_state(out, {0, 0, 0, 1});
    const auto z = measure_z_expectations(out);
    EXPECT_NEAR(z[0], -1, 1e-12);
    EXPECT_NEAR(z[1], -1, 1e-12);
}

TEST(RunCircuit, QubitCountMismatchIsShapeError) {
    const CircuitSpec spec(2, {Gate::ry(0, 1)});
    EXPECT_THROW(run_circuit(spec, new_zero_state(3)), ShapeError);
}

TEST(Measure, BasisAndSuperposition) {
    auto z = measure_z_expectations(new_zero_state(2));
    EXPECT_EQ(z, (std::vector<double>{1, 1}));
    z = measure_z_expectations(basis(2, 3));
    EXPECT_EQ(z, (std::vector<double>{-1, -1}));
    const double h = 1 / std::sqrt(2.0);
    z = measure_z_expectations(StateVector::from_amplitudes({h, h}));
    EXPECT_NEAR(z[0], 0, 1e-10);
}

TEST(Measure, ExpectationsBounded) {
    gen::for_all(200, 4, [](gen::Gen& g, std::uint64_t) {
        const auto s = g.state(g.integer(1, 7));
        for (double z : measure_z_expectations(s)) {
            EXPECT_GE(z, -1.0);
            EXPECT_LE(z, 1.0);
        }
    });
}

TEST(Oracle, EmptyCircuitIsIdentity) {
    const auto u = dense_unitary_oracle(CircuitSpec(2, {}));
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(u(r, c), Complex(r == c ? 1.0 : 0.0));
}

TEST(Oracle, CnotIsPermutationSwappingTenAndEleven) {
    const auto u = dense_unitary_oracle(CircuitSpec(2, {Gate::cnot(0, 1)}));
    const int perm[4] = {0, 1, 3, 2};
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(u(r, c), Complex(perm[c] == static_cast<int>(r) ? 1.0 : 0.0));
}

TEST(Oracle, StronglyEntangledIsUnitary) {
    EXPECT_LT(unitarity_defect(dense_unitary_oracle(build_circuit(Template::StronglyEntangled, 4, 2, 5))), 1e-9);
}

TEST(Oracle, RejectsSevenQubits) {
    EXPECT_THROW(dense_unitary_oracle(CircuitSpec(7, {})), SizeError);
}

TEST(Oracle, MatchesSimulatorOnRandomCircuitsAndStates) {
    gen::for_all(100, 5, [](gen::Gen& g, std::uint64_t s) {
        const int n = g.integer(1, 6);
        const auto spec = build_circuit(g.templ(), n, g.integer(1, 3), s);
        const auto u = dense_unitary_oracle(spec);
        const auto state = g.state(n);
        const auto want = apply_dense(u, state.amplitudes());
        const auto got = run_circuit(spec, state);
        for (std::size_t i = 0; i < want.size(); ++i) EXPECT_LT(std::abs(got[i] - want[i]), 1e-9);
    });
}

TEST(Oracle, MatchesSimulatorOnAllBasisStates) {
    const auto spec = build_circuit(Template::Random, 4, 2, 77);
    const auto u = dense_unitary_oracle(spec);
    for (std::size_t b = 0; b < 16; ++b) {
        const auto got = run_circuit(spec, basis(4, b));
        for (std::size_t r = 0; r < 16; ++r) EXPECT_LT(std::abs(got[r] - u(r, b)), 1e-12);
    }
}

TEST(CompiledCircuit, MatchesEncodeRunMeasure) {
    gen::for_all(100, 6, [](gen::Gen& g, std::uint64_t s) {
        const int n = g.integer(1, 9);
        const auto spec = build_circuit(g.templ(), n, g.integer(1, 3), s);
        const CompiledCircuit cc(spec);
        const auto values = g.unit_values(g.size(0, static_cast<std::size_t>(n)));
        std::vector<double> got(n);
        std::vector<Complex> scratch;
        cc.expectations(values, got, scratch);
        const auto want = measure_z_expectations(run_circuit(spec, angle_encode(values, n)));
        for (int q = 0; q < n; ++q) EXPECT_NEAR(got[q], want[q], 1e-12);
    });
}

TEST(CompiledCircuit, HandlesCustomGateOrders) {
    gen::for_all(100, 8, [](gen::Gen& g, std::uint64_t) {
        const int n = g.integer(1, 6);
        std::vector<Gate> gates;
        const int count = g.integer(0, 30);
        for (int k = 0; k < count; ++k) gates.push_back(g.gate(n));
        const CircuitSpec spec(n, gates);
        const CompiledCircuit cc(spec);
        const auto values = g.unit_values(static_cast<std::size_t>(n));
        std::vector<double> got(n);
        std::vector<Complex> scratch;
        cc.expectations(values, got, scratch);
        const auto want = measure_z_expectations(run_circuit(spec, angle_encode(values, n)));
        for (int q = 0; q < n; ++q) EXPECT_NEAR(got[q], want[q], 1e-12);
    });
}

TEST(CircuitSpec, GateListIsImmutableAndValidated) {
    EXPECT_THROW(CircuitSpec(2, {Gate::cnot(0, 2)}), IndexError);
    const CircuitSpec spec(2, {Gate::ry(1, 0.5)});
    EXPECT_EQ(spec.gates().size(), 1u);
}
