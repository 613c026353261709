#include "quanvseg/qsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "quanvseg/errors.hpp"

namespace quanvseg::qsim {
namespace {

using Mat2 = std::array<Complex, 4>;

constexpr Mat2 kIdentity2{Complex{1, 0}, Complex{0, 0}, Complex{0, 0}, Complex{1, 0}};

void check_qubit_count(int n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits) {
        throw SizeError("qubit count " + std::to_string(n_qubits) + " outside [1, " +
                        std::to_string(kMaxQubits) + "]");
    }
}

Mat2 rotation_matrix(GateKind kind, double angle) {
    const double c = std::cos(angle / 2);
    const double s = std::sin(angle / 2);
    switch (kind) {
        case GateKind::RX: return {Complex{c, 0}, Complex{0, -s}, Complex{0, -s}, Complex{c, 0}};
        case GateKind::RY: return {Complex{c, 0}, Complex{-s, 0}, Complex{s, 0}, Complex{c, 0}};
        case GateKind::RZ: return {Complex{c, -s}, Complex{0, 0}, Complex{0, 0}, Complex{c, s}};
        case GateKind::CNOT: break;
    }
    throw StateError("rotation_matrix called for CNOT");
}

// std::complex operator* goes through the NaN-recovering library routine;
// every value here is finite, so the textbook product is enough.
inline Complex mul(const Complex& a, const Complex& b) {
    return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

// a * b for row-major 2x2
Mat2 matmul(const Mat2& a, const Mat2& b) {
    return {mul(a[0], b[0]) + mul(a[1], b[2]), mul(a[0], b[1]) + mul(a[1], b[3]),
            mul(a[2], b[0]) + mul(a[3], b[2]), mul(a[2], b[1]) + mul(a[3], b[3])};
}

std::size_t bit_of(int qubit, int n_qubits) {
    return std::size_t{1} << static_cast<unsigned>(n_qubits - 1 - qubit);
}

void apply_single(std::span<Complex> amps, int n_qubits, int qubit, const Complex* m) {
    const std::size_t stride = bit_of(qubit, n_qubits);
    const std::size_t dim = amps.size();
    for (std::size_t block = 0; block < dim; block += 2 * stride) {
        for (std::size_t i = block; i < block + stride; ++i) {
            const Complex a0 = amps[i];
            const Complex a1 = amps[i + stride];
            amps[i] = mul(m[0], a0) + mul(m[1], a1);
            amps[i + stride] = mul(m[2], a0) + mul(m[3], a1);
        }
    }
}

void apply_cnot(std::span<Complex> amps, int n_qubits, int control, int target) {
    const std::size_t cbit = bit_of(control, n_qubits);
    const std::size_t tbit = bit_of(target, n_qubits);
    for (std::size_t i = 0; i < amps.size(); ++i) {
        if ((i & cbit) != 0 && (i & tbit) == 0) std::swap(amps[i], amps[i | tbit]);
    }
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    // rejection sampling keeps the draw unbiased
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return static_cast<std::size_t>(x % n);
}

double uniform_angle(std::mt19937_64& rng) {
    constexpr double kTwoPi = 2 * std::numbers::pi;
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    const double angle = u * kTwoPi;
    return angle < kTwoPi ? angle : 0.0;
}

void check_unit_interval(double v) {
    if (!(v >= 0.0 && v <= 1.0)) {
        throw EncodingRangeError("encoding value " + std::to_string(v) + " outside [0, 1]");
    }
}

}  // namespace

StateVector::StateVector(int n_qubits) : n_qubits_(n_qubits) {
    check_qubit_count(n_qubits);
    amplitudes_.assign(std::size_t{1} << n_qubits, Complex{0, 0});
    amplitudes_[0] = Complex{1, 0};
}

StateVector StateVector::from_amplitudes(std::vector<Complex> amplitudes) {
    const std::size_t dim = amplitudes.size();
    if (dim < 2 || (dim & (dim - 1)) != 0) {
        throw SizeError("amplitude count " + std::to_string(dim) + " is not a power of two >= 2");
    }
    int n = 0;
    while ((std::size_t{1} << n) < dim) ++n;
    check_qubit_count(n);
    StateVector s;
    s.n_qubits_ = n;
    s.amplitudes_ = std::move(amplitudes);
    if (std::abs(s.norm() - 1.0) > 1e-8) throw NumericError("state vector is not normalised");
    return s;
}

double StateVector::norm() const {
    double sum = 0;
    for (const auto& a : amplitudes_) sum += std::norm(a);
    return std::sqrt(sum);
}

StateVector new_zero_state(int n_qubits) { return StateVector(n_qubits); }

void validate_gate(const Gate& gate, int n_qubits) {
    auto in_range = [&](int q) { return q >= 0 && q < n_qubits; };
    if (!in_range(gate.target)) {
        throw IndexError("target qubit " + std::to_string(gate.target) + " out of range for " +
                         std::to_string(n_qubits) + " qubits");
    }
    if (gate.kind == GateKind::CNOT) {
        if (!gate.control) throw IndexError("CNOT without control qubit");
        if (!in_range(*gate.control)) {
            throw IndexError("control qubit " + std::to_string(*gate.control) + " out of range");
        }
        if (*gate.control == gate.target) throw IndexError("CNOT control equals target");
    } else {
        if (gate.control) throw IndexError("rotation gate with a control qubit");
        if (!std::isfinite(gate.angle)) throw NumericError("non-finite rotation angle");
    }
}

void apply_gate_in_place(StateVector& state, const Gate& gate) {
    validate_gate(gate, state.n_qubits());
    if (gate.kind == GateKind::CNOT) {
        apply_cnot(state.amplitudes(), state.n_qubits(), *gate.control, gate.target);
    } else {
        const Mat2 m = rotation_matrix(gate.kind, gate.angle);
        apply_single(state.amplitudes(), state.n_qubits(), gate.target, m.data());
    }
}

StateVector apply_gate(StateVector state, const Gate& gate) {
    apply_gate_in_place(state, gate);
    return state;
}

StateVector angle_encode(std::span<const double> values, int n_qubits) {
    check_qubit_count(n_qubits);
    if (values.size() > static_cast<std::size_t>(n_qubits)) {
        throw SizeError(std::to_string(values.size()) + " values do not fit " +
                        std::to_string(n_qubits) + " qubits");
    }
    for (double v : values) check_unit_interval(v);
    StateVector state(n_qubits);
    for (std::size_t q = 0; q < values.size(); ++q) {
        apply_gate_in_place(state, Gate::ry(static_cast<int>(q), std::numbers::pi * values[q]));
    }
    return state;
}

std::string_view template_name(Template t) {
    switch (t) {
        case Template::BasicEntangled: return "BasicEntangled";
        case Template::StronglyEntangled: return "StronglyEntangled";
        case Template::Random: return "Random";
        case Template::Custom: return "Custom";
    }
    return "Custom";
}

std::optional<Template> template_from_name(std::string_view name) {
    if (name == "BasicEntangled" || name == "basic") return Template::BasicEntangled;
    if (name == "StronglyEntangled" || name == "strong") return Template::StronglyEntangled;
    if (name == "Random" || name == "random") return Template::Random;
    if (name == "Custom" || name == "custom") return Template::Custom;
    return std::nullopt;
}

CircuitSpec::CircuitSpec(int n_qubits, std::vector<Gate> gates, Template kind, int n_layers,
                         std::uint64_t seed)
    : kind_(kind), n_qubits_(n_qubits), n_layers_(n_layers), seed_(seed), gates_(std::move(gates)) {
    check_qubit_count(n_qubits);
    if (n_layers < 0) throw ConfigError("negative layer count");
    for (const auto& g : gates_) validate_gate(g, n_qubits);
}

CircuitSpec build_circuit(Template kind, int n_qubits, int n_layers, std::uint64_t seed) {
    check_qubit_count(n_qubits);
    if (n_layers < 1) throw ConfigError("n_layers must be >= 1");
    if (kind == Template::Custom) throw ConfigError("Custom circuits are built by hand, not by template");

    std::mt19937_64 rng(seed);
    std::vector<Gate> gates;
    const int n = n_qubits;

    for (int layer = 0; layer < n_layers; ++layer) {
        switch (kind) {
            case Template::BasicEntangled:
                for (int q = 0; q < n; ++q) gates.push_back(Gate::ry(q, uniform_angle(rng)));
                if (n == 2) {
                    gates.push_back(Gate::cnot(0, 1));
                } else if (n > 2) {
                    for (int q = 0; q < n; ++q) gates.push_back(Gate::cnot(q, (q + 1) % n));
                }
                break;
            case Template::StronglyEntangled:
                for (int q = 0; q < n; ++q) {
                    gates.push_back(Gate::rz(q, uniform_angle(rng)));
                    gates.push_back(Gate::ry(q, uniform_angle(rng)));
                    gates.push_back(Gate::rz(q, uniform_angle(rng)));
                }
                if (n >= 2) {
                    const int range = layer % (n - 1) + 1;
                    for (int q = 0; q < n; ++q) gates.push_back(Gate::cnot(q, (q + range) % n));
                }
                break;
            case Template::Random:
                for (int r = 0; r < n; ++r) {
                    const auto axis = uniform_index(rng, 3);
                    const int q = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(n)));
                    const double angle = uniform_angle(rng);
                    const GateKind k = axis == 0 ? GateKind::RX : axis == 1 ? GateKind::RY : GateKind::RZ;
                    gates.push_back(Gate{k, q, std::nullopt, angle});
                }
                for (int c = 0; c < n / 2; ++c) {
                    const int control = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(n)));
                    int target = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(n - 1)));
                    if (target >= control) ++target;
                    gates.push_back(Gate::cnot(control, target));
                }
                break;
            case Template::Custom: break;
        }
    }
    return CircuitSpec(n_qubits, std::move(gates), kind, n_layers, seed);
}

StateVector run_circuit(const CircuitSpec& spec, StateVector state) {
    if (spec.n_qubits() != state.n_qubits()) {
        throw ShapeError("circuit has " + std::to_string(spec.n_qubits()) + " qubits, state has " +
                         std::to_string(state.n_qubits()));
    }
    for (const auto& g : spec.gates()) apply_gate_in_place(state, g);
    return state;
}

std::vector<double> measure_z_expectations(const StateVector& state) {
    const int n = state.n_qubits();
    std::vector<double> z(static_cast<std::size_t>(n), 0.0);
    const auto amps = state.amplitudes();
    for (std::size_t i = 0; i < amps.size(); ++i) {
        const double p = std::norm(amps[i]);
        for (int q = 0; q < n; ++q) z[q] += (i & bit_of(q, n)) ? -p : p;
    }
    for (auto& v : z) v = std::clamp(v, -1.0, 1.0);
    return z;
}

CompiledCircuit::CompiledCircuit(const CircuitSpec& spec) : n_qubits_(spec.n_qubits()) {
    const auto n = static_cast<std::size_t>(n_qubits_);
    prefix_.assign(n, kIdentity2);

    // Fold every single-qubit gate that precedes the first CNOT on its qubit.
    std::vector<bool> entangled(n, false);
    std::vector<Gate> rest;
    for (const auto& g : spec.gates()) {
        if (g.kind == GateKind::CNOT) {
            entangled[static_cast<std::size_t>(*g.control)] = true;
            entangled[static_cast<std::size_t>(g.target)] = true;
            rest.push_back(g);
        } else if (!entangled[static_cast<std::size_t>(g.target)]) {
            auto& p = prefix_[static_cast<std::size_t>(g.target)];
            p = matmul(rotation_matrix(g.kind, g.angle), p);
        } else {
            rest.push_back(g);
        }
    }

    // Drop RZ gates that are the last operation on their qubit.
    std::vector<bool> touched_later(n, false);
    std::vector<bool> keep(rest.size(), true);
    for (std::size_t k = rest.size(); k-- > 0;) {
        const auto& g = rest[k];
        if (g.kind == GateKind::RZ && !touched_later[static_cast<std::size_t>(g.target)]) {
            keep[k] = false;
            continue;
        }
        touched_later[static_cast<std::size_t>(g.target)] = true;
        if (g.control) touched_later[static_cast<std::size_t>(*g.control)] = true;
    }

    // Fuse runs of single-qubit gates on one qubit. A pending matrix is
    // flushed when a CNOT touches its qubit, or at the end.
    std::vector<std::optional<Mat2>> pending(n);
    auto flush = [&](std::size_t q) {
        if (!pending[q]) return;
        Op op{false, static_cast<int>(q), -1, {}};
        std::copy(pending[q]->begin(), pending[q]->end(), op.m);
        ops_.push_back(op);
        pending[q].reset();
    };
    for (std::size_t k = 0; k < rest.size(); ++k) {
        if (!keep[k]) continue;
        const auto& g = rest[k];
        const auto t = static_cast<std::size_t>(g.target);
        if (g.kind == GateKind::CNOT) {
            flush(static_cast<std::size_t>(*g.control));
            flush(t);
            ops_.push_back(Op{true, g.target, *g.control, {}});
        } else {
            pending[t] = matmul(rotation_matrix(g.kind, g.angle), pending[t].value_or(kIdentity2));
        }
    }
    for (std::size_t q = 0; q < n; ++q) flush(q);
}

void CompiledCircuit::expectations(std::span<const double> values, std::span<double> out,
                                   std::vector<Complex>& scratch) const {
    const auto n = static_cast<std::size_t>(n_qubits_);
    if (values.size() > n) throw SizeError("too many encoding values for circuit");
    if (out.size() != n) throw SizeError("output span must hold one value per qubit");

    const std::size_t dim = std::size_t{1} << n;
    scratch.resize(dim);

    // Product state built MSB-first: amplitude index bit for qubit 0 is the
    // highest, matching the simulator convention.
    scratch[0] = Complex{1, 0};
    std::size_t len = 1;
    for (std::size_t q = 0; q < n; ++q) {
        double v = 0.0;
        if (q < values.size()) {
            v = values[q];
            check_unit_interval(v);
        }
        const double half = std::numbers::pi * v / 2;
        const Complex e0{std::cos(half), 0};
        const Complex e1{std::sin(half), 0};
        const auto& p = prefix_[q];
        const Complex a = mul(p[0], e0) + mul(p[1], e1);
        const Complex b = mul(p[2], e0) + mul(p[3], e1);
        for (std::size_t k = len; k-- > 0;) {
            const Complex base = scratch[k];
            scratch[2 * k] = mul(base, a);
            scratch[2 * k + 1] = mul(base, b);
        }
        len *= 2;
    }

    std::span<Complex> amps(scratch.data(), dim);
    for (const auto& op : ops_) {
        if (op.is_cnot) {
            apply_cnot(amps, n_qubits_, op.control, op.target);
        } else {
            apply_single(amps, n_qubits_, op.target, op.m);
        }
    }

    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
        const double p = std::norm(amps[i]);
        for (std::size_t q = 0; q < n; ++q) {
            out[q] += (i & bit_of(static_cast<int>(q), n_qubits_)) ? -p : p;
        }
    }
    for (auto& v : out) v = std::clamp(v, -1.0, 1.0);
}

}  // namespace quanvseg::qsim
