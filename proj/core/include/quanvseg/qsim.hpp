#pragma once

// State-vector simulation of the small frozen circuits used for
// quanvolution. Conventions shared by every routine in this header and by
// the dense oracle:
//   * qubit 0 is the most significant bit of an amplitude index;
//   * RY(t)|0> = cos(t/2)|0> + sin(t/2)|1>;
//   * CNOT flips the target when the control bit is 1.

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace quanvseg::qsim {

using Complex = std::complex<double>;

inline constexpr int kMaxQubits = 16;
inline constexpr int kMaxOracleQubits = 6;

class StateVector {
public:
    // |0...0> on n_qubits; throws SizeError outside [1, kMaxQubits].
    explicit StateVector(int n_qubits);

    // Takes ownership of explicit amplitudes. Length must be a power of two
    // within the qubit cap and the vector must be normalised to 1e-8.
    static StateVector from_amplitudes(std::vector<Complex> amplitudes);

    int n_qubits() const noexcept { return n_qubits_; }
    std::size_t dimension() const noexcept { return amplitudes_.size(); }
    std::span<const Complex> amplitudes() const noexcept { return amplitudes_; }
    std::span<Complex> amplitudes() noexcept { return amplitudes_; }
    const Complex& operator[](std::size_t i) const { return amplitudes_[i]; }

    double norm() const;

private:
    StateVector() = default;
    int n_qubits_ = 0;
    std::vector<Complex> amplitudes_;
};

StateVector new_zero_state(int n_qubits);

enum class GateKind : std::uint8_t { RX, RY, RZ, CNOT };

struct Gate {
    GateKind kind = GateKind::RY;
    int target = 0;
    std::optional<int> control;
    double angle = 0.0;

    static Gate rx(int qubit, double angle) { return {GateKind::RX, qubit, std::nullopt, angle}; }
    static Gate ry(int qubit, double angle) { return {GateKind::RY, qubit, std::nullopt, angle}; }
    static Gate rz(int qubit, double angle) { return {GateKind::RZ, qubit, std::nullopt, angle}; }
    static Gate cnot(int control, int target) { return {GateKind::CNOT, target, control, 0.0}; }

    bool is_rotation() const noexcept { return kind != GateKind::CNOT; }
    friend bool operator==(const Gate&, const Gate&) = default;
};

// Throws IndexError when the gate does not fit a register of n_qubits, and
// NumericError for a non-finite rotation angle.
void validate_gate(const Gate& gate, int n_qubits);

void apply_gate_in_place(StateVector& state, const Gate& gate);
StateVector apply_gate(StateVector state, const Gate& gate);

// RY(pi * values[j]) on qubit j starting from |0...0>. Qubits past
// values.size() are left at |0>.
StateVector angle_encode(std::span<const double> values, int n_qubits);

enum class Template : std::uint8_t { BasicEntangled, StronglyEntangled, Random, Custom };

std::string_view template_name(Template t);
// Accepts the canonical names plus short aliases (basic, strong, random).
std::optional<Template> template_from_name(std::string_view name);

// A frozen circuit. The gate list is fixed at construction.
class CircuitSpec {
public:
    // Hand-built circuit; every gate is validated against n_qubits.
    CircuitSpec(int n_qubits, std::vector<Gate> gates, Template kind = Template::Custom,
                int n_layers = 0, std::uint64_t seed = 0);

    Template kind() const noexcept { return kind_; }
    int n_qubits() const noexcept { return n_qubits_; }
    int n_layers() const noexcept { return n_layers_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::span<const Gate> gates() const noexcept { return gates_; }

    friend bool operator==(const CircuitSpec&, const CircuitSpec&) = default;

private:
    Template kind_;
    int n_qubits_;
    int n_layers_;
    std::uint64_t seed_;
    std::vector<Gate> gates_;
};

// Materialises one of the three templates. All rotation angles are drawn
// uniformly from [0, 2pi) using a stream seeded by `seed`.
CircuitSpec build_circuit(Template kind, int n_qubits, int n_layers, std::uint64_t seed);

StateVector run_circuit(const CircuitSpec& spec, StateVector state);

// <Z_q> for every qubit, each in [-1, 1].
std::vector<double> measure_z_expectations(const StateVector& state);

// Line-oriented text form; see circuit_text.cpp for the grammar.
std::string serialize_circuit(const CircuitSpec& spec);
CircuitSpec parse_circuit(std::string_view text);

// Row-major 2^n x 2^n matrix built from explicit Kronecker products. Used as
// a test oracle only; n_qubits is capped at kMaxOracleQubits.
struct DenseMatrix {
    std::size_t dim = 0;
    std::vector<Complex> values;

    Complex& operator()(std::size_t r, std::size_t c) { return values[r * dim + c]; }
    const Complex& operator()(std::size_t r, std::size_t c) const { return values[r * dim + c]; }
};

DenseMatrix dense_unitary_oracle(const CircuitSpec& spec);
std::vector<Complex> apply_dense(const DenseMatrix& u, std::span<const Complex> state);
// max |(U^dagger U - I)_{rc}|
double unitarity_defect(const DenseMatrix& u);

// Encode + run + measure in one pass, specialised for quanvolution where the
// same circuit is evaluated on many angle-encoded product states.
//
// Compilation exploits two identities: single-qubit gates that precede every
// entangling gate on their qubit act on a product state and are folded into
// the encoding; runs of adjacent single-qubit gates on one qubit are fused
// into a single 2x2 matrix. Trailing RZ gates commute with the Z measurement
// and are dropped.
class CompiledCircuit {
public:
    explicit CompiledCircuit(const CircuitSpec& spec);

    int n_qubits() const noexcept { return n_qubits_; }

    // values.size() <= n_qubits, each in [0, 1]; out.size() == n_qubits.
    // scratch is resized as needed and may be reused across calls.
    void expectations(std::span<const double> values, std::span<double> out,
                      std::vector<Complex>& scratch) const;

    std::size_t op_count() const noexcept { return ops_.size(); }

private:
    struct Op {
        bool is_cnot;
        int target;
        int control;
        Complex m[4];  // row-major 2x2, unused for CNOT
    };

    int n_qubits_;
    std::vector<std::array<Complex, 4>> prefix_;  // per qubit
    std::vector<Op> ops_;
};

}  // namespace quanvseg::qsim
