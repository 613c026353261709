#include <cmath>

#include "quanvseg/errors.hpp"
#include "quanvseg/qsim.hpp"

namespace quanvseg::qsim {
namespace {

using Small = std::vector<Complex>;  // square, row-major

Small kron(const Small& a, std::size_t da, const Small& b, std::size_t db) {
    const std::size_t d = da * db;
    Small out(d * d);
    for (std::size_t i = 0; i < da; ++i)
        for (std::size_t j = 0; j < da; ++j)
            for (std::size_t k = 0; k < db; ++k)
                for (std::size_t l = 0; l < db; ++l)
                    out[(i * db + k) * d + (j * db + l)] = a[i * da + j] * b[k * db + l];
    return out;
}

// Kronecker product over qubits 0..n-1 (qubit 0 leftmost = most significant)
Small kron_chain(const std::vector<Small>& factors) {
    Small acc{Complex{1, 0}};
    std::size_t d = 1;
    for (const auto& f : factors) {
        acc = kron(acc, d, f, 2);
        d *= 2;
    }
    return acc;
}

Small gate_2x2(const Gate& g) {
    const double c = std::cos(g.angle / 2);
    const double s = std::sin(g.angle / 2);
    const Complex i{0, 1};
    switch (g.kind) {
        case GateKind::RX: return {c, -i * s, -i * s, c};
        case GateKind::RY: return {c, -s, s, c};
        case GateKind::RZ: return {std::exp(-i * (g.angle / 2)), 0, 0, std::exp(i * (g.angle / 2))};
        case GateKind::CNOT: break;
    }
    throw StateError("gate_2x2 called for CNOT");
}

Small full_gate(const Gate& g, int n) {
    const Small id{1, 0, 0, 1};
    if (g.kind != GateKind::CNOT) {
        std::vector<Small> f(static_cast<std::size_t>(n), id);
        f[static_cast<std::size_t>(g.target)] = gate_2x2(g);
        return kron_chain(f);
    }
    // |0><0|_c (x) I  +  |1><1|_c (x) X_t
    const Small p0{1, 0, 0, 0};
    const Small p1{0, 0, 0, 1};
    const Small x{0, 1, 1, 0};
    std::vector<Small> f0(static_cast<std::size_t>(n), id);
    std::vector<Small> f1(static_cast<std::size_t>(n), id);
    f0[static_cast<std::size_t>(*g.control)] = p0;
    f1[static_cast<std::size_t>(*g.control)] = p1;
    f1[static_cast<std::size_t>(g.target)] = x;
    Small a = kron_chain(f0);
    const Small b = kron_chain(f1);
    for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
    return a;
}

}  // namespace

DenseMatrix dense_unitary_oracle(const CircuitSpec& spec) {
    const int n = spec.n_qubits();
    if (n > kMaxOracleQubits) {
        throw SizeError("dense oracle supports at most " + std::to_string(kMaxOracleQubits) + " qubits");
    }
    const std::size_t dim = std::size_t{1} << n;
    DenseMatrix u{dim, std::vector<Complex>(dim * dim)};
    for (std::size_t r = 0; r < dim; ++r) u(r, r) = 1;

    for (const auto& g : spec.gates()) {
        const Small m = full_gate(g, n);
        DenseMatrix next{dim, std::vector<Complex>(dim * dim)};
        for (std::size_t r = 0; r < dim; ++r)
            for (std::size_t k = 0; k < dim; ++k) {
                const Complex mrk = m[r * dim + k];
                if (mrk == Complex{0, 0}) continue;
                for (std::size_t c = 0; c < dim; ++c) next(r, c) += mrk * u(k, c);
            }
        u = std::move(next);
    }
    return u;
}

std::vector<Complex> apply_dense(const DenseMatrix& u, std::span<const Complex> state) {
    if (state.size() != u.dim) throw ShapeError("state dimension does not match matrix");
    std::vector<Complex> out(u.dim);
    for (std::size_t r = 0; r < u.dim; ++r) {
        Complex acc{0, 0};
        for (std::size_t c = 0; c < u.dim; ++c) acc += u(r, c) * state[c];
        out[r] = acc;
    }
    return out;
}

double unitarity_defect(const DenseMatrix& u) {
    double worst = 0;
    for (std::size_t r = 0; r < u.dim; ++r)
        for (std::size_t c = 0; c < u.dim; ++c) {
            Complex acc{0, 0};
            for (std::size_t k = 0; k < u.dim; ++k) acc += std::conj(u(k, r)) * u(k, c);
            if (r == c) acc -= 1;
            worst = std::max(worst, std::abs(acc));
        }
    return worst;
}

}  // namespace quanvseg::qsim
