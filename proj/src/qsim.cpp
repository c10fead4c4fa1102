#include "clqas/qsim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "clqas/errors.hpp"

namespace clqas::qsim {

namespace {

constexpr Complex kI{0.0, 1.0};

void check_qubit(const QuantumState& s, std::size_t q) {
    if (q >= s.num_qubits())
        throw ShapeError("qubit index " + std::to_string(q) + " out of range for " + std::to_string(s.num_qubits()) +
                         " qubits");
}

void rotate(QuantumState& state, GateKind kind, std::size_t q, double angle) {
    check_qubit(state, q);
    auto amps = state.amplitudes();
    const std::size_t m = state.mask(q);
    const double c = std::cos(0.5 * angle), s = std::sin(0.5 * angle);
    switch (kind) {
    case GateKind::RX:
        for (std::size_t i = 0; i < amps.size(); ++i) {
            if (i & m) continue;
            const Complex a0 = amps[i], a1 = amps[i | m];
            amps[i] = c * a0 - kI * s * a1;
            amps[i | m] = -kI * s * a0 + c * a1;
        }
        break;
    case GateKind::RY:
        for (std::size_t i = 0; i < amps.size(); ++i) {
            if (i & m) continue;
            const Complex a0 = amps[i], a1 = amps[i | m];
            amps[i] = c * a0 - s * a1;
            amps[i | m] = s * a0 + c * a1;
        }
        break;
    case GateKind::RZ: {
        const Complex lo{c, -s}, hi{c, s};
        for (std::size_t i = 0; i < amps.size(); ++i) amps[i] *= (i & m) ? hi : lo;
        break;
    }
    case GateKind::CNOT:
        break;
    }
}

void cnot(QuantumState& state, std::size_t control, std::size_t target) {
    check_qubit(state, control);
    check_qubit(state, target);
    if (control == target) throw ShapeError("CNOT control and target must differ");
    auto amps = state.amplitudes();
    const std::size_t cm = state.mask(control), tm = state.mask(target);
    for (std::size_t i = 0; i < amps.size(); ++i)
        if ((i & cm) && !(i & tm)) std::swap(amps[i], amps[i | tm]);
}

Pauli generator(GateKind k) {
    switch (k) {
    case GateKind::RX: return Pauli::X;
    case GateKind::RY: return Pauli::Y;
    case GateKind::RZ: return Pauli::Z;
    default: return Pauli::I;
    }
}

// <lambda| P_q |psi>
Complex pauli_overlap(const QuantumState& lambda, const QuantumState& psi, std::size_t q, Pauli p) {
    const auto l = lambda.amplitudes();
    const auto a = psi.amplitudes();
    const std::size_t m = psi.mask(q);
    Complex acc{0.0, 0.0};
    switch (p) {
    case Pauli::X:
        for (std::size_t i = 0; i < a.size(); ++i) acc += std::conj(l[i]) * a[i ^ m];
        break;
    case Pauli::Y:
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (i & m) continue;
            acc += std::conj(l[i]) * (-kI * a[i | m]) + std::conj(l[i | m]) * (kI * a[i]);
        }
        break;
    case Pauli::Z:
        for (std::size_t i = 0; i < a.size(); ++i) acc += std::conj(l[i]) * ((i & m) ? -a[i] : a[i]);
        break;
    case Pauli::I:
        for (std::size_t i = 0; i < a.size(); ++i) acc += std::conj(l[i]) * a[i];
        break;
    }
    return acc;
}

} // namespace

QuantumState::QuantumState(std::size_t num_qubits) : num_qubits_(num_qubits) {
    if (num_qubits == 0 || num_qubits > 30) throw ShapeError("QuantumState: qubit count must be in [1, 30]");
    amps_.assign(std::size_t{1} << num_qubits, Complex{0.0, 0.0});
    amps_[0] = 1.0;
}

QuantumState::QuantumState(std::size_t num_qubits, std::vector<Complex> amplitudes)
    : num_qubits_(num_qubits), amps_(std::move(amplitudes)) {
    if (num_qubits == 0 || num_qubits > 30) throw ShapeError("QuantumState: qubit count must be in [1, 30]");
    if (amps_.size() != (std::size_t{1} << num_qubits))
        throw ShapeError("QuantumState: amplitude vector length must be 2^num_qubits");
}

double QuantumState::norm() const {
    double s = 0.0;
    for (const Complex& a : amps_) s += std::norm(a);
    return std::sqrt(s);
}

QuantumState prepare_amplitude_state(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 2 || (n & (n - 1)) != 0)
        throw ShapeError("prepare_amplitude_state: length " + std::to_string(n) + " is not a power of two >= 2");
    double s = 0.0;
    for (double v : x) s += v * v;
    if (s == 0.0) throw DomainError("prepare_amplitude_state: zero vector cannot be normalized");
    const double inv = 1.0 / std::sqrt(s);
    std::size_t u = 0;
    while ((std::size_t{1} << u) < n) ++u;
    std::vector<Complex> amps(n);
    for (std::size_t i = 0; i < n; ++i) amps[i] = Complex{x[i] * inv, 0.0};
    return QuantumState(u, std::move(amps));
}

QuantumState prepare_angle_state(std::span<const double> angles) {
    const std::size_t u = angles.size();
    if (u == 0) throw ShapeError("prepare_angle_state: need at least one angle");
    // Product state built directly: amplitude of basis i is prod_q (cos or sin)(angle_q / 2).
    std::vector<double> c(u), s(u);
    for (std::size_t q = 0; q < u; ++q) {
        c[q] = std::cos(0.5 * angles[q]);
        s[q] = std::sin(0.5 * angles[q]);
    }
    std::vector<Complex> amps(std::size_t{1} << u);
    amps[0] = 1.0;
    std::size_t filled = 1;
    for (std::size_t q = 0; q < u; ++q) {
        // extend from `filled` entries (qubits 0..q-1) to 2*filled entries
        for (std::size_t i = filled; i-- > 0;) {
            const Complex a = amps[i];
            amps[2 * i] = a * c[q];
            amps[2 * i + 1] = a * s[q];
        }
        filled *= 2;
    }
    return QuantumState(u, std::move(amps));
}

void apply_gate_inplace(QuantumState& state, const Gate& gate) {
    if (gate.kind == GateKind::CNOT)
        cnot(state, gate.qubit, gate.target);
    else
        rotate(state, gate.kind, gate.qubit, gate.angle);
}

QuantumState apply_gate(QuantumState state, const Gate& gate) {
    apply_gate_inplace(state, gate);
    return state;
}

void apply_circuit_inplace(QuantumState& state, std::span<const Gate> gates) {
    for (const Gate& g : gates) apply_gate_inplace(state, g);
}

void apply_gate_adjoint_inplace(QuantumState& state, const Gate& gate) {
    if (gate.kind == GateKind::CNOT)
        cnot(state, gate.qubit, gate.target);
    else
        rotate(state, gate.kind, gate.qubit, -gate.angle);
}

void apply_pauli_inplace(QuantumState& state, std::size_t qubit, Pauli p) {
    check_qubit(state, qubit);
    auto amps = state.amplitudes();
    const std::size_t m = state.mask(qubit);
    switch (p) {
    case Pauli::I: break;
    case Pauli::X:
        for (std::size_t i = 0; i < amps.size(); ++i)
            if (!(i & m)) std::swap(amps[i], amps[i | m]);
        break;
    case Pauli::Y:
        for (std::size_t i = 0; i < amps.size(); ++i) {
            if (i & m) continue;
            const Complex a0 = amps[i], a1 = amps[i | m];
            amps[i] = -kI * a1;
            amps[i | m] = kI * a0;
        }
        break;
    case Pauli::Z:
        for (std::size_t i = 0; i < amps.size(); ++i)
            if (i & m) amps[i] = -amps[i];
        break;
    }
}

std::vector<double> expect_z_all(const QuantumState& state) {
    const std::size_t u = state.num_qubits();
    std::vector<double> z(u, 0.0);
    const auto amps = state.amplitudes();
    for (std::size_t i = 0; i < amps.size(); ++i) {
        const double p = std::norm(amps[i]);
        if (p == 0.0) continue;
        for (std::size_t q = 0; q < u; ++q) z[q] += (i & state.mask(q)) ? -p : p;
    }
    for (double& v : z) v = std::clamp(v, -1.0, 1.0);
    return z;
}

double expect_z_product(const QuantumState& state, std::span<const std::size_t> qubits) {
    std::size_t mask = 0;
    for (std::size_t q : qubits) {
        check_qubit(state, q);
        mask ^= state.mask(q);
    }
    double acc = 0.0;
    const auto amps = state.amplitudes();
    for (std::size_t i = 0; i < amps.size(); ++i) {
        const double p = std::norm(amps[i]);
        acc += (std::popcount(i & mask) & 1) ? -p : p;
    }
    return acc;
}

std::vector<double> probabilities(const QuantumState& state) {
    const auto amps = state.amplitudes();
    std::vector<double> p(amps.size());
    for (std::size_t i = 0; i < amps.size(); ++i) p[i] = std::norm(amps[i]);
    return p;
}

std::vector<double> empirical_z(std::span<const Bitstring> bits, std::size_t num_qubits) {
    std::vector<double> z(num_qubits, 0.0);
    if (bits.empty()) return z;
    for (Bitstring b : bits)
        for (std::size_t q = 0; q < num_qubits; ++q) z[q] += ((b >> (num_qubits - 1 - q)) & 1U) ? -1.0 : 1.0;
    for (double& v : z) v /= static_cast<double>(bits.size());
    return z;
}

ShotResult sample_bitstrings(const QuantumState& state, std::size_t shots, Rng& rng) {
    if (shots == 0) throw DomainError("sample_bitstrings: shots must be >= 1");
    std::vector<double> cdf = probabilities(state);
    for (std::size_t i = 1; i < cdf.size(); ++i) cdf[i] += cdf[i - 1];
    const double total = cdf.back();
    std::uniform_real_distribution<double> u(0.0, total);
    ShotResult out;
    out.bitstrings.reserve(shots);
    for (std::size_t s = 0; s < shots; ++s) {
        const double r = u(rng);
        auto it = std::upper_bound(cdf.begin(), cdf.end(), r);
        if (it == cdf.end()) --it;
        out.bitstrings.push_back(static_cast<Bitstring>(it - cdf.begin()));
    }
    out.z = empirical_z(out.bitstrings, state.num_qubits());
    return out;
}

AdjointResult adjoint_gradient(const QuantumState& initial, std::span<const Gate> gates, std::span<const double> weights) {
    const std::size_t u = initial.num_qubits();
    if (weights.size() != u) throw ShapeError("adjoint_gradient: one weight per qubit required");
    AdjointResult out;
    QuantumState psi = initial;
    apply_circuit_inplace(psi, gates);
    out.z = expect_z_all(psi);
    for (std::size_t q = 0; q < u; ++q) out.value += weights[q] * out.z[q];

    QuantumState lambda = psi;
    {
        auto l = lambda.amplitudes();
        for (std::size_t i = 0; i < l.size(); ++i) {
            double diag = 0.0;
            for (std::size_t q = 0; q < u; ++q) diag += (i & psi.mask(q)) ? -weights[q] : weights[q];
            l[i] *= diag;
        }
    }
    out.gate_derivatives.assign(gates.size(), 0.0);
    for (std::size_t g = gates.size(); g-- > 0;) {
        const Gate& gate = gates[g];
        if (gate.is_rotation())
            out.gate_derivatives[g] = pauli_overlap(lambda, psi, gate.qubit, generator(gate.kind)).imag();
        apply_gate_adjoint_inplace(psi, gate);
        apply_gate_adjoint_inplace(lambda, gate);
    }
    return out;
}

} // namespace clqas::qsim
