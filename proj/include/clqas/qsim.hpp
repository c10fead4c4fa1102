#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "clqas/rng.hpp"

namespace clqas::qsim {

using Complex = std::complex<double>;

/// Basis-state label. Qubit 0 is the most significant bit of the index.
using Bitstring = std::uint64_t;

/**
 * Pure state over num_qubits qubits. Amplitudes are indexed by the basis
 * label with qubit 0 as the most significant bit.
 */
class QuantumState {
public:
    /// |0...0>
    explicit QuantumState(std::size_t num_qubits);
    /// Takes amplitudes as given; throws ShapeError unless length is 2^num_qubits.
    QuantumState(std::size_t num_qubits, std::vector<Complex> amplitudes);

    std::size_t num_qubits() const noexcept { return num_qubits_; }
    std::size_t dimension() const noexcept { return amps_.size(); }
    std::span<const Complex> amplitudes() const noexcept { return amps_; }
    std::span<Complex> amplitudes() noexcept { return amps_; }
    double norm() const;

    /// Bit mask of qubit q inside a basis index.
    std::size_t mask(std::size_t q) const noexcept { return std::size_t{1} << (num_qubits_ - 1 - q); }

private:
    std::size_t num_qubits_;
    std::vector<Complex> amps_;
};

enum class GateKind { RX, RY, RZ, CNOT };

struct Gate {
    GateKind kind = GateKind::RX;
    /// Target of a rotation, or control of a CNOT.
    std::size_t qubit = 0;
    /// Target of a CNOT; unused for rotations.
    std::size_t target = 0;
    double angle = 0.0;
    /// Index into the circuit parameter vector this rotation reads its angle from.
    std::optional<std::size_t> param_slot;

    static Gate rx(std::size_t q, double a, std::optional<std::size_t> slot = {}) { return {GateKind::RX, q, 0, a, slot}; }
    static Gate ry(std::size_t q, double a, std::optional<std::size_t> slot = {}) { return {GateKind::RY, q, 0, a, slot}; }
    static Gate rz(std::size_t q, double a, std::optional<std::size_t> slot = {}) { return {GateKind::RZ, q, 0, a, slot}; }
    static Gate cnot(std::size_t control, std::size_t target) { return {GateKind::CNOT, control, target, 0.0, {}}; }

    bool is_rotation() const noexcept { return kind != GateKind::CNOT; }
};

enum class Pauli { I, X, Y, Z };

/// x / ||x||_2 as real amplitudes; length must be a power of two >= 2.
QuantumState prepare_amplitude_state(std::span<const double> x);

/// Product state (x)_u RY(angles_u)|0>.
QuantumState prepare_angle_state(std::span<const double> angles);

/// R_P(phi) = exp(-i phi P / 2); CNOT flips target when control is 1.
QuantumState apply_gate(QuantumState state, const Gate& gate);
void apply_gate_inplace(QuantumState& state, const Gate& gate);
void apply_circuit_inplace(QuantumState& state, std::span<const Gate> gates);

/// Applies the adjoint of gate, i.e. the rotation by -angle (CNOT is self-inverse).
void apply_gate_adjoint_inplace(QuantumState& state, const Gate& gate);

void apply_pauli_inplace(QuantumState& state, std::size_t qubit, Pauli p);

/// <Z_u> for every qubit u.
std::vector<double> expect_z_all(const QuantumState& state);

/// <Z_{q1} Z_{q2} ...> for the listed qubits.
double expect_z_product(const QuantumState& state, std::span<const std::size_t> qubits);

/// Basis-state probabilities |amp_i|^2.
std::vector<double> probabilities(const QuantumState& state);

struct ShotResult {
    std::vector<Bitstring> bitstrings;
    /// Empirical <Z_u> from the sampled bits.
    std::vector<double> z;
};

/// Draws i.i.d. bitstrings from |amp_i|^2.
ShotResult sample_bitstrings(const QuantumState& state, std::size_t shots, Rng& rng);

/// Empirical <Z_u> of a bitstring sample.
std::vector<double> empirical_z(std::span<const Bitstring> bits, std::size_t num_qubits);

/**
 * Reverse-mode derivative of f = sum_u weights_u <Z_u> at the end of the
 * circuit, with respect to the angle of every gate (zero for CNOTs).
 * One forward and one backward sweep; returns f in `value`.
 */
struct AdjointResult {
    double value = 0.0;
    std::vector<double> z;
    std::vector<double> gate_derivatives;
};
AdjointResult adjoint_gradient(const QuantumState& initial, std::span<const Gate> gates, std::span<const double> weights);

} // namespace clqas::qsim
