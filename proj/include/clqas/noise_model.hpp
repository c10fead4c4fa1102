#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "clqas/qsim.hpp"
#include "clqas/rng.hpp"

namespace clqas::noise {

/// How depolarizing probabilities map to expectation contraction factors.
enum class Convention {
    Standard, ///< zeta1 = 1 - 4/3 p1, zeta2 = 1 - 16/15 p2
    Linear,   ///< zeta_i = 1 - p_i
};

std::string to_string(Convention c);
Convention convention_from_string(const std::string& s);

struct NoiseModel {
    double p1 = 0.001;
    double p2 = 0.001;
    double pr = 0.01;
    double eps_jitter = 0.0;
    Convention convention = Convention::Standard;

    /// Throws DomainError on out-of-range probabilities or contraction factors.
    void validate() const;
    double zeta1() const;
    double zeta2() const;

    static NoiseModel noiseless() { return NoiseModel{0.0, 0.0, 0.0, 0.0, Convention::Standard}; }
};

struct GateCensus {
    std::size_t n1 = 0;
    std::size_t n2 = 0;
};

GateCensus census(std::span<const qsim::Gate> gates);

/// zeta1^n1 * zeta2^n2 * (1 - 2 pr)
double contraction_alpha(const NoiseModel& noise, const GateCensus& census);

/**
 * alpha * z + delta, clamped to [-1, 1] per component. Throws DomainError when
 * ||delta||_2 exceeds delta_bound.
 */
std::vector<double> apply_expectation_noise(std::span<const double> z, double alpha, std::span<const double> delta,
                                            double delta_bound);

/// Overload with delta = 0.
std::vector<double> apply_expectation_noise(std::span<const double> z, double alpha);

/// Each listed qubit independently gets X, Y or Z (uniform) with probability p.
qsim::QuantumState stochastic_depolarize(qsim::QuantumState state, std::span<const std::size_t> qubits, double p, Rng& rng);
void stochastic_depolarize_inplace(qsim::QuantumState& state, std::span<const std::size_t> qubits, double p, Rng& rng);

/// With probability p applies one of the 15 non-identity two-qubit Paulis, uniformly.
qsim::QuantumState stochastic_depolarize2(qsim::QuantumState state, std::size_t q0, std::size_t q1, double p, Rng& rng);
void stochastic_depolarize2_inplace(qsim::QuantumState& state, std::size_t q0, std::size_t q1, double p, Rng& rng);

/// Flips each of the num_qubits bits independently with probability pr.
qsim::Bitstring readout_flip(qsim::Bitstring bits, std::size_t num_qubits, double pr, Rng& rng);

/// Adds i.i.d. uniform [-eps, eps] to every angle.
std::vector<double> jitter_angles(std::span<const double> angles, double eps, Rng& rng);

/**
 * One Monte Carlo trajectory: jitter the encoding angles, prepare the
 * product state, run the circuit inserting a depolarizing Pauli draw after
 * every gate, and return the exact <Z> of the final pure state scaled by the
 * readout contraction (1 - 2 pr).
 */
std::vector<double> trajectory_expectations(std::span<const double> encoding_angles, std::span<const qsim::Gate> gates,
                                            const NoiseModel& noise, Rng& rng);

/// Mean of trajectory_expectations over `trajectories` runs with per-trajectory
/// streams derived from `seed`.
std::vector<double> mean_trajectory_expectations(std::span<const double> encoding_angles,
                                                 std::span<const qsim::Gate> gates, const NoiseModel& noise,
                                                 std::size_t trajectories, std::uint64_t seed);

} // namespace clqas::noise
