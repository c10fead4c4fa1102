#include "clqas/noise_model.hpp"

#include <algorithm>
#include <cmath>

#include "clqas/errors.hpp"

namespace clqas::noise {

namespace {

constexpr qsim::Pauli kPaulis[4] = {qsim::Pauli::I, qsim::Pauli::X, qsim::Pauli::Y, qsim::Pauli::Z};

void check_probability(double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError(std::string(what) + " must lie in [0, 1]");
}

} // namespace

std::string to_string(Convention c) { return c == Convention::Standard ? "standard" : "linear"; }

Convention convention_from_string(const std::string& s) {
    if (s == "standard") return Convention::Standard;
    if (s == "linear") return Convention::Linear;
    throw ConfigError("noise.convention must be 'standard' or 'linear', got '" + s + "'");
}

void NoiseModel::validate() const {
    check_probability(p1, "noise.p1");
    check_probability(p2, "noise.p2");
    if (!(pr >= 0.0 && pr < 0.5)) throw DomainError("noise.pr must lie in [0, 0.5)");
    if (!(eps_jitter >= 0.0)) throw DomainError("noise.jitter must be >= 0");
    const double z1 = zeta1(), z2 = zeta2();
    if (z1 < 0.0 || z1 > 1.0 || z2 < 0.0 || z2 > 1.0)
        throw DomainError("noise: contraction factors fall outside [0, 1] (p1 <= 3/4 and p2 <= 15/16 required)");
}

double NoiseModel::zeta1() const { return convention == Convention::Standard ? 1.0 - 4.0 / 3.0 * p1 : 1.0 - p1; }
double NoiseModel::zeta2() const { return convention == Convention::Standard ? 1.0 - 16.0 / 15.0 * p2 : 1.0 - p2; }

GateCensus census(std::span<const qsim::Gate> gates) {
    GateCensus c;
    for (const auto& g : gates) (g.is_rotation() ? c.n1 : c.n2) += 1;
    return c;
}

double contraction_alpha(const NoiseModel& noise, const GateCensus& census) {
    return std::pow(noise.zeta1(), static_cast<double>(census.n1)) *
           std::pow(noise.zeta2(), static_cast<double>(census.n2)) * (1.0 - 2.0 * noise.pr);
}

std::vector<double> apply_expectation_noise(std::span<const double> z, double alpha, std::span<const double> delta,
                                            double delta_bound) {
    if (delta.size() != z.size()) throw ShapeError("apply_expectation_noise: delta length mismatch");
    double dn = 0.0;
    for (double d : delta) dn += d * d;
    if (std::sqrt(dn) > delta_bound)
        throw DomainError("apply_expectation_noise: ||delta||_2 exceeds the declared bound");
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::clamp(alpha * z[i] + delta[i], -1.0, 1.0);
    return out;
}

std::vector<double> apply_expectation_noise(std::span<const double> z, double alpha) {
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::clamp(alpha * z[i], -1.0, 1.0);
    return out;
}

void stochastic_depolarize_inplace(qsim::QuantumState& state, std::span<const std::size_t> qubits, double p, Rng& rng) {
    check_probability(p, "depolarizing probability");
    if (p == 0.0) return;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> which(1, 3);
    for (std::size_t q : qubits)
        if (u(rng) < p) qsim::apply_pauli_inplace(state, q, kPaulis[which(rng)]);
}

qsim::QuantumState stochastic_depolarize(qsim::QuantumState state, std::span<const std::size_t> qubits, double p, Rng& rng) {
    stochastic_depolarize_inplace(state, qubits, p, rng);
    return state;
}

void stochastic_depolarize2_inplace(qsim::QuantumState& state, std::size_t q0, std::size_t q1, double p, Rng& rng) {
    check_probability(p, "two-qubit depolarizing probability");
    if (p == 0.0) return;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (!(u(rng) < p)) return;
    std::uniform_int_distribution<int> which(1, 15);
    const int k = which(rng);
    qsim::apply_pauli_inplace(state, q0, kPaulis[k & 3]);
    qsim::apply_pauli_inplace(state, q1, kPaulis[k >> 2]);
}

qsim::QuantumState stochastic_depolarize2(qsim::QuantumState state, std::size_t q0, std::size_t q1, double p, Rng& rng) {
    stochastic_depolarize2_inplace(state, q0, q1, p, rng);
    return state;
}

qsim::Bitstring readout_flip(qsim::Bitstring bits, std::size_t num_qubits, double pr, Rng& rng) {
    if (!(pr >= 0.0 && pr < 0.5)) throw DomainError("readout_flip: pr must lie in [0, 0.5)");
    if (pr == 0.0) return bits;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t q = 0; q < num_qubits; ++q)
        if (u(rng) < pr) bits ^= qsim::Bitstring{1} << q;
    return bits;
}

std::vector<double> jitter_angles(std::span<const double> angles, double eps, Rng& rng) {
    if (!(eps >= 0.0)) throw DomainError("jitter_angles: eps must be >= 0");
    std::vector<double> out(angles.begin(), angles.end());
    if (eps == 0.0) return out;
    std::uniform_real_distribution<double> u(-eps, eps);
    for (double& a : out) a += u(rng);
    return out;
}

std::vector<double> trajectory_expectations(std::span<const double> encoding_angles, std::span<const qsim::Gate> gates,
                                            const NoiseModel& noise, Rng& rng) {
    const std::vector<double> angles = jitter_angles(encoding_angles, noise.eps_jitter, rng);
    qsim::QuantumState state = qsim::prepare_angle_state(angles);
    for (std::size_t q = 0; q < angles.size(); ++q) {
        const std::size_t one[1] = {q};
        stochastic_depolarize_inplace(state, one, noise.p1, rng);
    }
    for (const qsim::Gate& g : gates) {
        qsim::apply_gate_inplace(state, g);
        if (g.is_rotation()) {
            const std::size_t one[1] = {g.qubit};
            stochastic_depolarize_inplace(state, one, noise.p1, rng);
        } else {
            stochastic_depolarize2_inplace(state, g.qubit, g.target, noise.p2, rng);
        }
    }
    std::vector<double> z = qsim::expect_z_all(state);
    for (double& v : z) v *= 1.0 - 2.0 * noise.pr;
    return z;
}

std::vector<double> mean_trajectory_expectations(std::span<const double> encoding_angles,
                                                 std::span<const qsim::Gate> gates, const NoiseModel& noise,
                                                 std::size_t trajectories, std::uint64_t seed) {
    if (trajectories == 0) throw DomainError("mean_trajectory_expectations: need at least one trajectory");
    std::vector<double> mean(encoding_angles.size(), 0.0);
    for (std::size_t t = 0; t < trajectories; ++t) {
        Rng rng = make_rng(seed, {stream::kTrajectory, t});
        const auto z = trajectory_expectations(encoding_angles, gates, noise, rng);
        for (std::size_t i = 0; i < z.size(); ++i) mean[i] += z[i];
    }
    for (double& v : mean) v /= static_cast<double>(trajectories);
    return mean;
}

} // namespace clqas::noise
