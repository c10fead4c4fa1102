#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "clqas/architecture.hpp"
#include "clqas/noise_model.hpp"
#include "clqas/qsim.hpp"
#include "clqas/rng.hpp"
#include "clqas/task_data.hpp"
#include "clqas/tt_core.hpp"

namespace clqas::vqc {

/// Softmax over the first num_classes <Z> values; num_classes must be below the qubit count.
struct ClassifierHead {
    std::size_t num_classes = 2;

    void validate(std::size_t num_qubits) const;
};

struct CircuitParams {
    /// One angle per rotation the architecture emits, in emission order.
    std::vector<double> theta;

    /// Uniform in [-0.1, 0.1].
    static CircuitParams random(const qas::Architecture& arch, Rng& rng);
    static CircuitParams zeros(const qas::Architecture& arch);
};

struct Model {
    qas::Architecture arch;
    CircuitParams params;
    ClassifierHead head;
    tt::TTLinear encoder;

    /// theta followed by the encoder cores (when trainable).
    std::vector<double> flat_parameters() const;
    void set_flat_parameters(std::span<const double> flat);
    std::size_t num_trainable() const;
};

/// Variational part only: per layer the rotations, then the entangler CNOTs.
std::vector<qsim::Gate> build_circuit(const qas::Architecture& arch, const CircuitParams& params);

/// One RY(angle_u) per qubit, the angle-encoding prefix applied to |0...0>.
std::vector<qsim::Gate> encoding_gates(std::span<const double> angles);

/// Gates counted for the contraction factor: the U encoding rotations plus the circuit.
noise::GateCensus circuit_census(const qas::Architecture& arch);

struct EvalOptions {
    /// Analytic expectation contraction (Delta = 0) when set.
    std::optional<noise::NoiseModel> noise;
    /// 0 = exact expectations; otherwise estimate <Z> from this many samples using `rng`.
    std::size_t shots = 0;
    Rng* rng = nullptr;
};

/// Encoded, simulated and (optionally) noise-contracted <Z> for every qubit.
std::vector<double> expectations(std::span<const double> x, const Model& model, const EvalOptions& opts = {});

/// Class probabilities softmax(z[0:K]).
std::vector<double> forward(std::span<const double> x, const Model& model, const EvalOptions& opts = {});

int predict(std::span<const double> x, const Model& model, const EvalOptions& opts = {});

/// Mean of -log probs[i][labels[i]].
double mean_cross_entropy(const std::vector<std::vector<double>>& probs, std::span<const int> labels);

/// Mean cross-entropy over the batch.
double loss(std::span<const Example> batch, const Model& model, const EvalOptions& opts = {});

enum class GradientMethod {
    ParameterShift, ///< two shifted circuit evaluations per rotation
    Adjoint,        ///< one forward and one reverse sweep per example
};

struct Gradient {
    std::vector<double> theta;
    /// Empty when the encoder is frozen.
    std::vector<tt::Core4> encoder;
    double loss = 0.0;

    std::vector<double> flat() const;
    double squared_norm() const;
};

/// Exact gradient of loss() with respect to theta and the encoder cores.
/// Throws UnsupportedModeError in shot mode.
Gradient gradient(std::span<const Example> batch, const Model& model, const EvalOptions& opts = {},
                  GradientMethod method = GradientMethod::ParameterShift);

struct AdamConfig {
    double lr = 3e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<double> m, v;
    std::size_t t = 0;
};

/// Bias-corrected Adam update in place; lazily sizes a fresh state.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& cfg = {});

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch = 32;
    AdamConfig adam;
    GradientMethod method = GradientMethod::Adjoint;
    std::optional<noise::NoiseModel> noise;
    /// Epoch e shuffles with make_rng(shuffle_seed, {kShuffle, first_epoch + e}).
    std::uint64_t shuffle_seed = 0;
    std::size_t first_epoch = 0;
};

struct TrainLog {
    std::vector<double> epoch_loss;      // mean minibatch loss per epoch
    std::vector<double> grad_norm_sq;    // per step
};

TrainLog train(Model& model, std::span<const Example> data, const TrainConfig& cfg, AdamState& adam);

/// Fraction of correct argmax predictions.
double accuracy(std::span<const Example> data, const Model& model, const EvalOptions& opts = {});

} // namespace clqas::vqc
