#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "clqas/architecture.hpp"
#include "clqas/metrics.hpp"
#include "clqas/noise_model.hpp"
#include "clqas/qas_policy.hpp"
#include "clqas/task_data.hpp"
#include "clqas/tt_core.hpp"
#include "clqas/vqc_classifier.hpp"

namespace clqas::harness {

enum class Method { NaiveVqc, QasNoCl, ClQas };

std::string to_string(Method m);
/// Throws ConfigError naming the valid methods.
Method method_from_string(const std::string& s);
const std::vector<std::string>& method_names();

/// How noisy test accuracy is measured when a noise model is configured.
enum class NoiseEval {
    Analytic,   ///< z -> alpha z
    Trajectory, ///< mean over stochastic Pauli trajectories
};

struct EncoderSpec {
    std::vector<std::size_t> input_modes{4, 16, 4};
    std::vector<std::size_t> output_modes{2, 2, 2};
    std::vector<std::size_t> ranks{1, 2, 3, 1};
    bool trainable = true;
};

struct HarnessConfig {
    qas::SearchSpace space;
    EncoderSpec encoder;
    std::size_t num_classes = 2;

    std::size_t epochs = 20;
    /// Extra epochs for the selected candidate, continuing its optimizer state.
    std::size_t finetune_epochs = 20;
    std::size_t batch = 32;
    vqc::AdamConfig adam;
    vqc::GradientMethod grad = vqc::GradientMethod::Adjoint;
    /// Redraw the shared parameter bank at the start of every task.
    bool reinit_theta = false;

    std::size_t candidates = 8;
    std::size_t rounds = 4;
    double kappa = 0.005;
    /// lr, mu, beta and the EWC lambda of the outer loop.
    qas::PolicyStepConfig policy;
    /// Weight of the policy loss in the total objective.
    double loss_lambda = 1.0;
    std::size_t fisher_samples = 64;
    /// Subtract the mean of every reward seen so far on the task in the REINFORCE estimate.
    bool running_baseline = true;

    std::optional<noise::NoiseModel> noise;
    NoiseEval noise_eval = NoiseEval::Analytic;
    std::size_t eval_trajectories = 200;

    bool audit = false;
    std::size_t audit_samples = 10;
    std::size_t audit_trajectories = 1000;

    std::size_t tt_probe_samples = 32;

    /// Polled between candidates; when set the run stops and is marked partial.
    const std::atomic<bool>* stop = nullptr;

    /// Throws ConfigError on inconsistent settings.
    void validate() const;
};

/// Parameters that persist across tasks.
struct LearnerState {
    /// Shared rotation-angle bank, qas::bank_size(U, max_depth) entries.
    std::vector<double> bank;
    tt::TTLinear encoder;
    qas::PolicySnapshot policy;
};

LearnerState initial_state(const HarnessConfig& cfg, std::uint64_t seed);
void redraw_bank(LearnerState& state, const HarnessConfig& cfg, std::uint64_t seed, std::size_t task);

/// Model for `arch` with angles gathered from the bank and the shared encoder.
vqc::Model gather_model(const qas::Architecture& arch, const LearnerState& state, const HarnessConfig& cfg);
/// Writes the model's angles back to their bank slots and adopts its encoder.
void scatter_model(const vqc::Model& model, LearnerState& state);

struct CandidateLog {
    std::size_t round = 0;
    std::string arch;
    double val_accuracy = 0.0;
    std::size_t n_cnot = 0;
    double reward = 0.0;
    double logprob = 0.0;
};

/// One audited (model, noise) pair of the objective-level robustness check.
struct AuditRow {
    noise::NoiseModel noise;
    double clean_loss = 0.0;
    double noisy_loss = 0.0;
    double clean_reward = 0.0;
    double noisy_reward = 0.0;
    double alpha = 1.0;
    double delta_hat = 0.0;
    double eps_c_hat = 0.0;
    double c_pi_hat = 0.0;
    double mean_z_norm = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
    /// L_l (1 - alpha) E||z||_2, the bound on the loss change alone.
    double lemma5_bound = 0.0;
    bool holds() const { return lhs <= rhs; }
};

struct TaskDiagnostics {
    std::vector<double> grad_norm_sq;   // per epoch mean of ||grad||^2, selected model
    double grad_norm_sq_max = 0.0;
    /// ||grad(theta + h v) - grad(theta)|| / h along a random unit direction.
    double curvature = 0.0;
    double eps_tt = 0.0;
    double rho = 0.0;
    double fidelity_bound = 0.0;
    double alpha = 1.0;
    std::optional<AuditRow> audit;
};

struct TaskRecord {
    std::size_t task_id = 0;
    std::string group;
    qas::Architecture arch;
    /// Test metrics right after training on this task.
    metrics::ClassMetrics test;
    double val_accuracy = 0.0;
    /// Reward of the selected architecture; empty for naive_vqc.
    std::optional<double> reward;
    std::vector<CandidateLog> candidates;
    std::vector<qas::PolicyStepResult> policy_steps;
    /// Train loss of the selected model.
    double vqc_loss = 0.0;
    /// Loss of the last policy step (0 for naive_vqc).
    double policy_loss = 0.0;
    /// sum_{k <= m} vqc_loss_k + loss_lambda * policy_loss_m.
    double total_loss = 0.0;
    TaskDiagnostics diag;
};

struct RunRecord {
    Method method = Method::ClQas;
    std::uint64_t seed = 0;
    std::vector<TaskRecord> tasks;
    metrics::AccuracyMatrix r;
    std::optional<metrics::TransferMetrics> transfer;
    bool partial = false;
};

/// Class predictions on a split under the configured noise evaluation.
std::vector<int> predict_split(std::span<const Example> data, const vqc::Model& model, const HarnessConfig& cfg,
                               std::uint64_t seed);

/**
 * Trains one task. naive_vqc trains the fixed baseline ansatz for
 * epochs + finetune_epochs; the QAS methods run `rounds` outer rounds of
 * `candidates` sampled architectures, take a policy step after each, then
 * fine-tune the best-reward candidate. Updates `state` in place.
 * Throws DomainError on empty splits.
 */
TaskRecord run_task(const TaskDataset& task, LearnerState& state, Method method, const HarnessConfig& cfg,
                    std::uint64_t seed, double vqc_loss_so_far = 0.0);

/// phi_old <- phi, fisher <- estimate_fisher, prior <- phi.
qas::PolicySnapshot consolidate(const qas::ArchitecturePolicy& policy, const qas::PolicySnapshot& snapshot,
                                std::size_t fisher_samples, Rng& rng);

/// Runs the tasks in order and fills the accuracy matrix (all rows and columns).
RunRecord run_sequence(const std::vector<TaskDataset>& tasks, Method method, const HarnessConfig& cfg,
                       std::uint64_t seed);

struct AuditOptions {
    double loss_lambda = 1.0;
    double kappa = 0.005;
    /// max |log pi| over the architectures the policy sampled.
    double c_pi_hat = 0.0;
    /// log pi of the audited architecture.
    double logprob = 0.0;
    std::size_t samples = 10;
    std::size_t trajectories = 1000;
    std::uint64_t seed = 0;
};

/**
 * |L^N - L| of the task objective L_vqc + lambda (-c log pi) with the noisy
 * loss and reward taken on the analytic contraction path, against
 *   sqrt(2) sqrt(U) [(1 - alpha) + delta_hat] + lambda C_pi [(1 - alpha) + eps_c_hat].
 * delta_hat and eps_c_hat are measured from trajectory simulations spread
 * over `samples` test and validation points.
 */
AuditRow robustness_audit(const vqc::Model& model, const TaskDataset& task, const noise::NoiseModel& noise,
                          const AuditOptions& opts);

/// Lipschitz constant of softmax cross-entropy in the expectation vector.
inline constexpr double kLossLipschitz = 1.4142135623730951;

} // namespace clqas::harness
