#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "clqas/architecture.hpp"
#include "clqas/rng.hpp"

namespace clqas::qas {

struct ArchSample {
    Architecture arch;
    /// One entry per decision position; -1 marks a position that was not drawn.
    std::vector<int> decisions;
    double logprob = 0.0;
    std::optional<double> reward;
};

/**
 * Stochastic architecture generator parameterised by a flat vector phi.
 * Everything downstream (REINFORCE, Fisher, KL) only goes through this
 * interface, so a sequence-model policy can replace the logit table.
 */
class ArchitecturePolicy {
public:
    virtual ~ArchitecturePolicy() = default;

    virtual std::size_t num_parameters() const = 0;
    virtual ArchSample sample(std::span<const double> phi, Rng& rng) const = 0;
    virtual double log_prob(std::span<const double> phi, const std::vector<int>& decisions) const = 0;
    /// d log pi(decisions) / d phi
    virtual std::vector<double> score(std::span<const double> phi, const std::vector<int>& decisions) const = 0;

    struct KlValue {
        double value = 0.0;
        std::vector<double> grad;
    };
    /// KL(pi_phi || pi_prior) and its gradient with respect to phi.
    virtual KlValue kl(std::span<const double> phi, std::span<const double> prior) const = 0;
};

/**
 * Autoregressive categorical policy with an independent logit block per
 * decision position. Depth is drawn first; positions of layers at or beyond
 * the drawn depth are skipped and contribute nothing to logprob or score.
 */
class LogitTablePolicy final : public ArchitecturePolicy {
public:
    explicit LogitTablePolicy(SearchSpace space);

    const SearchSpace& space() const noexcept { return space_; }
    const DecisionSpace& decisions() const noexcept { return decisions_; }

    std::size_t num_parameters() const override { return decisions_.num_logits(); }
    ArchSample sample(std::span<const double> phi, Rng& rng) const override;
    double log_prob(std::span<const double> phi, const std::vector<int>& decisions) const override;
    std::vector<double> score(std::span<const double> phi, const std::vector<int>& decisions) const override;
    /// Summed over every position, drawn or not.
    KlValue kl(std::span<const double> phi, std::span<const double> prior) const override;

    /// softmax of the logits of one position.
    std::vector<double> probabilities(std::span<const double> phi, std::size_t position) const;

    /// Probability of a whole architecture (product over its drawn positions).
    double probability_of(std::span<const double> phi, const Architecture& arch) const;

private:
    void check(std::span<const double> phi) const;

    SearchSpace space_;
    DecisionSpace decisions_;
    std::vector<std::size_t> offsets_;
};

std::vector<double> softmax(std::span<const double> logits);

/// clamp(val_accuracy - kappa * n_cnot, 0, 1)
double reward(double val_accuracy, std::size_t n_cnot, double kappa);

/// -mean_s (c_s - baseline) * grad log pi(A_s). Throws DomainError on an empty
/// sample list or a sample without a reward.
std::vector<double> reinforce_grad(const ArchitecturePolicy& policy, std::span<const ArchSample> samples,
                                   std::span<const double> phi, double baseline = 0.0);

/// J_hat = -mean_s c_s * log pi(A_s) at fixed samples.
double surrogate_objective(const ArchitecturePolicy& policy, std::span<const ArchSample> samples,
                           std::span<const double> phi);

struct PenaltyValue {
    double value = 0.0;
    std::vector<double> grad;
};

/// (lambda/2) sum_i F_i (phi_i - phi_old_i)^2 and lambda F (phi - phi_old).
PenaltyValue ewc_penalty(std::span<const double> phi, std::span<const double> phi_old, std::span<const double> fisher,
                         double lambda);

PenaltyValue kl_penalty(const ArchitecturePolicy& policy, std::span<const double> phi, std::span<const double> prior);

/// Mean squared score over num_samples architectures drawn from pi_phi.
std::vector<double> estimate_fisher(const ArchitecturePolicy& policy, std::span<const double> phi,
                                    std::size_t num_samples, Rng& rng);

/// J_hat + mu * ewc + beta * kl
double policy_loss(double j_hat, double ewc, double kl, double mu, double beta);

struct PolicySnapshot {
    std::vector<double> phi;
    std::vector<double> phi_old;
    std::vector<double> fisher;
    std::vector<double> prior;

    /// Fresh policy: phi = phi_old = prior = 0, fisher = 0.
    static PolicySnapshot uniform(std::size_t num_parameters);
};

struct PolicyStepConfig {
    double lr = 0.05;
    double mu = 0.1;
    double beta = 0.01;
    double ewc_lambda = 1.0;
    double baseline = 0.0;
};

struct PolicyStepResult {
    double j_hat = 0.0;
    double ewc = 0.0;
    double kl = 0.0;
    double loss = 0.0;
    double grad_norm = 0.0;
};

/**
 * One descent step on J_hat + mu * EWC + beta * KL, evaluated at the current
 * phi. The REINFORCE and KL terms take an explicit gradient step; the EWC
 * quadratic is applied in closed form (proximal step),
 *
 *   phi_i <- (phi_i - lr g_i + lr h_i phi_old_i) / (1 + lr h_i),  h_i = mu lambda F_i,
 *
 * which matches plain gradient descent to first order in lr and stays stable
 * for large mu lambda F.
 */
PolicyStepResult policy_step(const ArchitecturePolicy& policy, PolicySnapshot& snapshot,
                             std::span<const ArchSample> samples, const PolicyStepConfig& cfg);

} // namespace clqas::qas
