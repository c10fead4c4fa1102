#include "clqas/qas_policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "clqas/errors.hpp"

namespace clqas::qas {

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.begin(), logits.end());
    if (p.empty()) return p;
    const double m = *std::max_element(p.begin(), p.end());
    double s = 0.0;
    for (double& v : p) {
        v = std::exp(v - m);
        s += v;
    }
    for (double& v : p) v /= s;
    return p;
}

namespace {

double log_softmax_at(std::span<const double> logits, std::size_t k) {
    const double m = *std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    for (double v : logits) s += std::exp(v - m);
    return logits[k] - m - std::log(s);
}

} // namespace

LogitTablePolicy::LogitTablePolicy(SearchSpace space) : space_(std::move(space)), decisions_(space_.decision_space()) {
    offsets_.resize(decisions_.num_positions());
    std::size_t off = 0;
    for (std::size_t p = 0; p < offsets_.size(); ++p) {
        offsets_[p] = off;
        off += decisions_.arities[p];
    }
}

void LogitTablePolicy::check(std::span<const double> phi) const {
    if (phi.size() != num_parameters())
        throw ShapeError("policy: phi has " + std::to_string(phi.size()) + " entries, expected " +
                         std::to_string(num_parameters()));
}

std::vector<double> LogitTablePolicy::probabilities(std::span<const double> phi, std::size_t position) const {
    check(phi);
    return softmax(phi.subspan(offsets_[position], decisions_.arities[position]));
}

ArchSample LogitTablePolicy::sample(std::span<const double> phi, Rng& rng) const {
    check(phi);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ArchSample s;
    s.decisions.assign(decisions_.num_positions(), -1);
    auto draw = [&](std::size_t pos) {
        const auto p = probabilities(phi, pos);
        const double r = u(rng);
        double acc = 0.0;
        std::size_t k = 0;
        for (; k + 1 < p.size(); ++k) {
            acc += p[k];
            if (r < acc) break;
        }
        s.decisions[pos] = static_cast<int>(k);
        s.logprob += std::log(p[k]);
    };
    draw(space_.depth_position());
    const std::size_t depth = space_.min_depth + static_cast<std::size_t>(s.decisions[space_.depth_position()]);
    for (std::size_t l = 0; l < depth; ++l) {
        for (std::size_t q = 0; q < space_.num_qubits; ++q) draw(space_.rotation_position(l, q));
        draw(space_.entangler_position(l));
    }
    s.arch = space_.decode(s.decisions);
    return s;
}

double LogitTablePolicy::log_prob(std::span<const double> phi, const std::vector<int>& decisions) const {
    check(phi);
    if (decisions.size() != decisions_.num_positions()) throw ShapeError("log_prob: decision vector length mismatch");
    double lp = 0.0;
    for (std::size_t pos = 0; pos < decisions.size(); ++pos) {
        if (decisions[pos] < 0) continue;
        lp += log_softmax_at(phi.subspan(offsets_[pos], decisions_.arities[pos]), static_cast<std::size_t>(decisions[pos]));
    }
    return lp;
}

std::vector<double> LogitTablePolicy::score(std::span<const double> phi, const std::vector<int>& decisions) const {
    check(phi);
    if (decisions.size() != decisions_.num_positions()) throw ShapeError("score: decision vector length mismatch");
    std::vector<double> g(num_parameters(), 0.0);
    for (std::size_t pos = 0; pos < decisions.size(); ++pos) {
        if (decisions[pos] < 0) continue;
        const auto p = probabilities(phi, pos);
        for (std::size_t k = 0; k < p.size(); ++k)
            g[offsets_[pos] + k] = (static_cast<int>(k) == decisions[pos] ? 1.0 : 0.0) - p[k];
    }
    return g;
}

ArchitecturePolicy::KlValue LogitTablePolicy::kl(std::span<const double> phi, std::span<const double> prior) const {
    check(phi);
    if (prior.size() != phi.size()) throw ShapeError("kl: prior and phi shapes differ");
    KlValue out;
    out.grad.assign(phi.size(), 0.0);
    for (std::size_t pos = 0; pos < decisions_.num_positions(); ++pos) {
        const std::size_t off = offsets_[pos], n = decisions_.arities[pos];
        const auto p = softmax(phi.subspan(off, n));
        double kl_pos = 0.0;
        std::vector<double> diff(n);
        for (std::size_t k = 0; k < n; ++k) {
            diff[k] = log_softmax_at(phi.subspan(off, n), k) - log_softmax_at(prior.subspan(off, n), k);
            kl_pos += p[k] * diff[k];
        }
        for (std::size_t k = 0; k < n; ++k) out.grad[off + k] = p[k] * (diff[k] - kl_pos);
        out.value += kl_pos;
    }
    out.value = std::max(out.value, 0.0);
    return out;
}

double LogitTablePolicy::probability_of(std::span<const double> phi, const Architecture& arch) const {
    return std::exp(log_prob(phi, space_.encode(arch)));
}

double reward(double val_accuracy, std::size_t n_cnot, double kappa) {
    return std::clamp(val_accuracy - kappa * static_cast<double>(n_cnot), 0.0, 1.0);
}

std::vector<double> reinforce_grad(const ArchitecturePolicy& policy, std::span<const ArchSample> samples,
                                   std::span<const double> phi, double baseline) {
    if (samples.empty()) throw DomainError("reinforce_grad: no samples");
    std::vector<double> g(policy.num_parameters(), 0.0);
    for (const ArchSample& s : samples) {
        if (!s.reward) throw DomainError("reinforce_grad: sample without reward");
        const double adv = *s.reward - baseline;
        if (adv == 0.0) continue;
        const auto sc = policy.score(phi, s.decisions);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= adv * sc[i];
    }
    for (double& v : g) v /= static_cast<double>(samples.size());
    return g;
}

double surrogate_objective(const ArchitecturePolicy& policy, std::span<const ArchSample> samples,
                           std::span<const double> phi) {
    if (samples.empty()) throw DomainError("surrogate_objective: no samples");
    double j = 0.0;
    for (const ArchSample& s : samples) {
        if (!s.reward) throw DomainError("surrogate_objective: sample without reward");
        j -= *s.reward * policy.log_prob(phi, s.decisions);
    }
    return j / static_cast<double>(samples.size());
}

PenaltyValue ewc_penalty(std::span<const double> phi, std::span<const double> phi_old, std::span<const double> fisher,
                         double lambda) {
    if (phi.size() != phi_old.size() || phi.size() != fisher.size()) throw ShapeError("ewc_penalty: shape mismatch");
    PenaltyValue out;
    out.grad.resize(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i) {
        if (fisher[i] < 0.0) throw DomainError("ewc_penalty: negative Fisher entry");
        const double d = phi[i] - phi_old[i];
        out.value += fisher[i] * d * d;
        out.grad[i] = lambda * fisher[i] * d;
    }
    out.value *= 0.5 * lambda;
    return out;
}

PenaltyValue kl_penalty(const ArchitecturePolicy& policy, std::span<const double> phi, std::span<const double> prior) {
    auto k = policy.kl(phi, prior);
    return PenaltyValue{k.value, std::move(k.grad)};
}

std::vector<double> estimate_fisher(const ArchitecturePolicy& policy, std::span<const double> phi,
                                    std::size_t num_samples, Rng& rng) {
    if (num_samples == 0) throw DomainError("estimate_fisher: num_samples must be >= 1");
    std::vector<double> f(policy.num_parameters(), 0.0);
    for (std::size_t n = 0; n < num_samples; ++n) {
        const ArchSample s = policy.sample(phi, rng);
        const auto sc = policy.score(phi, s.decisions);
        for (std::size_t i = 0; i < f.size(); ++i) f[i] += sc[i] * sc[i];
    }
    for (double& v : f) v /= static_cast<double>(num_samples);
    return f;
}

double policy_loss(double j_hat, double ewc, double kl, double mu, double beta) { return j_hat + mu * ewc + beta * kl; }

PolicySnapshot PolicySnapshot::uniform(std::size_t n) {
    return PolicySnapshot{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
                          std::vector<double>(n, 0.0)};
}

PolicyStepResult policy_step(const ArchitecturePolicy& policy, PolicySnapshot& snap,
                             std::span<const ArchSample> samples, const PolicyStepConfig& cfg) {
    PolicyStepResult r;
    const auto g_rl = reinforce_grad(policy, samples, snap.phi, cfg.baseline);
    const auto ewc = ewc_penalty(snap.phi, snap.phi_old, snap.fisher, cfg.ewc_lambda);
    const auto kl = kl_penalty(policy, snap.phi, snap.prior);
    r.j_hat = surrogate_objective(policy, samples, snap.phi);
    r.ewc = ewc.value;
    r.kl = kl.value;
    r.loss = policy_loss(r.j_hat, r.ewc, r.kl, cfg.mu, cfg.beta);

    double gn = 0.0;
    for (std::size_t i = 0; i < snap.phi.size(); ++i) {
        const double g = g_rl[i] + cfg.beta * kl.grad[i];
        const double total = g + cfg.mu * ewc.grad[i];
        gn += total * total;
        const double h = cfg.mu * cfg.ewc_lambda * snap.fisher[i];
        snap.phi[i] = (snap.phi[i] - cfg.lr * g + cfg.lr * h * snap.phi_old[i]) / (1.0 + cfg.lr * h);
    }
    r.grad_norm = std::sqrt(gn);
    return r;
}

} // namespace clqas::qas
