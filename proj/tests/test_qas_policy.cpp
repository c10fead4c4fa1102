#include <catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "clqas/errors.hpp"
#include "clqas/qas_policy.hpp"
#include "support/bandit.hpp"

using namespace clqas;
using namespace clqas::qas;
using Catch::Matchers::WithinAbs;

namespace {

// One active binary position: U = 1, single depth, rotations {RX, RY}, one entangler.
SearchSpace binary_space() {
    SearchSpace s;
    s.num_qubits = 1;
    s.max_depth = 1;
    s.rotations = {Rotation::RX, Rotation::RY};
    s.entanglers = {Entangler::None};
    return s;
}

std::vector<double> random_phi(std::size_t n, Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    std::vector<double> v(n);
    for (double& x : v) x = g(rng);
    return v;
}

} // namespace

TEST_CASE("architecture tokens round-trip") {
    const auto a = Architecture::from_tokens("L2 | q0:RY q1:RXYZ | ent:chain ; q0:I q1:RZ | ent:none");
    CHECK(a.num_qubits == 2);
    CHECK(a.depth() == 2);
    CHECK(a.layers[0].rotations[1] == Rotation::RXYZ);
    CHECK(a.layers[1].entangler == Entangler::None);
    CHECK(a.to_tokens() == "L2 | q0:RY q1:RXYZ | ent:chain ; q0:I q1:RZ | ent:none");
    CHECK(Architecture::from_tokens(a.to_tokens()) == a);
    CHECK_THROWS_AS(Architecture::from_tokens("L3 | q0:RY | ent:chain"), ParseError);
    CHECK_THROWS_AS(Architecture::from_tokens("L1 | q0:RW | ent:chain"), ConfigError);
    CHECK_THROWS_AS(Architecture::from_tokens("L1 | q1:RY | ent:chain"), ParseError);
}

TEST_CASE("architecture gate counts") {
    const auto b = Architecture::baseline(5, 3);
    CHECK(b.rotation_count() == 45);
    CHECK(b.cnot_count() == 12);
    auto ring = b;
    for (auto& l : ring.layers) l.entangler = Entangler::Ring;
    CHECK(ring.cnot_count() == 15);
    CHECK(Architecture::baseline(2, 1).cnot_count() == 1);
    auto ring2 = Architecture::baseline(2, 1);
    ring2.layers[0].entangler = Entangler::Ring;
    CHECK(ring2.cnot_count() == 1);
    CHECK(Architecture::baseline(1, 2).cnot_count() == 0);

    const auto a = Architecture::from_tokens("L2 | q0:RY q1:RXYZ | ent:chain ; q0:I q1:RZ | ent:none");
    CHECK(a.parameter_slots() == std::vector<std::size_t>{1, 3, 4, 5, bank_slot(2, 1, 1, 2)});
}

TEST_CASE("search space encode/decode round-trip") {
    SearchSpace s;
    s.num_qubits = 3;
    s.max_depth = 4;
    const LogitTablePolicy policy(s);
    Rng rng(1);
    const auto phi = random_phi(policy.num_parameters(), rng);
    for (int t = 0; t < 200; ++t) {
        const auto smp = policy.sample(phi, rng);
        CHECK(s.encode(smp.arch) == smp.decisions);
        CHECK(s.decode(smp.decisions) == smp.arch);
        CHECK(smp.arch.depth() >= 1);
        CHECK(smp.arch.depth() <= 4);
        CHECK_THAT(smp.logprob, WithinAbs(policy.log_prob(phi, smp.decisions), 1e-12));
        CHECK(smp.logprob <= 0.0);
    }
    const auto degenerate = SearchSpace::degenerate_baseline(3, 2);
    CHECK(degenerate.decode(std::vector<int>(degenerate.decision_space().num_positions(), 0)) ==
          Architecture::baseline(3, 2));
}

TEST_CASE("sampling with zero logits is uniform") {
    SearchSpace s;
    s.num_qubits = 2;
    s.max_depth = 4;
    const LogitTablePolicy policy(s);
    const std::vector<double> phi(policy.num_parameters(), 0.0);
    for (std::size_t pos = 0; pos < policy.decisions().num_positions(); ++pos) {
        const auto p = policy.probabilities(phi, pos);
        double sum = 0.0;
        for (double v : p) {
            CHECK_THAT(v, WithinAbs(1.0 / static_cast<double>(p.size()), 1e-15));
            sum += v;
        }
        CHECK_THAT(sum, WithinAbs(1.0, 1e-10));
    }
    Rng rng(2);
    std::map<std::size_t, int> depth_counts;
    const int n = 40000;
    for (int t = 0; t < n; ++t) ++depth_counts[policy.sample(phi, rng).arch.depth()];
    for (std::size_t d = 1; d <= 4; ++d) {
        const double f = depth_counts[d] / static_cast<double>(n);
        CHECK(std::abs(f - 0.25) < 3.0 * std::sqrt(0.25 * 0.75 / n) + 1e-3);
    }
}

TEST_CASE("a saturated logit is almost always chosen") {
    SearchSpace s;
    s.num_qubits = 2;
    s.max_depth = 3;
    const LogitTablePolicy policy(s);
    std::vector<double> phi(policy.num_parameters(), 0.0);
    phi[policy.decisions().offset(0) + 2] = 20.0; // depth 3
    Rng rng(3);
    int hits = 0;
    for (int t = 0; t < 10000; ++t) hits += policy.sample(phi, rng).arch.depth() == 3;
    CHECK(hits >= 9990);
}

TEST_CASE("empirical sampling frequencies match softmax per position") {
    SearchSpace s;
    s.num_qubits = 2;
    s.max_depth = 2;
    const LogitTablePolicy policy(s);
    Rng rng(4);
    const auto phi = random_phi(policy.num_parameters(), rng);
    const int n = 100000;
    const auto& ds = policy.decisions();
    std::vector<std::vector<int>> counts(ds.num_positions());
    std::vector<int> drawn(ds.num_positions(), 0);
    for (std::size_t p = 0; p < counts.size(); ++p) counts[p].assign(ds.arities[p], 0);
    for (int t = 0; t < n; ++t) {
        const auto smp = policy.sample(phi, rng);
        for (std::size_t p = 0; p < counts.size(); ++p)
            if (smp.decisions[p] >= 0) {
                ++counts[p][static_cast<std::size_t>(smp.decisions[p])];
                ++drawn[p];
            }
    }
    for (std::size_t p = 0; p < counts.size(); ++p) {
        const auto prob = policy.probabilities(phi, p);
        for (std::size_t k = 0; k < prob.size(); ++k) {
            const double f = counts[p][k] / static_cast<double>(drawn[p]);
            const double se = std::sqrt(prob[k] * (1 - prob[k]) / drawn[p]);
            CHECK(std::abs(f - prob[k]) <= 3.0 * se + 1e-12);
        }
    }
}

TEST_CASE("reward clamp") {
    CHECK(reward(1.0, 0, 0.005) == 1.0);
    CHECK_THAT(reward(0.9, 20, 0.005), WithinAbs(0.8, 1e-15));
    CHECK(reward(0.1, 100, 0.005) == 0.0);
}

TEST_CASE("REINFORCE gradient") {
    const LogitTablePolicy policy(binary_space());
    const std::vector<double> phi(policy.num_parameters(), 0.0);
    const std::size_t off = policy.decisions().offset(1);

    ArchSample s;
    s.decisions = {0, 0, 0};
    s.arch = policy.space().decode(s.decisions);
    s.reward = 1.0;
    const std::vector<ArchSample> one{s};
    const auto g = reinforce_grad(policy, one, phi);
    CHECK_THAT(g[off], WithinAbs(-0.5, 1e-15));
    CHECK_THAT(g[off + 1], WithinAbs(0.5, 1e-15));

    auto zero = one;
    zero[0].reward = 0.0;
    for (double v : reinforce_grad(policy, zero, phi)) CHECK(v == 0.0);

    CHECK_THROWS_AS(reinforce_grad(policy, std::vector<ArchSample>{}, phi), DomainError);
    auto unset = one;
    unset[0].reward.reset();
    CHECK_THROWS_AS(reinforce_grad(policy, unset, phi), DomainError);
}

TEST_CASE("REINFORCE gradient is the derivative of the fixed-sample surrogate") {
    SearchSpace sp;
    sp.num_qubits = 2;
    sp.max_depth = 3;
    const LogitTablePolicy policy(sp);
    Rng rng(5);
    auto phi = random_phi(policy.num_parameters(), rng);
    std::vector<ArchSample> samples;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 12; ++i) {
        auto s = policy.sample(phi, rng);
        s.reward = u(rng);
        samples.push_back(s);
    }
    const auto g = reinforce_grad(policy, samples, phi);
    const double h = 1e-6;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        auto p = phi, m = phi;
        p[i] += h;
        m[i] -= h;
        const double fd = (surrogate_objective(policy, samples, p) - surrogate_objective(policy, samples, m)) / (2 * h);
        CHECK_THAT(g[i], WithinAbs(fd, 1e-5));
    }
}

TEST_CASE("score function has zero mean") {
    SearchSpace sp;
    sp.num_qubits = 2;
    sp.max_depth = 2;
    const LogitTablePolicy policy(sp);
    Rng rng(6);
    const auto phi = random_phi(policy.num_parameters(), rng, 0.7);
    const int n = 10000;
    std::vector<double> s(phi.size(), 0.0), s2(phi.size(), 0.0);
    for (int t = 0; t < n; ++t) {
        const auto sc = policy.score(phi, policy.sample(phi, rng).decisions);
        for (std::size_t i = 0; i < sc.size(); ++i) {
            s[i] += sc[i];
            s2[i] += sc[i] * sc[i];
        }
    }
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const double mean = s[i] / n;
        const double se = std::sqrt(std::max(0.0, s2[i] / n - mean * mean) / n);
        CHECK(std::abs(mean) <= 3.0 * se + 1e-12);
    }
}

TEST_CASE("EWC penalty") {
    const std::vector<double> phi{0.3, -1.0}, old{0.3, -1.0}, f{2.0, 5.0};
    CHECK(ewc_penalty(phi, old, f, 1.0).value == 0.0);
    const std::vector<double> ones{1.0, 1.0}, zeros{0.0, 0.0};
    CHECK_THAT(ewc_penalty(ones, zeros, ones, 2.0).value, WithinAbs(2.0, 1e-15));

    Rng rng(7);
    auto p = random_phi(6, rng), o = random_phi(6, rng), fi = random_phi(6, rng);
    for (double& v : fi) v = std::abs(v);
    const auto e = ewc_penalty(p, o, fi, 1.7);
    const double h = 1e-6;
    for (std::size_t i = 0; i < p.size(); ++i) {
        auto a = p, b = p;
        a[i] += h;
        b[i] -= h;
        const double fd = (ewc_penalty(a, o, fi, 1.7).value - ewc_penalty(b, o, fi, 1.7).value) / (2 * h);
        CHECK_THAT(e.grad[i], WithinAbs(fd, 1e-8));
    }
    const std::vector<double> neg{1.0, -0.1};
    CHECK_THROWS_AS(ewc_penalty(ones, zeros, neg, 1.0), DomainError);
    CHECK_THROWS_AS(ewc_penalty(ones, std::vector<double>{0.0}, ones, 1.0), ShapeError);
}

TEST_CASE("KL penalty") {
    const LogitTablePolicy policy(binary_space());
    const std::size_t off = policy.decisions().offset(1);
    std::vector<double> phi(policy.num_parameters(), 0.0);
    CHECK(kl_penalty(policy, phi, phi).value == 0.0);

    phi[off] = std::log(0.9);
    phi[off + 1] = std::log(0.1);
    const std::vector<double> uniform(policy.num_parameters(), 0.0);
    const double expect = 0.9 * std::log(1.8) + 0.1 * std::log(0.2);
    CHECK_THAT(kl_penalty(policy, phi, uniform).value, WithinAbs(expect, 1e-12));
    CHECK_THAT(expect, WithinAbs(0.368, 1e-3));

    SearchSpace sp;
    sp.num_qubits = 2;
    sp.max_depth = 2;
    const LogitTablePolicy big(sp);
    Rng rng(8);
    for (int t = 0; t < 1000; ++t) {
        const auto a = random_phi(big.num_parameters(), rng, 2.0);
        const auto b = random_phi(big.num_parameters(), rng, 2.0);
        CHECK(kl_penalty(big, a, b).value >= 0.0);
    }
    const auto a = random_phi(big.num_parameters(), rng);
    const auto b = random_phi(big.num_parameters(), rng);
    const auto k = kl_penalty(big, a, b);
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto p = a, m = a;
        p[i] += 1e-6;
        m[i] -= 1e-6;
        CHECK_THAT(k.grad[i], WithinAbs((kl_penalty(big, p, b).value - kl_penalty(big, m, b).value) / 2e-6, 1e-8));
    }
    CHECK_THROWS_AS(kl_penalty(big, a, std::vector<double>(3, 0.0)), ShapeError);
}

TEST_CASE("Fisher estimate") {
    const LogitTablePolicy policy(binary_space());
    const std::size_t off = policy.decisions().offset(1);

    SECTION("closed-form Bernoulli Fisher") {
        std::vector<double> phi(policy.num_parameters(), 0.0);
        phi[off] = 0.8;
        const double p = 1.0 / (1.0 + std::exp(-0.8));
        const double exact = p * (1.0 - p);
        Rng rng(9);
        const std::size_t n = 10000;
        const auto f = estimate_fisher(policy, phi, n, rng);
        // squared score is (1-p)^2 w.p. p and p^2 w.p. 1-p
        const double m4 = p * std::pow(1 - p, 4) + (1 - p) * std::pow(p, 4);
        const double se = std::sqrt((m4 - exact * exact) / n);
        CHECK(std::abs(f[off] - exact) <= 3.0 * se);
        CHECK(std::abs(f[off + 1] - exact) <= 3.0 * se);
    }

    SECTION("saturated policy has near-zero Fisher") {
        std::vector<double> phi(policy.num_parameters(), 0.0);
        phi[off] = 30.0;
        Rng rng(10);
        for (double v : estimate_fisher(policy, phi, 200, rng)) CHECK(v < 1e-10);
    }

    SECTION("relabeling the choices permutes the Fisher") {
        SearchSpace a = binary_space(), b = binary_space();
        a.rotations = {Rotation::RX, Rotation::RY, Rotation::RZ};
        b.rotations = {Rotation::RZ, Rotation::RX, Rotation::RY};
        const LogitTablePolicy pa(a), pb(b);
        const std::vector<double> la{0.0, 0.4, -0.2, 1.0, 0.0}, lb{0.0, 1.0, 0.4, -0.2, 0.0};
        Rng r1(11), r2(11);
        const auto fa = estimate_fisher(pa, la, 20000, r1);
        const auto fb = estimate_fisher(pb, lb, 20000, r2);
        CHECK_THAT(fa[1], WithinAbs(fb[2], 0.01));
        CHECK_THAT(fa[2], WithinAbs(fb[3], 0.01));
        CHECK_THAT(fa[3], WithinAbs(fb[1], 0.01));
    }
}

TEST_CASE("policy loss composition") {
    CHECK(policy_loss(0.7, 3.0, 2.0, 0.0, 0.0) == 0.7);
    CHECK_THAT(policy_loss(0.5, 2.0, 0.1, 0.1, 0.5), WithinAbs(0.75, 1e-15));
    CHECK(policy_loss(0.5, 2.0, 0.1, 0.1, 0.5) >= 0.5);
}

TEST_CASE("proximal step equals gradient descent without EWC curvature") {
    SearchSpace sp;
    sp.num_qubits = 2;
    sp.max_depth = 2;
    const LogitTablePolicy policy(sp);
    Rng rng(12);
    auto snap = PolicySnapshot::uniform(policy.num_parameters());
    snap.phi = random_phi(snap.phi.size(), rng);
    snap.prior = random_phi(snap.phi.size(), rng);
    std::vector<ArchSample> samples;
    for (int i = 0; i < 5; ++i) {
        auto s = policy.sample(snap.phi, rng);
        s.reward = 0.2 * i;
        samples.push_back(s);
    }
    const auto before = snap.phi;
    const auto g = reinforce_grad(policy, samples, before);
    const auto k = kl_penalty(policy, before, snap.prior);
    PolicyStepConfig cfg;
    policy_step(policy, snap, samples, cfg);
    for (std::size_t i = 0; i < before.size(); ++i)
        CHECK_THAT(snap.phi[i], WithinAbs(before[i] - cfg.lr * (g[i] + cfg.beta * k.grad[i]), 1e-14));
}

TEST_CASE("REINFORCE ascent on a one-architecture bandit") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto r = testing::run_bandit(seed, 500, 16, 1.0);
        INFO("seed " << seed);
        CHECK(r.final_probability > 0.9);
    }
}

TEST_CASE("strong EWC anchors the policy") {
    SearchSpace sp;
    sp.num_qubits = 2;
    sp.max_depth = 2;
    const LogitTablePolicy policy(sp);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto displacement = [&](double mu) {
            auto snap = PolicySnapshot::uniform(policy.num_parameters());
            std::fill(snap.fisher.begin(), snap.fisher.end(), 1.0);
            PolicyStepConfig cfg;
            cfg.mu = mu;
            cfg.lr = 1.0;
            Rng rng = make_rng(seed, {stream::kPolicy});
            for (int step = 0; step < 100; ++step) {
                std::vector<ArchSample> batch;
                for (int i = 0; i < 16; ++i) {
                    auto s = policy.sample(snap.phi, rng);
                    s.reward = s.arch.depth() == 1 ? 1.0 : 0.0;
                    batch.push_back(s);
                }
                policy_step(policy, snap, batch, cfg);
            }
            double d = 0.0;
            for (std::size_t i = 0; i < snap.phi.size(); ++i) d += std::pow(snap.phi[i] - snap.phi_old[i], 2);
            return std::sqrt(d);
        };
        INFO("seed " << seed);
        CHECK(displacement(1e3) < displacement(0.0));
    }
}
