#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "clqas/errors.hpp"
#include "clqas/qas_policy.hpp"
#include "clqas/vqc_classifier.hpp"

using namespace clqas;
using namespace clqas::vqc;
using Catch::Matchers::WithinAbs;

namespace {

// Three qubits fed by a 6 -> 3 TT encoder.
Model small_model(const qas::Architecture& arch, Rng& rng) {
    Model m;
    m.arch = arch;
    m.head.num_classes = 2;
    m.encoder = tt::TTLinear::random({2, 3}, {3, 1}, {1, 2, 1}, rng);
    std::uniform_real_distribution<double> u(-std::numbers::pi, std::numbers::pi);
    m.params.theta.resize(arch.rotation_count());
    for (double& t : m.params.theta) t = u(rng);
    return m;
}

std::vector<Example> random_batch(std::size_t n, std::size_t dim, Rng& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Example> b(n);
    for (std::size_t i = 0; i < n; ++i) {
        b[i].x.resize(dim);
        for (double& v : b[i].x) v = g(rng);
        b[i].y = static_cast<int>(i % 2);
    }
    return b;
}

qas::Architecture random_arch(std::size_t u, std::size_t depth, Rng& rng) {
    qas::SearchSpace s;
    s.num_qubits = u;
    s.max_depth = depth;
    s.min_depth = depth;
    const qas::LogitTablePolicy p(s);
    return p.sample(std::vector<double>(p.num_parameters(), 0.0), rng).arch;
}

double relative_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3}); }

} // namespace

TEST_CASE("baseline circuit structure") {
    const auto a = qas::Architecture::baseline(2, 1);
    const auto gates = build_circuit(a, CircuitParams::zeros(a));
    CHECK(gates.size() == 7);
    CHECK(a.rotation_count() == 6);
    CHECK(gates[0].kind == qsim::GateKind::RX);
    CHECK(gates[1].kind == qsim::GateKind::RY);
    CHECK(gates[2].kind == qsim::GateKind::RZ);
    CHECK(gates[6].kind == qsim::GateKind::CNOT);

    for (std::size_t u : {2u, 3u, 5u})
        for (std::size_t l : {1u, 2u, 4u}) {
            const auto b = qas::Architecture::baseline(u, l);
            const auto c = noise::census(build_circuit(b, CircuitParams::zeros(b)));
            CHECK(c.n1 == 3 * u * l);
            CHECK(c.n2 == (u - 1) * l);
        }

    auto none = qas::Architecture::baseline(4, 2);
    for (auto& l : none.layers) l.entangler = qas::Entangler::None;
    CHECK(noise::census(build_circuit(none, CircuitParams::zeros(none))).n2 == 0);
    CHECK(circuit_census(none).n1 == 4 + 24);

    CHECK_THROWS_AS(build_circuit(a, CircuitParams{{0.0}}), ShapeError);
}

TEST_CASE("forward probabilities") {
    Rng rng(1);
    const auto arch = qas::Architecture::from_tokens("L1 | q0:I q1:RX q2:I | ent:none");
    Model m = small_model(arch, rng);
    m.encoder = tt::TTLinear({2, 3}, {3, 1}, {1, 2, 1});
    const std::vector<double> x(6, 0.3);

    m.params.theta = {0.0};
    auto p = forward(x, m);
    CHECK_THAT(p[0], WithinAbs(0.5, 1e-15));
    CHECK_THAT(p[1], WithinAbs(0.5, 1e-15));

    m.params.theta = {std::numbers::pi}; // sigma = (1, -1, 1)
    p = forward(x, m);
    const double e = std::exp(1.0), ei = std::exp(-1.0);
    CHECK_THAT(p[0], WithinAbs(e / (e + ei), 1e-12));
    CHECK_THAT(p[1], WithinAbs(ei / (e + ei), 1e-12));
    CHECK_THAT(p[0], WithinAbs(0.8808, 1e-4));

    EvalOptions full;
    full.noise = noise::NoiseModel{0.75, 0.0, 0.0, 0.0, noise::Convention::Standard}; // zeta1 = 0
    p = forward(x, m, full);
    CHECK_THAT(p[0], WithinAbs(0.5, 1e-15));

    m.head.num_classes = 3;
    CHECK_THROWS_AS(forward(x, m), ConfigError);
}

TEST_CASE("probabilities are positive and normalised, noise keeps the argmax") {
    Rng rng(2);
    for (int trial = 0; trial < 30; ++trial) {
        const Model m = small_model(random_arch(3, 2, rng), rng);
        const auto batch = random_batch(4, 6, rng);
        EvalOptions noisy;
        noisy.noise = noise::NoiseModel{0.01, 0.02, 0.03, 0.0, noise::Convention::Standard};
        for (const auto& e : batch) {
            const auto p = forward(e.x, m);
            CHECK(p[0] > 0.0);
            CHECK(p[1] > 0.0);
            CHECK_THAT(p[0] + p[1], WithinAbs(1.0, 1e-10));
            CHECK(predict(e.x, m) == predict(e.x, m, noisy));
        }
    }
}

TEST_CASE("shot-mode forward") {
    Rng rng(3);
    const Model m = small_model(random_arch(3, 2, rng), rng);
    const auto batch = random_batch(3, 6, rng);
    Rng shots(4);
    EvalOptions opts;
    opts.shots = 1024;
    opts.rng = &shots;
    for (const auto& e : batch) {
        const auto p = forward(e.x, m, opts);
        CHECK_THAT(p[0] + p[1], WithinAbs(1.0, 1e-10));
    }
    CHECK_THROWS_AS(gradient(batch, m, opts), UnsupportedModeError);
}

TEST_CASE("cross-entropy") {
    const std::vector<int> two{0, 1};
    CHECK_THAT(mean_cross_entropy({{0.5, 0.5}, {0.5, 0.5}}, two), WithinAbs(std::log(2.0), 1e-15));
    CHECK(mean_cross_entropy({{1.0, 0.0}}, std::vector<int>{0}) == 0.0);
    CHECK_THAT(mean_cross_entropy({{0.9, 0.1}, {0.9, 0.1}}, std::vector<int>{0, 1}),
               WithinAbs(-(std::log(0.9) + std::log(0.1)) / 2, 1e-15));
    CHECK_THROWS_AS(mean_cross_entropy({}, std::vector<int>{}), DomainError);

    Rng rng(5);
    const auto arch = qas::Architecture::from_tokens("L1 | q0:I q1:RX q2:I | ent:none");
    Model m = small_model(arch, rng);
    m.encoder = tt::TTLinear({2, 3}, {3, 1}, {1, 2, 1});
    m.params.theta = {0.0};
    auto batch = random_batch(4, 6, rng);
    CHECK_THAT(loss(batch, m), WithinAbs(std::log(2.0), 1e-12));
    CHECK_THROWS_AS(loss(std::vector<Example>{}, m), DomainError);
    batch[0].y = 2;
    CHECK_THROWS_AS(loss(batch, m), DomainError);
}

TEST_CASE("gradient vanishes at the symmetric point") {
    Rng rng(6);
    Model m = small_model(qas::Architecture::baseline(3, 2), rng);
    m.encoder = tt::TTLinear({2, 3}, {3, 1}, {1, 2, 1});
    std::fill(m.params.theta.begin(), m.params.theta.end(), 0.0);
    const auto batch = random_batch(6, 6, rng);
    for (auto method : {GradientMethod::ParameterShift, GradientMethod::Adjoint}) {
        const auto g = gradient(batch, m, {}, method);
        CHECK(g.squared_norm() < 1e-16);
    }
}

TEST_CASE("Z rotations on a basis state carry no gradient") {
    Rng rng(7);
    const auto arch = qas::Architecture::from_tokens("L1 | q0:RZ q1:RZ q2:RZ | ent:chain");
    Model m = small_model(arch, rng);
    m.encoder = tt::TTLinear({2, 3}, {3, 1}, {1, 2, 1});
    const auto g = gradient(random_batch(4, 6, rng), m);
    for (double v : g.theta) CHECK(v == 0.0);
}

TEST_CASE("parameter-shift gradients match finite differences") {
    Rng rng(8);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        Model m = small_model(random_arch(3, 2, rng), rng);
        const auto batch = random_batch(3, 6, rng);
        EvalOptions opts;
        if (trial % 2) opts.noise = noise::NoiseModel{0.01, 0.01, 0.02, 0.0, noise::Convention::Standard};
        const auto g = gradient(batch, m, opts, GradientMethod::ParameterShift);
        const auto adj = gradient(batch, m, opts, GradientMethod::Adjoint);
        CHECK_THAT(g.loss, WithinAbs(loss(batch, m, opts), 1e-12));
        const auto analytic = g.flat();
        const auto other = adj.flat();
        auto flat = m.flat_parameters();
        REQUIRE(analytic.size() == flat.size());
        const double h = 1e-4;
        for (std::size_t i = 0; i < flat.size(); ++i) {
            CHECK_THAT(analytic[i], WithinAbs(other[i], 1e-10));
            auto p = flat;
            p[i] += h;
            m.set_flat_parameters(p);
            const double lp = loss(batch, m, opts);
            p[i] -= 2 * h;
            m.set_flat_parameters(p);
            const double lm = loss(batch, m, opts);
            m.set_flat_parameters(flat);
            worst = std::max(worst, relative_error(analytic[i], (lp - lm) / (2 * h)));
        }
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("Adam") {
    SECTION("zero gradient leaves parameters unchanged") {
        std::vector<double> p{0.5, -1.0};
        AdamState st;
        for (int i = 0; i < 5; ++i) adam_step(p, std::vector<double>{0.0, 0.0}, st);
        CHECK(p == std::vector<double>{0.5, -1.0});
    }
    SECTION("three-step scalar trace") {
        const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double g[3] = {1.0, -2.0, 0.5};
        // m1 = 0.1, v1 = 0.001; m2 = 0.09 - 0.2 = -0.11, v2 = 0.000999 + 0.004 = 0.004999
        // m3 = -0.099 + 0.05 = -0.049, v3 = 0.004994001 + 0.00025 = 0.005244001
        const double m[3] = {0.1, -0.11, -0.049};
        const double v[3] = {0.001, 0.004999, 0.005244001};
        double x = 1.0, expect = 1.0;
        AdamState st;
        for (int t = 0; t < 3; ++t) {
            std::vector<double> p{x};
            adam_step(p, std::vector<double>{g[t]}, st, AdamConfig{lr, b1, b2, eps});
            x = p[0];
            const double mh = m[t] / (1 - std::pow(b1, t + 1));
            const double vh = v[t] / (1 - std::pow(b2, t + 1));
            expect -= lr * mh / (std::sqrt(vh) + eps);
            CHECK_THAT(st.m[0], WithinAbs(m[t], 1e-15));
            CHECK_THAT(st.v[0], WithinAbs(v[t], 1e-15));
            CHECK_THAT(x, WithinAbs(expect, 1e-14));
        }
        // first step moves by lr against the gradient sign
        std::vector<double> q{0.0};
        AdamState fresh;
        adam_step(q, std::vector<double>{3.7}, fresh, AdamConfig{lr, b1, b2, eps});
        CHECK_THAT(q[0], WithinAbs(-lr, 1e-8));
    }
    SECTION("shape checks") {
        std::vector<double> p{1.0, 2.0};
        AdamState st;
        CHECK_THROWS_AS(adam_step(p, std::vector<double>{1.0}, st), ShapeError);
    }
}

TEST_CASE("training decreases the loss on a separable toy set") {
    Rng rng(9);
    std::normal_distribution<double> g(0.0, 0.3);
    std::vector<Example> data;
    for (int i = 0; i < 40; ++i) {
        Example e;
        e.y = i % 2;
        e.x.resize(6);
        for (double& v : e.x) v = g(rng);
        e.x[0] += e.y ? 1.0 : -1.0;
        data.push_back(e);
    }
    Model m;
    m.arch = qas::Architecture::baseline(3, 2);
    Rng init(10);
    m.params = CircuitParams::random(m.arch, init);
    m.encoder = tt::TTLinear::random({2, 3}, {3, 1}, {1, 2, 1}, init);

    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch = data.size(); // one full-batch step per epoch
    cfg.adam.lr = 0.02;
    cfg.method = GradientMethod::ParameterShift;
    AdamState st;
    const double initial = loss(data, m);
    std::vector<double> trace{initial};
    for (int step = 0; step < 20; ++step) {
        TrainConfig one = cfg;
        one.epochs = 1;
        one.first_epoch = static_cast<std::size_t>(step);
        train(m, data, one, st);
        trace.push_back(loss(data, m));
    }
    for (std::size_t i = 4; i < trace.size(); ++i) CHECK(trace[i] < trace[i - 1]);
    CHECK(trace.back() < initial);

    // identical runs are bit-identical
    Model a = m, b = m;
    AdamState sa, sb;
    cfg.epochs = 3;
    cfg.batch = 8;
    train(a, data, cfg, sa);
    train(b, data, cfg, sb);
    CHECK(a.flat_parameters() == b.flat_parameters());
}
