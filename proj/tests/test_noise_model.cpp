#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "clqas/errors.hpp"
#include "clqas/noise_model.hpp"

using namespace clqas;
using namespace clqas::noise;
using Catch::Matchers::WithinAbs;

namespace {

struct MeanSe {
    double mean, se;
};

template <class F>
MeanSe monte_carlo(std::size_t n, F&& sample) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = sample(i);
        s += v;
        s2 += v * v;
    }
    const double mean = s / static_cast<double>(n);
    const double var = std::max(0.0, s2 / static_cast<double>(n) - mean * mean);
    return {mean, std::sqrt(var / static_cast<double>(n))};
}

} // namespace

TEST_CASE("contraction factors") {
    NoiseModel m = NoiseModel::noiseless();
    CHECK(contraction_alpha(m, {5, 3}) == 1.0);

    m = NoiseModel{0.001, 0.0, 0.0, 0.0, Convention::Standard};
    CHECK_THAT(contraction_alpha(m, {1, 0}), WithinAbs(0.99866667, 1e-8));

    m = NoiseModel{0.0, 0.0, 0.01, 0.0, Convention::Standard};
    CHECK_THAT(contraction_alpha(m, {10, 10}), WithinAbs(0.98, 1e-15));

    m = NoiseModel{0.01, 0.02, 0.0, 0.0, Convention::Linear};
    CHECK_THAT(m.zeta1(), WithinAbs(0.99, 1e-15));
    CHECK_THAT(m.zeta2(), WithinAbs(0.98, 1e-15));
    CHECK(convention_from_string("linear") == Convention::Linear);
    CHECK_THROWS_AS(convention_from_string("quadratic"), ConfigError);
}

TEST_CASE("contraction_alpha is monotone in every argument") {
    const NoiseModel base{0.002, 0.003, 0.01, 0.0, Convention::Standard};
    const GateCensus c{10, 4};
    const double a0 = contraction_alpha(base, c);
    for (int which = 0; which < 3; ++which) {
        NoiseModel m = base;
        (which == 0 ? m.p1 : which == 1 ? m.p2 : m.pr) += 0.001;
        CHECK(contraction_alpha(m, c) <= a0);
    }
    CHECK(contraction_alpha(base, {11, 4}) <= a0);
    CHECK(contraction_alpha(base, {10, 5}) <= a0);
}

TEST_CASE("noise model validation") {
    CHECK_THROWS_AS((NoiseModel{0.9, 0.0, 0.0, 0.0, Convention::Standard}.validate()), DomainError);
    CHECK_THROWS_AS((NoiseModel{0.0, 0.0, 0.5, 0.0, Convention::Standard}.validate()), DomainError);
    CHECK_THROWS_AS((NoiseModel{-0.1, 0.0, 0.0, 0.0, Convention::Standard}.validate()), DomainError);
    CHECK_NOTHROW(NoiseModel{}.validate());
}

TEST_CASE("expectation-level noise") {
    const std::vector<double> z{1.0, -1.0};
    const std::vector<double> zero{0.0, 0.0};
    CHECK(apply_expectation_noise(z, 1.0, zero, 0.0) == z);
    const auto half = apply_expectation_noise(z, 0.5);
    CHECK(half == std::vector<double>{0.5, -0.5});

    Rng rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> zz(4), d(4);
        for (double& v : zz) v = u(rng);
        for (double& v : d) v = 0.05 * u(rng);
        const double alpha = 0.5 + 0.5 * std::abs(u(rng));
        const double bound = 0.1;
        const auto out = apply_expectation_noise(zz, alpha, d, bound);
        double dev = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
            dev += (out[i] - alpha * zz[i]) * (out[i] - alpha * zz[i]);
            CHECK(std::abs(out[i]) <= 1.0);
        }
        CHECK(std::sqrt(dev) <= bound);
    }
    const std::vector<double> big{1.0, 1.0};
    CHECK_THROWS_AS(apply_expectation_noise(z, 1.0, big, 1.0), DomainError);
}

TEST_CASE("single-qubit depolarizing contracts <Z> by 1 - 4p/3") {
    const double p = 0.3;
    const std::size_t q[] = {0};
    Rng rng(2);
    const auto mc = monte_carlo(100000, [&](std::size_t) {
        auto s = stochastic_depolarize(qsim::QuantumState(1), q, p, rng);
        return qsim::expect_z_all(s)[0];
    });
    CHECK_THAT(mc.mean, WithinAbs(1.0 - 4.0 / 3.0 * p, 0.01));

    auto untouched = stochastic_depolarize(qsim::prepare_angle_state(std::vector<double>{0.7}), q, 0.0, rng);
    CHECK_THAT(qsim::expect_z_all(untouched)[0], WithinAbs(std::cos(0.7), 1e-15));
}

TEST_CASE("two-qubit depolarizing contracts <ZZ> by 1 - 16p/15") {
    const double p = 0.15;
    const double r = 1.0 / std::sqrt(2.0);
    const qsim::QuantumState bell(2, {r, 0.0, 0.0, r});
    const std::size_t both[] = {0, 1};
    Rng rng(3);
    const auto mc = monte_carlo(100000, [&](std::size_t) {
        return qsim::expect_z_product(stochastic_depolarize2(bell, 0, 1, p, rng), both);
    });
    CHECK_THAT(mc.mean, WithinAbs(1.0 - 16.0 / 15.0 * p, 0.01));
}

TEST_CASE("readout flips contract <Z> by 1 - 2pr") {
    Rng rng(4);
    CHECK(readout_flip(0b1011, 4, 0.0, rng) == 0b1011);
    const auto mc = monte_carlo(100000, [&](std::size_t) {
        const auto b = readout_flip(0, 1, 0.01, rng);
        return b ? -1.0 : 1.0;
    });
    CHECK_THAT(mc.mean, WithinAbs(0.98, 0.005));
    const auto near_half = monte_carlo(100000, [&](std::size_t) { return readout_flip(0, 1, 0.4999, rng) ? -1.0 : 1.0; });
    CHECK(std::abs(near_half.mean) < 0.02);
    CHECK_THROWS_AS(readout_flip(0, 1, 0.5, rng), DomainError);
}

TEST_CASE("encoder jitter") {
    Rng rng(5);
    const std::vector<double> a{0.1, -0.4, 2.0};
    CHECK(jitter_angles(a, 0.0, rng) == a);
    for (int t = 0; t < 100; ++t) {
        const auto j = jitter_angles(a, 0.05, rng);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(j[i] - a[i]) <= 0.05);
    }
    Rng r1(77), r2(77);
    CHECK(jitter_angles(a, 0.2, r1) == jitter_angles(a, 0.2, r2));
}

TEST_CASE("trajectory means match the analytic contraction on short circuits") {
    const NoiseModel noise{0.12, 0.2, 0.0, 0.0, Convention::Standard};
    const std::size_t n = 20000;

    SECTION("one qubit, encoding RY then RX and RY") {
        const std::vector<double> enc{0.4};
        const std::vector<qsim::Gate> gates{qsim::Gate::rx(0, 0.9), qsim::Gate::ry(0, -0.3)};
        qsim::QuantumState s = qsim::prepare_angle_state(enc);
        qsim::apply_circuit_inplace(s, gates);
        const double exact = qsim::expect_z_all(s)[0];
        Rng rng(6);
        const auto mc = monte_carlo(n, [&](std::size_t) { return trajectory_expectations(enc, gates, noise, rng)[0]; });
        const double analytic = std::pow(noise.zeta1(), 3) * exact;
        CHECK(std::abs(mc.mean - analytic) <= 3.0 * mc.se);
    }

    SECTION("two qubits, CNOT target expectation") {
        const std::vector<double> enc{1.1, 0.3};
        const std::vector<qsim::Gate> gates{qsim::Gate::cnot(0, 1)};
        qsim::QuantumState s = qsim::prepare_angle_state(enc);
        qsim::apply_circuit_inplace(s, gates);
        const double exact = qsim::expect_z_all(s)[1];
        Rng rng(7);
        const auto mc = monte_carlo(n, [&](std::size_t) { return trajectory_expectations(enc, gates, noise, rng)[1]; });
        const double analytic = std::pow(noise.zeta1(), 2) * noise.zeta2() * exact;
        CHECK(std::abs(mc.mean - analytic) <= 3.0 * mc.se);
    }
}

TEST_CASE("mean trajectory expectations are reproducible") {
    const NoiseModel noise{0.05, 0.05, 0.01, 0.02, Convention::Standard};
    const std::vector<double> enc{0.2, 1.0, -0.5};
    const std::vector<qsim::Gate> gates{qsim::Gate::rx(0, 0.3), qsim::Gate::cnot(0, 1), qsim::Gate::cnot(1, 2)};
    CHECK(mean_trajectory_expectations(enc, gates, noise, 200, 42) ==
          mean_trajectory_expectations(enc, gates, noise, 200, 42));
}
