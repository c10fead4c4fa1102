#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clqas/continual_harness.hpp"
#include "clqas/task_data.hpp"

namespace clqas::theory {

struct CheckLine {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct SuiteResult {
    std::string suite;
    std::vector<CheckLine> lines;

    bool passed() const;
    std::string render() const;
};

/**
 * TT-SVD on random vectors (lengths 16..256 with random mode factorizations,
 * rank caps 1..4): measured error within the discarded-singular-value norm,
 * and measured fidelity above ((1 - rho)/(1 + rho))^2 whenever rho < 1.
 */
SuiteResult tt_suite(std::uint64_t seed, std::size_t error_cases = 200, std::size_t fidelity_cases = 100);

/// Monte Carlo trajectory means against the contraction factors.
SuiteResult noise_suite(std::uint64_t seed, std::size_t trajectories = 100000);

/**
 * Parameter-shift gradients (circuit angles chained through the softmax head,
 * and TT encoder cores) against central finite differences of the loss on
 * random U = 3, L = 2 circuits.
 */
SuiteResult gradient_suite(std::uint64_t seed, std::size_t circuits = 20, double tolerance = 1e-5);

struct RobustnessOptions {
    harness::HarnessConfig harness;
    std::vector<TaskDataset> tasks;
    std::uint64_t seed = 1;
};

/// Desk-scale defaults: 3 synthetic financial tasks, U = 8, short training.
RobustnessOptions default_robustness_options(std::uint64_t seed);

/// p1, p2 in {0, 0.001, 0.005} independently, times pr in {0, 0.01}: 18 configurations.
std::vector<noise::NoiseModel> robustness_grid();

/**
 * Trains cl_qas on the tasks and audits every task's model on every grid
 * configuration; each (model, noise) pair must satisfy LHS <= RHS.
 */
SuiteResult robustness_suite(const RobustnessOptions& opts);

} // namespace clqas::theory
