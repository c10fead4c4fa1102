#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "clqas/results.hpp"
#include "clqas/run_config.hpp"
#include "clqas/task_data.hpp"

namespace clqas::runner {

/// Task sequence named by the config: generated financial tasks (or a task
/// cache at data.path), ECG beats from data.path, or Gaussian blobs.
std::vector<TaskDataset> load_tasks(const config::RunConfig& cfg);

struct BenchmarkOutcome {
    std::vector<std::filesystem::path> files;
    /// Parsed back from the written files, in (method, seed) order.
    std::vector<results::StoredRun> runs;
    bool partial = false;
};

/**
 * Runs every (method, seed) pair of the config on up to cfg.jobs threads,
 * writes one result file per pair under cfg.out, then report.csv and
 * report.txt for the runs of this invocation.
 */
BenchmarkOutcome run_benchmark(const config::RunConfig& cfg, const std::atomic<bool>* stop = nullptr,
                               const std::function<void(const std::string&)>& log = {});

} // namespace clqas::runner
