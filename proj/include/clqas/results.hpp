#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "clqas/continual_harness.hpp"
#include "clqas/metrics.hpp"
#include "clqas/run_config.hpp"

namespace clqas::results {

/// JSON result file for one (method, seed) run: resolved config, config hash,
/// per-task metric rows, accuracy matrix, chosen architectures, diagnostics.
std::string serialize_run(const harness::RunRecord& run, const config::RunConfig& cfg, std::uint64_t listed_seed);

/// "<method>_seed<seed>.json"
std::string run_file_name(harness::Method method, std::uint64_t listed_seed);

std::filesystem::path write_run(const std::filesystem::path& dir, const harness::RunRecord& run,
                                const config::RunConfig& cfg, std::uint64_t listed_seed);

struct TaskRow {
    std::size_t task_id = 0;
    std::string group;
    std::string arch;
    double acc = 0.0, bacc = 0.0, f1 = 0.0;
    std::optional<double> rwd;
};

struct StoredRun {
    std::string source;
    std::string method;
    std::string dataset;
    std::uint64_t seed = 0;
    std::string config_hash;
    bool partial = false;
    std::vector<TaskRow> tasks;
    metrics::AccuracyMatrix r;
    std::optional<metrics::TransferMetrics> transfer;
};

/// Throws ParseError on malformed content.
StoredRun parse_run(const std::string& text, const std::string& source);
StoredRun load_run(const std::filesystem::path& path);
/// Every *.json file of `dir`, by file name. Throws ConfigError when there is none.
std::vector<StoredRun> load_dir(const std::filesystem::path& dir);

struct ReportRow {
    std::string label;
    double acc = 0.0, bacc = 0.0, f1 = 0.0;
    std::optional<double> rwd;
};

struct MethodTable {
    std::string method;
    std::size_t seeds = 0;
    std::size_t partial_runs = 0;
    /// Per-task seed means, then "Mean" and "Deviation" (population std over tasks).
    std::vector<ReportRow> rows;
    std::optional<double> bwt, fwt, forgetting;
};

struct Report {
    std::string dataset;
    std::vector<std::string> config_hashes;
    std::vector<MethodTable> tables;
};

/**
 * Aggregates complete runs by method (naive_vqc, qas_no_cl, cl_qas order).
 * Refuses runs with different config hashes or datasets unless allow_mixed;
 * partial runs are counted but not aggregated.
 */
Report build_report(const std::vector<StoredRun>& runs, bool allow_mixed = false);

std::string render_csv(const Report& report);
std::string render_text(const Report& report);

} // namespace clqas::results
