#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "clqas/continual_harness.hpp"

namespace clqas::config {

/**
 * Everything a benchmark run needs. Loaded from a flat dotted-key file
 * (TOML subset: `key = value`, `[section]` prefixes, `#` comments; values are
 * integers, reals, booleans, "strings" and one-line [arrays]). Unknown keys
 * are rejected.
 */
struct RunConfig {
    std::vector<harness::Method> methods{harness::Method::NaiveVqc, harness::Method::QasNoCl, harness::Method::ClQas};
    /// financial | ecg | blobs
    std::string dataset = "financial";
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::uint64_t master_seed = 0;
    std::filesystem::path out = "results";
    std::size_t jobs = 1;

    std::uint64_t data_seed = 1;
    std::filesystem::path data_path;
    std::size_t tasks = 8;

    /// Search, training and audit settings; its `noise` member is ignored here.
    harness::HarnessConfig harness;
    noise::NoiseModel noise;
    bool noise_enabled = false;

    /// Throws ConfigError with the offending key.
    void validate() const;

    /// `harness` with the noise model attached when enabled.
    harness::HarnessConfig harness_config() const;

    /// Per-run seed derived from the master seed and a listed seed.
    std::uint64_t run_seed(std::uint64_t seed) const;
};

/// Keys the loader accepts, in canonical order.
const std::vector<std::string>& known_keys();

/// Parses `text`; `source` names it in error messages. Throws ConfigError.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>", RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// Sets one key from its textual value as it would appear in a config file.
void set_key(RunConfig& cfg, const std::string& key, const std::string& value);

/// (key, value as a JSON literal) for every key, in canonical order.
std::vector<std::pair<std::string, std::string>> resolved_entries(const RunConfig& cfg);

/// Canonical `key = value` listing of every resolved key.
std::string resolved_text(const RunConfig& cfg);

/// FNV-1a over the resolved keys that affect results (not run.seeds, run.methods, run.out, run.jobs).
std::uint64_t config_hash(const RunConfig& cfg);
std::string hash_hex(std::uint64_t h);

} // namespace clqas::config
