#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "clqas/task_data.hpp"

namespace clqas::data {

inline constexpr std::size_t kChannels = 8;
inline constexpr std::size_t kWindow = 32;
/// Index of the first price with every indicator defined and its EMAs settled.
inline constexpr std::size_t kWarmup = 39;

/**
 * Per-step technical indicators, rows for prices[first_index..]:
 *   0 one-step simple return
 *   1 10-step rolling mean of returns
 *   2 10-step rolling population std of returns
 *   3 RSI(14), simple averages of gains and losses, rescaled RSI/50 - 1
 *   4 MACD line EMA12 - EMA26 (EMAs seeded with the first price)
 *   5 MACD signal, EMA9 of the MACD line
 *   6 10-step momentum p_t - p_{t-10}
 *   7 Bollinger z-score (p_t - mean20) / std20, population std
 * Constant windows give 0 for the ratios (RSI 50 -> 0, Bollinger 0).
 */
struct IndicatorTable {
    std::size_t first_index = kWarmup;
    std::vector<std::array<double, kChannels>> rows;
    /// Rows where a 0/0 ratio was replaced by 0.
    std::size_t degenerate_rows = 0;
};

/// Throws DomainError for fewer than kWarmup + 1 prices.
IndicatorTable indicators(std::span<const double> prices);

struct FinancialParams {
    std::size_t regimes = 6;
    std::size_t steps_per_regime = 1000;
    double ar = 0.2;
    std::vector<double> drifts{-0.001, 0.0, 0.001};
    std::vector<double> vols{0.005, 0.01, 0.02};
    double start_price = 100.0;
    std::size_t tasks = 8;
};

struct FinancialSeries {
    std::vector<double> prices;
    /// Regime index of every step.
    std::vector<std::size_t> regime;
};

/// Regime r uses drift drifts[r % 3] and vol vols[(r / 2) % 3].
double regime_drift(const FinancialParams& p, std::size_t r);
double regime_vol(const FinancialParams& p, std::size_t r);

/// AR(1) log-price increments around the regime drift.
FinancialSeries simulate_prices(std::uint64_t seed, const FinancialParams& params = {});

/**
 * Windows of kWindow indicator rows (time-major, oldest first, feature
 * k * kChannels + c) labelled by next-step direction, cut into params.tasks
 * equal consecutive segments, each split chronologically 80/10/10 and
 * robust-scaled with statistics of its train part.
 */
std::vector<TaskDataset> build_financial_tasks(const FinancialSeries& series, const FinancialParams& params = {});

std::vector<TaskDataset> gen_financial(std::uint64_t seed, const FinancialParams& params = {});

/// Per-feature affine normalisation (x - center) / scale.
struct FeatureScaler {
    std::vector<double> center, scale;

    void apply(std::vector<double>& x) const;
    void apply(std::vector<Example>& xs) const;
};

/// Median / interquartile range (linear-interpolated quantiles); IQR 0 -> 1.
FeatureScaler fit_robust_scaler(std::span<const Example> train);
/// Mean / population std; std 0 -> 1.
FeatureScaler fit_zscore_scaler(std::span<const Example> train);

/// Linear-interpolated quantile of unsorted values (q in [0, 1]).
double quantile(std::vector<double> values, double q);

/// Fraction of label-1 examples over all splits.
double label_balance(const TaskDataset& task);

void save_task_cache(const std::filesystem::path& path, std::uint64_t seed, const std::vector<TaskDataset>& tasks);
/// Throws ParseError on a malformed cache file.
std::vector<TaskDataset> load_task_cache(const std::filesystem::path& path, std::uint64_t* seed = nullptr);

struct EcgOptions {
    std::uint64_t seed = 0;
    std::size_t tasks = 8;
    /// Explicit record ids per task; empty = sorted records cut into `tasks` contiguous groups.
    std::vector<std::vector<std::string>> groups;
};

struct EcgRow {
    std::string record;
    std::vector<double> window;
    int label = 0;
    std::size_t line = 0;
};

/// Parses `record,s0,...,s255,label` rows; throws ParseError with the line number.
std::vector<EcgRow> read_ecg_csv(const std::filesystem::path& path);

/**
 * Groups beats into tasks by record, then per task: stratified 80/20
 * pool/test, stratified 85/15 train/val of the pool, z-score fit on train.
 * Throws DomainError when a task holds a single class.
 */
std::vector<TaskDataset> load_ecg(const std::filesystem::path& path, const EcgOptions& options = {});

/// Two Gaussian blobs at +/- separation/2 along a random unit direction.
TaskDataset gaussian_blobs(std::size_t n, std::size_t dim, double separation, std::uint64_t seed, std::size_t task_id = 0);

} // namespace clqas::data
