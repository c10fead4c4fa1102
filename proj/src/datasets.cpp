#include "clqas/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "clqas/errors.hpp"
#include "clqas/rng.hpp"

namespace clqas::data {

namespace {

constexpr std::size_t kEcgSamples = 256;

std::vector<double> ema(std::span<const double> x, std::size_t n) {
    const double a = 2.0 / (static_cast<double>(n) + 1.0);
    std::vector<double> out(x.size());
    out[0] = x[0];
    for (std::size_t t = 1; t < x.size(); ++t) out[t] = a * x[t] + (1.0 - a) * out[t - 1];
    return out;
}

// Population mean and std of x[t-n+1..t].
std::pair<double, double> window_stats(std::span<const double> x, std::size_t t, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = t + 1 - n; i <= t; ++i) s += x[i];
    const double mean = s / static_cast<double>(n);
    double v = 0.0;
    for (std::size_t i = t + 1 - n; i <= t; ++i) v += (x[i] - mean) * (x[i] - mean);
    return {mean, std::sqrt(v / static_cast<double>(n))};
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("ECG CSV: '" + s + "' is not a finite number", line);
    }
}

// Shuffles the indices of each class and moves round(fraction * n_c) of them to `taken`.
void stratified_take(std::vector<std::size_t>& pool, const std::vector<int>& labels, double fraction, Rng& rng,
                     std::vector<std::size_t>& taken) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i : pool) by_class[labels[i]].push_back(i);
    pool.clear();
    for (auto& [cls, idx] : by_class) {
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto k = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(idx.size())));
        taken.insert(taken.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
        pool.insert(pool.end(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end());
    }
    std::sort(pool.begin(), pool.end());
    std::sort(taken.begin(), taken.end());
}

nlohmann::json examples_to_json(const std::vector<Example>& xs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Example& e : xs) arr.push_back({{"t", e.t}, {"y", e.y}, {"x", e.x}});
    return arr;
}

std::vector<Example> examples_from_json(const nlohmann::json& arr) {
    std::vector<Example> xs;
    for (const auto& j : arr) xs.push_back(Example{j.at("x").get<std::vector<double>>(), j.at("y").get<int>(), j.at("t").get<std::int64_t>()});
    return xs;
}

} // namespace

IndicatorTable indicators(std::span<const double> prices) {
    const std::size_t n = prices.size();
    if (n < kWarmup + 1)
        throw DomainError("indicators: need at least " + std::to_string(kWarmup + 1) + " prices, got " + std::to_string(n));
    std::vector<double> ret(n, 0.0);
    for (std::size_t t = 1; t < n; ++t) ret[t] = prices[t] / prices[t - 1] - 1.0;
    const auto e12 = ema(prices, 12), e26 = ema(prices, 26);
    std::vector<double> macd(n);
    for (std::size_t t = 0; t < n; ++t) macd[t] = e12[t] - e26[t];
    const auto signal = ema(macd, 9);

    IndicatorTable table;
    table.first_index = kWarmup;
    table.rows.reserve(n - kWarmup);
    for (std::size_t t = kWarmup; t < n; ++t) {
        std::array<double, kChannels> row{};
        bool degenerate = false;
        row[0] = ret[t];
        const auto [rm, rs] = window_stats(ret, t, 10);
        row[1] = rm;
        row[2] = rs;

        double gain = 0.0, loss = 0.0;
        for (std::size_t i = t - 13; i <= t; ++i) {
            const double d = prices[i] - prices[i - 1];
            (d > 0 ? gain : loss) += std::abs(d);
        }
        gain /= 14.0;
        loss /= 14.0;
        double rsi;
        if (loss == 0.0) {
            rsi = gain == 0.0 ? 50.0 : 100.0;
            degenerate |= gain == 0.0;
        } else {
            rsi = 100.0 - 100.0 / (1.0 + gain / loss);
        }
        row[3] = rsi / 50.0 - 1.0;
        row[4] = macd[t];
        row[5] = signal[t];
        row[6] = prices[t] - prices[t - 10];
        const auto [pm, ps] = window_stats(prices, t, 20);
        if (ps > 0.0) {
            row[7] = (prices[t] - pm) / ps;
        } else {
            row[7] = 0.0;
            degenerate = true;
        }
        table.degenerate_rows += degenerate;
        table.rows.push_back(row);
    }
    return table;
}

double regime_drift(const FinancialParams& p, std::size_t r) { return p.drifts[r % p.drifts.size()]; }
double regime_vol(const FinancialParams& p, std::size_t r) { return p.vols[(r / 2) % p.vols.size()]; }

FinancialSeries simulate_prices(std::uint64_t seed, const FinancialParams& params) {
    if (params.regimes == 0 || params.steps_per_regime == 0) throw ConfigError("financial generator: empty timeline");
    if (params.drifts.empty() || params.vols.empty()) throw ConfigError("financial generator: empty drift/vol grid");
    Rng rng = make_rng(seed, {stream::kData});
    std::normal_distribution<double> eta(0.0, 1.0);
    FinancialSeries s;
    const std::size_t total = params.regimes * params.steps_per_regime;
    s.prices.reserve(total);
    s.regime.reserve(total);
    double logp = 0.0; // log(price / start_price)
    double prev_dev = 0.0; // previous increment minus its drift
    for (std::size_t t = 0; t < total; ++t) {
        const std::size_t r = t / params.steps_per_regime;
        if (t > 0) {
            const double dev = params.ar * prev_dev + regime_vol(params, r) * eta(rng);
            logp += regime_drift(params, r) + dev;
            prev_dev = dev;
        }
        s.prices.push_back(params.start_price * std::exp(logp));
        s.regime.push_back(r);
    }
    return s;
}

void FeatureScaler::apply(std::vector<double>& x) const {
    if (x.size() != center.size()) throw ShapeError("FeatureScaler: feature length mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = (x[i] - center[i]) / scale[i];
}

void FeatureScaler::apply(std::vector<Example>& xs) const {
    for (Example& e : xs) apply(e.x);
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw DomainError("quantile of an empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

FeatureScaler fit_robust_scaler(std::span<const Example> train) {
    if (train.empty()) throw DomainError("fit_robust_scaler: empty train split");
    const std::size_t d = train.front().x.size();
    FeatureScaler s;
    s.center.resize(d);
    s.scale.resize(d);
    std::vector<double> col(train.size());
    for (std::size_t f = 0; f < d; ++f) {
        for (std::size_t i = 0; i < train.size(); ++i) col[i] = train[i].x[f];
        s.center[f] = quantile(col, 0.5);
        const double iqr = quantile(col, 0.75) - quantile(col, 0.25);
        s.scale[f] = iqr > 0.0 ? iqr : 1.0;
    }
    return s;
}

FeatureScaler fit_zscore_scaler(std::span<const Example> train) {
    if (train.empty()) throw DomainError("fit_zscore_scaler: empty train split");
    const std::size_t d = train.front().x.size();
    FeatureScaler s;
    s.center.assign(d, 0.0);
    s.scale.assign(d, 0.0);
    for (const Example& e : train)
        for (std::size_t f = 0; f < d; ++f) s.center[f] += e.x[f];
    for (double& c : s.center) c /= static_cast<double>(train.size());
    for (const Example& e : train)
        for (std::size_t f = 0; f < d; ++f) s.scale[f] += (e.x[f] - s.center[f]) * (e.x[f] - s.center[f]);
    for (double& v : s.scale) {
        v = std::sqrt(v / static_cast<double>(train.size()));
        if (!(v > 0.0)) v = 1.0;
    }
    return s;
}

std::vector<TaskDataset> build_financial_tasks(const FinancialSeries& series, const FinancialParams& params) {
    const auto table = indicators(series.prices);
    const std::size_t first_t = table.first_index + kWindow - 1;     // first time with a full window
    const std::size_t last_t = series.prices.size() - 2;             // last time with a next price
    if (last_t < first_t) throw DomainError("financial series too short for one window");
    const std::size_t n_samples = last_t - first_t + 1;
    if (params.tasks == 0 || n_samples < params.tasks * 10) throw ConfigError("financial series too short for the task count");
    const std::size_t per_task = n_samples / params.tasks;

    std::vector<TaskDataset> tasks;
    for (std::size_t m = 0; m < params.tasks; ++m) {
        std::vector<Example> seg;
        seg.reserve(per_task);
        for (std::size_t k = 0; k < per_task; ++k) {
            const std::size_t t = first_t + m * per_task + k;
            Example e;
            e.t = static_cast<std::int64_t>(t);
            e.y = series.prices[t + 1] > series.prices[t] ? 1 : 0;
            e.x.reserve(kWindow * kChannels);
            for (std::size_t w = 0; w < kWindow; ++w) {
                const auto& row = table.rows[t + 1 - kWindow + w - table.first_index];
                e.x.insert(e.x.end(), row.begin(), row.end());
            }
            seg.push_back(std::move(e));
        }
        const std::size_t n_train = per_task * 8 / 10;
        const std::size_t n_val = per_task / 10;
        TaskDataset task;
        task.task_id = m;
        task.source = "financial";
        const std::size_t r0 = series.regime[static_cast<std::size_t>(seg.front().t)];
        const std::size_t r1 = series.regime[static_cast<std::size_t>(seg.back().t)];
        task.group = r0 == r1 ? "regime " + std::to_string(r0) : "regimes " + std::to_string(r0) + "-" + std::to_string(r1);
        task.train.assign(seg.begin(), seg.begin() + static_cast<std::ptrdiff_t>(n_train));
        task.val.assign(seg.begin() + static_cast<std::ptrdiff_t>(n_train),
                        seg.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
        task.test.assign(seg.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), seg.end());
        const FeatureScaler scaler = fit_robust_scaler(task.train);
        scaler.apply(task.train);
        scaler.apply(task.val);
        scaler.apply(task.test);
        tasks.push_back(std::move(task));
    }
    return tasks;
}

std::vector<TaskDataset> gen_financial(std::uint64_t seed, const FinancialParams& params) {
    return build_financial_tasks(simulate_prices(seed, params), params);
}

double label_balance(const TaskDataset& task) {
    std::size_t pos = 0, n = 0;
    for (const auto* split : {&task.train, &task.val, &task.test})
        for (const Example& e : *split) {
            pos += e.y == 1;
            ++n;
        }
    return n ? static_cast<double>(pos) / static_cast<double>(n) : 0.0;
}

void save_task_cache(const std::filesystem::path& path, std::uint64_t seed, const std::vector<TaskDataset>& tasks) {
    nlohmann::json j;
    j["format"] = "clqas-task-cache-1";
    j["seed"] = seed;
    j["tasks"] = nlohmann::json::array();
    for (const auto& t : tasks)
        j["tasks"].push_back({{"task_id", t.task_id},
                              {"source", t.source},
                              {"group", t.group},
                              {"train", examples_to_json(t.train)},
                              {"val", examples_to_json(t.val)},
                              {"test", examples_to_json(t.test)}});
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << j.dump() << '\n';
}

std::vector<TaskDataset> load_task_cache(const std::filesystem::path& path, std::uint64_t* seed) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    try {
        const auto j = nlohmann::json::parse(in);
        if (j.at("format") != "clqas-task-cache-1") throw ParseError("unknown cache format in " + path.string(), 0);
        if (seed) *seed = j.at("seed").get<std::uint64_t>();
        std::vector<TaskDataset> tasks;
        for (const auto& t : j.at("tasks")) {
            TaskDataset d;
            d.task_id = t.at("task_id").get<std::size_t>();
            d.source = t.at("source").get<std::string>();
            d.group = t.at("group").get<std::string>();
            d.train = examples_from_json(t.at("train"));
            d.val = examples_from_json(t.at("val"));
            d.test = examples_from_json(t.at("test"));
            tasks.push_back(std::move(d));
        }
        return tasks;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("malformed cache " + path.string() + ": " + e.what(), 0);
    }
}

std::vector<EcgRow> read_ecg_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read ECG CSV " + path.string());
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw ParseError("ECG CSV: missing header", 1);
    ++lineno;
    const auto header = split_csv(trim(line));
    if (header.size() != kEcgSamples + 2 || header.front() != "record" || header.back() != "label" || header[1] != "s0" ||
        header[kEcgSamples] != "s255")
        throw ParseError("ECG CSV: header must be record,s0,...,s255,label", lineno);
    std::vector<EcgRow> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split_csv(trim(line));
        if (cells.size() != kEcgSamples + 2)
            throw ParseError("ECG CSV: expected " + std::to_string(kEcgSamples + 2) + " fields, got " +
                                 std::to_string(cells.size()),
                             lineno);
        EcgRow r;
        r.record = cells.front();
        if (r.record.empty()) throw ParseError("ECG CSV: empty record id", lineno);
        r.window.reserve(kEcgSamples);
        for (std::size_t i = 1; i <= kEcgSamples; ++i) r.window.push_back(parse_double(cells[i], lineno));
        if (cells.back() == "0")
            r.label = 0;
        else if (cells.back() == "1")
            r.label = 1;
        else
            throw ParseError("ECG CSV: label must be 0 or 1, got '" + cells.back() + "'", lineno);
        r.line = lineno;
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<TaskDataset> load_ecg(const std::filesystem::path& path, const EcgOptions& options) {
    const auto rows = read_ecg_csv(path);
    std::vector<std::string> records;
    for (const auto& r : rows) records.push_back(r.record);
    std::sort(records.begin(), records.end());
    records.erase(std::unique(records.begin(), records.end()), records.end());

    std::vector<std::vector<std::string>> groups = options.groups;
    if (groups.empty()) {
        if (records.size() < options.tasks)
            throw ConfigError("ECG CSV has " + std::to_string(records.size()) + " records, need at least " +
                              std::to_string(options.tasks));
        groups.resize(options.tasks);
        for (std::size_t i = 0; i < records.size(); ++i) groups[i * options.tasks / records.size()].push_back(records[i]);
    }
    std::map<std::string, std::size_t> task_of;
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (const auto& rec : groups[g]) task_of[rec] = g;

    std::vector<TaskDataset> tasks;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        std::vector<Example> all;
        std::vector<int> labels;
        for (const auto& r : rows) {
            const auto it = task_of.find(r.record);
            if (it == task_of.end() || it->second != g) continue;
            all.push_back(Example{r.window, r.label, static_cast<std::int64_t>(r.line)});
            labels.push_back(r.label);
        }
        std::string name;
        for (const auto& rec : groups[g]) name += (name.empty() ? "" : "+") + rec;
        const bool has0 = std::count(labels.begin(), labels.end(), 0) > 0;
        const bool has1 = std::count(labels.begin(), labels.end(), 1) > 0;
        if (!has0 || !has1)
            throw DomainError("ECG task " + std::to_string(g) + " (records " + name + ") has " +
                              std::to_string(all.size()) + " beats of a single class; each task needs both N and V beats");

        Rng rng = make_rng(options.seed, {stream::kData, g});
        std::vector<std::size_t> pool(all.size()), test, val;
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        stratified_take(pool, labels, 0.20, rng, test);
        stratified_take(pool, labels, 0.15, rng, val);

        TaskDataset task;
        task.task_id = g;
        task.source = "ecg";
        task.group = name;
        for (std::size_t i : pool) task.train.push_back(all[i]);
        for (std::size_t i : val) task.val.push_back(all[i]);
        for (std::size_t i : test) task.test.push_back(all[i]);
        const FeatureScaler scaler = fit_zscore_scaler(task.train);
        scaler.apply(task.train);
        scaler.apply(task.val);
        scaler.apply(task.test);
        tasks.push_back(std::move(task));
    }
    return tasks;
}

TaskDataset gaussian_blobs(std::size_t n, std::size_t dim, double separation, std::uint64_t seed, std::size_t task_id) {
    Rng rng = make_rng(seed, {stream::kData, task_id});
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> dir(dim);
    double nn = 0.0;
    for (double& v : dir) {
        v = g(rng);
        nn += v * v;
    }
    for (double& v : dir) v /= std::sqrt(nn);
    std::vector<Example> all(n);
    for (std::size_t i = 0; i < n; ++i) {
        all[i].y = static_cast<int>(i % 2);
        all[i].t = static_cast<std::int64_t>(i);
        all[i].x.resize(dim);
        const double sign = all[i].y ? 0.5 : -0.5;
        for (std::size_t f = 0; f < dim; ++f) all[i].x[f] = sign * separation * dir[f] + g(rng);
    }
    std::shuffle(all.begin(), all.end(), rng);
    TaskDataset t;
    t.task_id = task_id;
    t.source = "synthetic";
    t.group = "blobs";
    const std::size_t n_train = n * 7 / 10, n_val = n * 15 / 100;
    t.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
    t.val.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train), all.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    t.test.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), all.end());
    return t;
}

} // namespace clqas::data
