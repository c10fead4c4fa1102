#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>

#include "clqas/datasets.hpp"
#include "clqas/errors.hpp"
#include "clqas/rng.hpp"
#include "support/data_oracles.hpp"

using namespace clqas;
using namespace clqas::data;
using Catch::Matchers::WithinAbs;
using namespace clqas::testing;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() / ("clqas_test_" + std::to_string(Rng(std::random_device{}())()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

} // namespace

TEST_CASE("indicators match straightforward per-definition loops", "[datasets]") {
    const auto p = random_walk(140, 7);
    const auto table = indicators(p);
    REQUIRE(table.first_index == kWarmup);
    REQUIRE(table.rows.size() == p.size() - kWarmup);
    double worst = 0.0;
    for (std::size_t t = kWarmup; t < p.size(); ++t) {
        const auto want = oracle_row(p, t);
        const auto& got = table.rows[t - kWarmup];
        for (std::size_t c = 0; c < kChannels; ++c) worst = std::max(worst, std::abs(got[c] - want[c]));
    }
    CHECK(worst < 1e-10);
    CHECK(table.degenerate_rows == 0);
}

TEST_CASE("constant prices give zero indicators and flag the 0/0 rows", "[datasets]") {
    const std::vector<double> p(60, 42.0);
    const auto table = indicators(p);
    for (const auto& row : table.rows)
        for (double v : row) CHECK(v == 0.0);
    CHECK(table.degenerate_rows == table.rows.size());
}

TEST_CASE("strictly increasing prices saturate RSI at +1", "[datasets]") {
    std::vector<double> p;
    for (int i = 0; i < 80; ++i) p.push_back(100.0 + i);
    const auto table = indicators(p);
    for (const auto& row : table.rows) {
        CHECK(row[0] > 0.0);
        CHECK(row[3] == 1.0);
        CHECK(row[6] == 10.0);
        CHECK(row[4] > 0.0);
    }
}

TEST_CASE("indicators reject series shorter than the warm-up", "[datasets]") {
    CHECK_THROWS_AS(indicators(std::vector<double>(kWarmup, 1.0)), DomainError);
    CHECK_NOTHROW(indicators(std::vector<double>(kWarmup + 1, 1.0)));
}

TEST_CASE("price simulator follows the regime schedule", "[datasets]") {
    const FinancialParams params;
    const auto s = simulate_prices(3, params);
    REQUIRE(s.prices.size() == 6000);
    CHECK(s.prices.front() == 100.0);
    CHECK(s.regime[999] == 0);
    CHECK(s.regime[1000] == 1);
    CHECK(s.regime[5999] == 5);
    for (double v : s.prices) CHECK(std::isfinite(v));
    CHECK(regime_drift(params, 0) == -0.001);
    CHECK(regime_drift(params, 4) == 0.0);
    CHECK(regime_vol(params, 1) == 0.005);
    CHECK(regime_vol(params, 2) == 0.01);
    CHECK(regime_vol(params, 5) == 0.02);

    // Per-regime sample std of increments tracks vol / sqrt(1 - ar^2).
    for (std::size_t r = 0; r < 6; ++r) {
        std::vector<double> d;
        for (std::size_t t = r * 1000 + 1; t < (r + 1) * 1000; ++t) d.push_back(std::log(s.prices[t] / s.prices[t - 1]));
        const double want = regime_vol(params, r) / std::sqrt(1.0 - 0.04);
        CHECK(std::abs(pop_std(d) / want - 1.0) < 0.1);
    }
}

TEST_CASE("financial tasks: sizes, dimension, chronology, finiteness", "[datasets]") {
    const auto tasks = gen_financial(11);
    REQUIRE(tasks.size() == 8);
    std::int64_t prev_end = -1;
    for (const auto& task : tasks) {
        CHECK(task.train.size() == 592);
        CHECK(task.val.size() == 74);
        CHECK(task.test.size() == 75);
        CHECK(task.source == "financial");
        CHECK(task.feature_dim() == 256);
        for (const auto* split : {&task.train, &task.val, &task.test})
            for (const auto& e : *split) {
                REQUIRE(e.x.size() == 256);
                for (double v : e.x) REQUIRE(std::isfinite(v));
                CHECK((e.y == 0 || e.y == 1));
            }
        CHECK(task.train.back().t < task.val.front().t);
        CHECK(task.val.back().t < task.test.front().t);
        CHECK(task.train.front().t > prev_end);
        prev_end = task.test.back().t;
    }
    CHECK(tasks.front().train.front().t == 70);
}

TEST_CASE("financial labels are next-step direction and features are time-major windows", "[datasets]") {
    const FinancialParams params;
    const auto series = simulate_prices(5, params);
    const auto tasks = build_financial_tasks(series, params);
    const auto table = indicators(series.prices);
    for (const auto& task : tasks)
        for (const auto& e : task.test) {
            const auto t = static_cast<std::size_t>(e.t);
            CHECK(e.y == (series.prices[t + 1] > series.prices[t] ? 1 : 0));
        }

    // Undo the train-fitted robust scaling on task 2 and compare with the raw indicator rows.
    const auto& task = tasks[2];
    std::vector<Example> raw;
    for (const auto& e : task.train) {
        Example r = e;
        const auto t = static_cast<std::size_t>(e.t);
        for (std::size_t k = 0; k < kWindow; ++k)
            for (std::size_t c = 0; c < kChannels; ++c) r.x[k * kChannels + c] = table.rows[t - kWindow + 1 + k - kWarmup][c];
        raw.push_back(r);
    }
    const auto scaler = fit_robust_scaler(raw);
    auto scaled = raw;
    scaler.apply(scaled);
    double worst = 0.0;
    for (std::size_t i = 0; i < scaled.size(); ++i)
        for (std::size_t f = 0; f < 256; ++f) worst = std::max(worst, std::abs(scaled[i].x[f] - task.train[i].x[f]));
    CHECK(worst == 0.0);
}

TEST_CASE("gen_financial is a pure function of the seed", "[datasets]") {
    const auto a = gen_financial(21), b = gen_financial(21), c = gen_financial(22);
    bool same = true, differs = false;
    for (std::size_t m = 0; m < a.size(); ++m) {
        for (std::size_t i = 0; i < a[m].train.size(); ++i) {
            same &= a[m].train[i].x == b[m].train[i].x && a[m].train[i].y == b[m].train[i].y;
            differs |= a[m].train[i].x != c[m].train[i].x;
        }
        for (std::size_t i = 0; i < a[m].test.size(); ++i) same &= a[m].test[i].x == b[m].test[i].x;
    }
    CHECK(same);
    CHECK(differs);
}

TEST_CASE("perturbing held-out prices leaves train rows and scaling bit-identical", "[datasets]") {
    const FinancialParams params;
    const auto series = simulate_prices(9, params);
    const auto base = build_financial_tasks(series, params);
    const std::size_t m = 3;
    // Train labels read price[t+1] up to the first validation step; everything after is held out.
    const auto cut = static_cast<std::size_t>(base[m].val.front().t) + 1;
    const auto end = static_cast<std::size_t>(base[m].test.back().t) + 1;
    auto perturbed = series;
    Rng rng(4);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    for (std::size_t t = cut; t <= end; ++t) perturbed.prices[t] *= u(rng);
    const auto moved = build_financial_tasks(perturbed, params);

    bool train_same = true;
    for (std::size_t i = 0; i < base[m].train.size(); ++i)
        train_same &= base[m].train[i].x == moved[m].train[i].x && base[m].train[i].y == moved[m].train[i].y;
    CHECK(train_same);
    bool test_changed = false;
    for (std::size_t i = 0; i < base[m].test.size(); ++i) test_changed |= base[m].test[i].x != moved[m].test[i].x;
    CHECK(test_changed);
    for (std::size_t k = 0; k < m; ++k) CHECK(base[k].test.back().x == moved[k].test.back().x);
}

TEST_CASE("robust scaler uses median and IQR, zero IQR maps to 1", "[datasets]") {
    std::vector<Example> xs;
    for (double v : {1.0, 2.0, 3.0, 4.0, 100.0}) xs.push_back(Example{{v, 7.0}, 0});
    const auto s = fit_robust_scaler(xs);
    CHECK(s.center[0] == 3.0);
    CHECK(s.scale[0] == 2.0);
    CHECK(s.center[1] == 7.0);
    CHECK(s.scale[1] == 1.0);
    CHECK_THAT(quantile({4.0, 1.0, 3.0, 2.0}, 0.25), WithinAbs(1.75, 1e-15));
    CHECK_THROWS_AS(quantile({}, 0.5), DomainError);
}

TEST_CASE("z-score scaler fit on train gives zero mean, unit population std", "[datasets]") {
    const auto blobs = gaussian_blobs(200, 4, 3.0, 1);
    auto train = blobs.train;
    const auto s = fit_zscore_scaler(train);
    s.apply(train);
    for (std::size_t f = 0; f < 4; ++f) {
        std::vector<double> col;
        for (const auto& e : train) col.push_back(e.x[f]);
        CHECK_THAT(mean_of(col), WithinAbs(0.0, 1e-12));
        CHECK_THAT(pop_std(col), WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("label balance stays in [0.3, 0.7] on seeds 1..5", "[datasets]") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed)
        for (const auto& task : gen_financial(seed)) {
            INFO("seed " << seed << " task " << task.task_id);
            const double b = label_balance(task);
            CHECK(b >= 0.3);
            CHECK(b <= 0.7);
        }
}

TEST_CASE("task cache round-trips bit-identically", "[datasets]") {
    TempDir dir;
    const auto tasks = gen_financial(2);
    save_task_cache(dir.path / "fin.json", 2, tasks);
    std::uint64_t seed = 0;
    const auto back = load_task_cache(dir.path / "fin.json", &seed);
    CHECK(seed == 2);
    REQUIRE(back.size() == tasks.size());
    bool same = true;
    for (std::size_t m = 0; m < tasks.size(); ++m) {
        same &= back[m].group == tasks[m].group && back[m].train.size() == tasks[m].train.size();
        for (std::size_t i = 0; i < tasks[m].val.size(); ++i)
            same &= back[m].val[i].x == tasks[m].val[i].x && back[m].val[i].t == tasks[m].val[i].t;
    }
    CHECK(same);

    std::ofstream(dir.path / "bad.json") << "{\"format\": 3";
    CHECK_THROWS_AS(load_task_cache(dir.path / "bad.json"), ParseError);
}

TEST_CASE("ECG: 1000 beats per task split 680/120/200 with stratification", "[datasets][ecg]") {
    TempDir dir;
    const auto path = write_ecg(dir.path, 1000, 100);
    const auto tasks = load_ecg(path, EcgOptions{.seed = 3});
    REQUIRE(tasks.size() == 8);
    for (const auto& task : tasks) {
        CHECK(task.source == "ecg");
        CHECK(task.feature_dim() == 256);
        CHECK(std::abs(static_cast<long>(task.train.size()) - 680) <= 1);
        CHECK(std::abs(static_cast<long>(task.val.size()) - 120) <= 1);
        CHECK(std::abs(static_cast<long>(task.test.size()) - 200) <= 1);
        // Overall ratio 10% V: test holds 20 +/- 1 V beats.
        const double want_v = 0.1 * static_cast<double>(task.test.size());
        CHECK(std::abs(static_cast<double>(count_label(task.test, 1)) - want_v) <= 1.0);
        CHECK(std::abs(static_cast<double>(count_label(task.test, 0)) - 0.9 * task.test.size()) <= 1.0);

        std::set<std::int64_t> seen;
        for (const auto* split : {&task.train, &task.val, &task.test})
            for (const auto& e : *split) CHECK(seen.insert(e.t).second);
        CHECK(seen.size() == 1000);
    }
    CHECK(tasks[0].group == "rec100");
    CHECK(tasks[7].group == "rec107");
}

TEST_CASE("ECG: fixed seed gives identical split membership", "[datasets][ecg]") {
    TempDir dir;
    const auto path = write_ecg(dir.path, 200, 20);
    const auto a = load_ecg(path, EcgOptions{.seed = 8});
    const auto b = load_ecg(path, EcgOptions{.seed = 8});
    const auto c = load_ecg(path, EcgOptions{.seed = 9});
    auto ids = [](const std::vector<Example>& xs) {
        std::vector<std::int64_t> v;
        for (const auto& e : xs) v.push_back(e.t);
        return v;
    };
    bool any_diff = false;
    for (std::size_t m = 0; m < 8; ++m) {
        CHECK(ids(a[m].test) == ids(b[m].test));
        CHECK(ids(a[m].val) == ids(b[m].val));
        any_diff |= ids(a[m].test) != ids(c[m].test);
    }
    CHECK(any_diff);
}

TEST_CASE("ECG: normalization is fit on train only", "[datasets][ecg]") {
    TempDir dir;
    const auto path = write_ecg(dir.path, 200, 20);
    const auto tasks = load_ecg(path, EcgOptions{.seed = 1});
    for (const auto& task : tasks) {
        std::vector<double> col;
        for (const auto& e : task.train) col.push_back(e.x[5]);
        CHECK_THAT(mean_of(col), WithinAbs(0.0, 1e-12));
    }

    // Rewrite the test beats of task 0 with wild values: its train rows must not move.
    const auto rows = read_ecg_csv(path);
    std::set<std::int64_t> test_lines;
    for (const auto& e : tasks[0].test) test_lines.insert(e.t);
    std::ofstream out(dir.path / "perturbed.csv");
    write_header(out);
    for (const auto& r : rows) {
        if (test_lines.count(static_cast<std::int64_t>(r.line))) {
            write_beat(out, r.record, r.label, 1e3);
            continue;
        }
        out << r.record;
        for (double v : r.window) out << ',' << std::setprecision(17) << v;
        out << ',' << r.label << '\n';
    }
    out.close();
    const auto moved = load_ecg(dir.path / "perturbed.csv", EcgOptions{.seed = 1});
    bool same = true;
    for (std::size_t i = 0; i < tasks[0].train.size(); ++i) same &= tasks[0].train[i].x == moved[0].train[i].x;
    CHECK(same);
}

TEST_CASE("ECG: explicit record groups", "[datasets][ecg]") {
    TempDir dir;
    const auto path = write_ecg(dir.path, 100, 10);
    EcgOptions opts;
    opts.groups = {{"rec100", "rec101"}, {"rec102", "rec103", "rec104"}};
    const auto tasks = load_ecg(path, opts);
    REQUIRE(tasks.size() == 2);
    CHECK(tasks[0].group == "rec100+rec101");
    CHECK(tasks[0].train.size() + tasks[0].val.size() + tasks[0].test.size() == 200);
    CHECK(tasks[1].train.size() + tasks[1].val.size() + tasks[1].test.size() == 300);
}

TEST_CASE("ECG: malformed rows report their line number", "[datasets][ecg]") {
    TempDir dir;
    auto expect_line = [&](const std::string& bad, std::size_t line) {
        const auto path = dir.path / "bad.csv";
        std::ofstream out(path);
        write_header(out);
        write_beat(out, "r1", 0, 0.0);
        write_beat(out, "r1", 1, 0.0);
        out << bad << '\n';
        out.close();
        try {
            read_ecg_csv(path);
            FAIL("no ParseError for: " << bad.substr(0, 40));
        } catch (const ParseError& e) {
            CHECK(e.line() == line);
        }
    };
    expect_line("r1,1,2,3,0", 4);
    std::string row = "r1";
    for (int i = 0; i < 256; ++i) row += ",0.5";
    expect_line(row + ",2", 4);
    std::string nan_row = "r1,abc";
    for (int i = 1; i < 256; ++i) nan_row += ",0.5";
    expect_line(nan_row + ",0", 4);

    std::ofstream(dir.path / "hdr.csv") << "id,s0,label\n";
    try {
        read_ecg_csv(dir.path / "hdr.csv");
        FAIL("bad header accepted");
    } catch (const ParseError& e) {
        CHECK(e.line() == 1);
    }
}

TEST_CASE("ECG: a single-class task is rejected", "[datasets][ecg]") {
    TempDir dir;
    const auto path = dir.path / "mono.csv";
    {
        std::ofstream out(path);
        write_header(out);
        for (int r = 0; r < 8; ++r)
            for (int b = 0; b < 20; ++b) write_beat(out, "rec" + std::to_string(r), r == 5 ? 0 : b % 4 == 0, 0.1 * b);
    }
    try {
        load_ecg(path);
        FAIL("single-class task accepted");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("rec5") != std::string::npos);
    }
    CHECK_THROWS_AS(load_ecg(path, EcgOptions{.tasks = 9}), ConfigError);
}

TEST_CASE("Gaussian blobs are balanced and seeded", "[datasets]") {
    const auto a = gaussian_blobs(200, 6, 4.0, 5), b = gaussian_blobs(200, 6, 4.0, 5);
    CHECK(a.train.size() == 140);
    CHECK(a.val.size() == 30);
    CHECK(a.test.size() == 30);
    CHECK(a.train[0].x == b.train[0].x);
    CHECK(count_label(a.train, 1) + count_label(a.val, 1) + count_label(a.test, 1) == 100);
}
