#include "clqas/runner.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <thread>

#include "clqas/datasets.hpp"
#include "clqas/errors.hpp"

namespace clqas::runner {

std::vector<TaskDataset> load_tasks(const config::RunConfig& cfg) {
    std::vector<TaskDataset> tasks;
    if (cfg.dataset == "financial") {
        tasks = cfg.data_path.empty() ? data::gen_financial(cfg.data_seed) : data::load_task_cache(cfg.data_path);
    } else if (cfg.dataset == "ecg") {
        data::EcgOptions opts;
        opts.seed = cfg.data_seed;
        opts.tasks = cfg.tasks;
        tasks = data::load_ecg(cfg.data_path, opts);
    } else {
        const std::size_t dim = tt::TTLinear(cfg.harness.encoder.input_modes, cfg.harness.encoder.output_modes,
                                             cfg.harness.encoder.ranks)
                                    .input_dim();
        for (std::size_t t = 0; t < cfg.tasks; ++t) tasks.push_back(data::gaussian_blobs(400, dim, 3.0, cfg.data_seed, t));
    }
    if (tasks.size() < cfg.tasks)
        throw ConfigError("key 'data.tasks': " + std::to_string(cfg.tasks) + " requested but the dataset has " +
                          std::to_string(tasks.size()));
    tasks.resize(cfg.tasks);
    return tasks;
}

BenchmarkOutcome run_benchmark(const config::RunConfig& cfg, const std::atomic<bool>* stop,
                               const std::function<void(const std::string&)>& log) {
    cfg.validate();
    const auto tasks = load_tasks(cfg);
    auto hcfg = cfg.harness_config();
    hcfg.stop = stop;

    struct Job {
        harness::Method method;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (auto m : cfg.methods)
        for (auto s : cfg.seeds) jobs.push_back({m, s});

    BenchmarkOutcome out;
    out.files.resize(jobs.size());
    std::vector<std::string> texts(jobs.size());
    std::vector<char> partial(jobs.size(), 0);
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    std::exception_ptr failure;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            try {
                const auto start = std::chrono::steady_clock::now();
                const auto run = harness::run_sequence(tasks, jobs[i].method, hcfg, cfg.run_seed(jobs[i].seed));
                out.files[i] = results::write_run(cfg.out, run, cfg, jobs[i].seed);
                texts[i] = results::serialize_run(run, cfg, jobs[i].seed);
                partial[i] = run.partial;
                const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                if (log) {
                    char buf[160];
                    std::snprintf(buf, sizeof buf, "%s seed %llu: %zu/%zu tasks in %.1fs%s",
                                  harness::to_string(jobs[i].method).c_str(),
                                  static_cast<unsigned long long>(jobs[i].seed), run.tasks.size(), tasks.size(), secs,
                                  run.partial ? " (partial)" : "");
                    const std::lock_guard lock(log_mutex);
                    log(buf);
                }
            } catch (...) {
                const std::lock_guard lock(log_mutex);
                if (!failure) failure = std::current_exception();
                next = jobs.size();
                return;
            }
        }
    };

    const std::size_t n_threads = std::max<std::size_t>(1, std::min(cfg.jobs, jobs.size()));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    for (std::size_t i = 0; i < jobs.size(); ++i) {
        out.runs.push_back(results::parse_run(texts[i], out.files[i].string()));
        out.partial = out.partial || partial[i];
    }
    const auto report = results::build_report(out.runs);
    std::ofstream(cfg.out / "report.csv", std::ios::binary) << results::render_csv(report);
    std::ofstream(cfg.out / "report.txt", std::ios::binary) << results::render_text(report);
    return out;
}

} // namespace clqas::runner
