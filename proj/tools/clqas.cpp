// clqas: benchmark runner, report builder, theory checks and dataset utilities.

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "clqas/datasets.hpp"
#include "clqas/errors.hpp"
#include "clqas/results.hpp"
#include "clqas/run_config.hpp"
#include "clqas/runner.hpp"
#include "clqas/theory_checks.hpp"

namespace {

enum Exit { kOk = 0, kFailure = 1, kUsage = 2, kInterrupted = 3 };

std::atomic<bool> g_stop{false};

extern "C" void on_sigint(int) { g_stop = true; }

std::string join(const std::vector<std::string>& items, const std::string& sep) {
    std::string s;
    for (const auto& i : items) s += (s.empty() ? "" : sep) + i;
    return s;
}

struct RunArgs {
    std::string config;
    std::vector<std::string> methods;
    std::string dataset;
    std::string seeds;
    std::size_t jobs = 0;
    std::string out;
    std::vector<std::string> sets;
};

clqas::config::RunConfig resolve_config(const RunArgs& a) {
    using namespace clqas;
    config::RunConfig cfg = a.config.empty() ? config::RunConfig{} : config::load_config(a.config);
    if (!a.methods.empty()) {
        std::vector<std::string> quoted;
        for (const auto& m : a.methods) {
            std::stringstream ss(m);
            std::string part;
            while (std::getline(ss, part, ',')) {
                harness::method_from_string(part);
                quoted.push_back("\"" + part + "\"");
            }
        }
        config::set_key(cfg, "run.methods", "[" + join(quoted, ",") + "]");
    }
    if (!a.dataset.empty()) config::set_key(cfg, "run.dataset", "\"" + a.dataset + "\"");
    if (!a.seeds.empty()) config::set_key(cfg, "run.seeds", "[" + a.seeds + "]");
    if (a.jobs) cfg.jobs = a.jobs;
    if (!a.out.empty()) cfg.out = a.out;
    for (const auto& kv : a.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        config::set_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (const char* env = std::getenv("CLQAS_SEED")) config::set_key(cfg, "run.master_seed", env);
    cfg.validate();
    return cfg;
}

int cmd_run(const RunArgs& a, bool print_config) {
    using namespace clqas;
    const auto cfg = resolve_config(a);
    if (print_config) {
        std::cout << config::resolved_text(cfg);
        return kOk;
    }
    std::signal(SIGINT, on_sigint);
    std::cerr << "config " << config::hash_hex(config::config_hash(cfg)) << ", " << cfg.methods.size()
              << " method(s) x " << cfg.seeds.size() << " seed(s), results in " << cfg.out.string() << "\n";
    const auto outcome = runner::run_benchmark(cfg, &g_stop, [](const std::string& line) { std::cerr << line << "\n"; });
    std::cout << results::render_text(results::build_report(outcome.runs));
    if (outcome.partial) {
        std::cerr << "interrupted: partial results flagged in " << cfg.out.string() << "\n";
        return kInterrupted;
    }
    return kOk;
}

int cmd_report(const std::string& dir, bool allow_mixed, bool csv) {
    using namespace clqas;
    const auto rep = results::build_report(results::load_dir(dir), allow_mixed);
    std::cout << (csv ? results::render_csv(rep) : results::render_text(rep));
    return kOk;
}

int cmd_theory(const std::string& suite, std::size_t trajectories, std::uint64_t seed) {
    using namespace clqas::theory;
    SuiteResult res;
    if (suite == "tt")
        res = tt_suite(seed);
    else if (suite == "noise")
        res = noise_suite(seed, trajectories);
    else if (suite == "gradient")
        res = gradient_suite(seed);
    else
        res = robustness_suite(default_robustness_options(seed));
    std::cout << res.render();
    return res.passed() ? kOk : kFailure;
}

int cmd_gen_financial(std::uint64_t seed, const std::string& out) {
    const auto tasks = clqas::data::gen_financial(seed);
    clqas::data::save_task_cache(out, seed, tasks);
    for (const auto& t : tasks)
        std::cout << "task " << t.task_id << " " << t.group << ": " << t.train.size() << "/" << t.val.size() << "/"
                  << t.test.size() << ", label balance " << clqas::data::label_balance(t) << "\n";
    std::cout << "wrote " << out << "\n";
    return kOk;
}

int cmd_check_ecg(const std::string& path, std::size_t tasks, std::uint64_t seed) {
    clqas::data::EcgOptions opts;
    opts.tasks = tasks;
    opts.seed = seed;
    const auto ts = clqas::data::load_ecg(path, opts);
    for (const auto& t : ts)
        std::cout << "task " << t.task_id << " records " << t.group << ": " << t.train.size() << "/" << t.val.size()
                  << "/" << t.test.size() << ", dim " << t.feature_dim() << ", label balance "
                  << clqas::data::label_balance(t) << "\n";
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continual quantum architecture search benchmark"};
    app.require_subcommand(1);

    RunArgs run_args;
    bool print_config = false;
    auto* run = app.add_subcommand("run", "Run every (method, seed) pair and write results");
    run->add_option("--config", run_args.config, "Config file")->check(CLI::ExistingFile);
    run->add_option("--method", run_args.methods, "naive_vqc, qas_no_cl or cl_qas (repeatable, comma lists allowed)");
    run->add_option("--dataset", run_args.dataset, "financial, ecg or blobs");
    run->add_option("--seeds", run_args.seeds, "Comma-separated seeds, e.g. 1,2,3");
    run->add_option("--jobs", run_args.jobs, "Worker threads");
    run->add_option("--out", run_args.out, "Result directory");
    run->add_option("--set", run_args.sets, "Override one config key, key=value (repeatable)");
    run->add_flag("--print-config", print_config, "Print the resolved config and exit");

    std::string report_dir;
    bool allow_mixed = false, csv = false;
    auto* report = app.add_subcommand("report", "Aggregate a result directory into tables");
    report->add_option("dir", report_dir, "Result directory")->required();
    report->add_flag("--allow-mixed", allow_mixed, "Aggregate runs with different config hashes");
    report->add_flag("--csv", csv, "CSV instead of aligned text");

    std::string suite;
    std::size_t trajectories = 100000;
    std::uint64_t check_seed = 1;
    auto* theory = app.add_subcommand("theory-check", "Property suites: tt, noise, gradient, robustness");
    theory->add_option("suite", suite, "Suite name")->required()->check(CLI::IsMember({"tt", "noise", "gradient", "robustness"}));
    theory->add_option("--trajectories", trajectories, "Monte Carlo trajectories (noise suite)")->check(CLI::PositiveNumber);
    theory->add_option("--seed", check_seed, "Seed");

    auto* datasets = app.add_subcommand("datasets", "Dataset utilities");
    datasets->require_subcommand(1);
    std::uint64_t gen_seed = 1;
    std::string gen_out;
    auto* gen = datasets->add_subcommand("gen-financial", "Generate the synthetic financial tasks into a cache file");
    gen->add_option("--seed", gen_seed, "Data seed");
    gen->add_option("--out", gen_out, "Output file")->required();
    std::string ecg_path;
    std::size_t ecg_tasks = 8;
    std::uint64_t ecg_seed = 1;
    auto* ecg = datasets->add_subcommand("check-ecg", "Validate an ECG beat CSV and print the task splits");
    ecg->add_option("path", ecg_path, "CSV file")->required();
    ecg->add_option("--tasks", ecg_tasks, "Number of tasks");
    ecg->add_option("--seed", ecg_seed, "Split seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*run) return cmd_run(run_args, print_config);
        if (*report) return cmd_report(report_dir, allow_mixed, csv);
        if (*theory) return cmd_theory(suite, trajectories, check_seed);
        if (*gen) return cmd_gen_financial(gen_seed, gen_out);
        if (*ecg) return cmd_check_ecg(ecg_path, ecg_tasks, ecg_seed);
    } catch (const clqas::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kUsage;
    } catch (const clqas::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kUsage;
}
