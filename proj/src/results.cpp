#include "clqas/results.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "clqas/errors.hpp"

namespace clqas::results {

namespace {

using ojson = nlohmann::ordered_json;

constexpr const char* kFormat = "clqas-run-1";

ojson metrics_json(const metrics::ClassMetrics& m) {
    return ojson{{"acc", m.acc}, {"bacc", m.bacc}, {"f1", m.f1}, {"class_absent", m.class_absent},
                 {"f1_undefined", m.f1_undefined}};
}

ojson audit_json(const harness::AuditRow& a) {
    return ojson{{"p1", a.noise.p1},
                 {"p2", a.noise.p2},
                 {"pr", a.noise.pr},
                 {"clean_loss", a.clean_loss},
                 {"noisy_loss", a.noisy_loss},
                 {"clean_reward", a.clean_reward},
                 {"noisy_reward", a.noisy_reward},
                 {"alpha", a.alpha},
                 {"delta_hat", a.delta_hat},
                 {"eps_c_hat", a.eps_c_hat},
                 {"c_pi_hat", a.c_pi_hat},
                 {"mean_z_norm", a.mean_z_norm},
                 {"lhs", a.lhs},
                 {"rhs", a.rhs},
                 {"lemma5_bound", a.lemma5_bound},
                 {"holds", a.holds()}};
}

ojson task_json(const harness::TaskRecord& t) {
    ojson cands = ojson::array();
    for (const auto& c : t.candidates)
        cands.push_back(ojson{{"round", c.round},
                              {"arch", c.arch},
                              {"val_accuracy", c.val_accuracy},
                              {"n_cnot", c.n_cnot},
                              {"reward", c.reward},
                              {"logprob", c.logprob}});
    ojson steps = ojson::array();
    for (const auto& s : t.policy_steps)
        steps.push_back(ojson{{"j_hat", s.j_hat}, {"ewc", s.ewc}, {"kl", s.kl}, {"loss", s.loss}, {"grad_norm", s.grad_norm}});
    const auto& d = t.diag;
    ojson diag{{"grad_norm_sq", d.grad_norm_sq},
               {"grad_norm_sq_max", d.grad_norm_sq_max},
               {"curvature", d.curvature},
               {"eps_tt", d.eps_tt},
               {"rho", d.rho},
               {"fidelity_bound", d.fidelity_bound},
               {"alpha", d.alpha},
               {"audit", d.audit ? audit_json(*d.audit) : ojson(nullptr)}};
    return ojson{{"task_id", t.task_id},
                 {"group", t.group},
                 {"arch", t.arch.to_tokens()},
                 {"n_cnot", t.arch.cnot_count()},
                 {"test", metrics_json(t.test)},
                 {"val_accuracy", t.val_accuracy},
                 {"reward", t.reward ? ojson(*t.reward) : ojson(nullptr)},
                 {"vqc_loss", t.vqc_loss},
                 {"policy_loss", t.policy_loss},
                 {"total_loss", t.total_loss},
                 {"candidates", cands},
                 {"policy_steps", steps},
                 {"diagnostics", diag}};
}

std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string lpad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

} // namespace

std::string run_file_name(harness::Method method, std::uint64_t listed_seed) {
    return harness::to_string(method) + "_seed" + std::to_string(listed_seed) + ".json";
}

std::string serialize_run(const harness::RunRecord& run, const config::RunConfig& cfg, std::uint64_t listed_seed) {
    ojson resolved = ojson::object();
    // run.out and run.jobs are left out.
    for (const auto& [k, v] : config::resolved_entries(cfg))
        if (k != "run.out" && k != "run.jobs") resolved[k] = ojson::parse(v);
    ojson tasks = ojson::array();
    for (const auto& t : run.tasks) tasks.push_back(task_json(t));
    ojson transfer = nullptr;
    if (run.transfer)
        transfer = ojson{{"bwt", run.transfer->bwt},
                         {"fwt", run.transfer->fwt},
                         {"forgetting", run.transfer->forgetting},
                         {"per_task_forgetting", run.transfer->per_task_forgetting}};
    const ojson j{{"format", kFormat},
                  {"method", harness::to_string(run.method)},
                  {"dataset", cfg.dataset},
                  {"seed", listed_seed},
                  {"run_seed", run.seed},
                  {"config_hash", config::hash_hex(config::config_hash(cfg))},
                  {"partial", run.partial},
                  {"tasks", tasks},
                  {"accuracy_matrix", run.r},
                  {"transfer", transfer},
                  {"config", resolved}};
    return j.dump(2) + "\n";
}

std::filesystem::path write_run(const std::filesystem::path& dir, const harness::RunRecord& run,
                                const config::RunConfig& cfg, std::uint64_t listed_seed) {
    std::filesystem::create_directories(dir);
    const auto path = dir / run_file_name(run.method, listed_seed);
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw ConfigError("cannot write " + tmp);
        out << serialize_run(run, cfg, listed_seed);
    }
    std::filesystem::rename(tmp, path);
    return path;
}

StoredRun parse_run(const std::string& text, const std::string& source) {
    try {
        const auto j = ojson::parse(text);
        if (j.at("format") != kFormat) throw ParseError(source + ": not a clqas run file", 0);
        StoredRun r;
        r.source = source;
        r.method = j.at("method").get<std::string>();
        r.dataset = j.at("dataset").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.config_hash = j.at("config_hash").get<std::string>();
        r.partial = j.at("partial").get<bool>();
        for (const auto& t : j.at("tasks")) {
            TaskRow row;
            row.task_id = t.at("task_id").get<std::size_t>();
            row.group = t.at("group").get<std::string>();
            row.arch = t.at("arch").get<std::string>();
            row.acc = t.at("test").at("acc").get<double>();
            row.bacc = t.at("test").at("bacc").get<double>();
            row.f1 = t.at("test").at("f1").get<double>();
            if (!t.at("reward").is_null()) row.rwd = t.at("reward").get<double>();
            r.tasks.push_back(std::move(row));
        }
        r.r = j.at("accuracy_matrix").get<metrics::AccuracyMatrix>();
        if (!j.at("transfer").is_null()) {
            metrics::TransferMetrics t;
            t.bwt = j["transfer"].at("bwt").get<double>();
            t.fwt = j["transfer"].at("fwt").get<double>();
            t.forgetting = j["transfer"].at("forgetting").get<double>();
            t.per_task_forgetting = j["transfer"].at("per_task_forgetting").get<std::vector<double>>();
            r.transfer = t;
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(source + ": malformed run file: " + e.what(), 0);
    }
}

StoredRun load_run(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run(ss.str(), path.filename().string());
}

std::vector<StoredRun> load_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw ConfigError("result directory '" + dir.string() + "' does not exist");
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ConfigError("no result files (*.json) in '" + dir.string() + "'");
    std::vector<StoredRun> runs;
    for (const auto& f : files) runs.push_back(load_run(f));
    return runs;
}

Report build_report(const std::vector<StoredRun>& runs, bool allow_mixed) {
    if (runs.empty()) throw ConfigError("report: no runs");
    Report rep;
    rep.dataset = runs.front().dataset;
    for (const auto& r : runs) {
        if (std::find(rep.config_hashes.begin(), rep.config_hashes.end(), r.config_hash) == rep.config_hashes.end())
            rep.config_hashes.push_back(r.config_hash);
        if (!allow_mixed && (r.config_hash != runs.front().config_hash || r.dataset != rep.dataset))
            throw ConfigError("report: " + r.source + " has config " + r.config_hash + " / dataset " + r.dataset +
                              " but " + runs.front().source + " has " + runs.front().config_hash + " / " + rep.dataset +
                              "; refusing to aggregate (pass --allow-mixed to override)");
    }
    for (const auto& name : harness::method_names()) {
        std::vector<const StoredRun*> mine;
        MethodTable table;
        table.method = name;
        for (const auto& r : runs) {
            if (r.method != name) continue;
            if (r.partial) {
                ++table.partial_runs;
                continue;
            }
            mine.push_back(&r);
        }
        if (mine.empty() && table.partial_runs == 0) continue;
        table.seeds = mine.size();
        if (!mine.empty()) {
            const std::size_t n_tasks = mine.front()->tasks.size();
            for (const auto* r : mine)
                if (r->tasks.size() != n_tasks)
                    throw ConfigError("report: " + r->source + " has " + std::to_string(r->tasks.size()) +
                                      " tasks, expected " + std::to_string(n_tasks));
            std::vector<double> acc, bacc, f1, rwd;
            bool has_rwd = true;
            for (std::size_t j = 0; j < n_tasks; ++j) {
                ReportRow row;
                row.label = "Task " + std::to_string(j + 1);
                double rw = 0.0;
                for (const auto* r : mine) {
                    row.acc += r->tasks[j].acc;
                    row.bacc += r->tasks[j].bacc;
                    row.f1 += r->tasks[j].f1;
                    if (r->tasks[j].rwd)
                        rw += *r->tasks[j].rwd;
                    else
                        has_rwd = false;
                }
                const double k = static_cast<double>(mine.size());
                row.acc /= k;
                row.bacc /= k;
                row.f1 /= k;
                if (has_rwd) row.rwd = rw / k;
                acc.push_back(row.acc);
                bacc.push_back(row.bacc);
                f1.push_back(row.f1);
                if (has_rwd) rwd.push_back(*row.rwd);
                table.rows.push_back(row);
            }
            if (!has_rwd)
                for (auto& row : table.rows) row.rwd.reset();
            ReportRow mean_row{"Mean", metrics::mean(acc), metrics::mean(bacc), metrics::mean(f1), std::nullopt};
            ReportRow dev_row{"Deviation", metrics::population_std(acc), metrics::population_std(bacc),
                              metrics::population_std(f1), std::nullopt};
            if (has_rwd) {
                mean_row.rwd = metrics::mean(rwd);
                dev_row.rwd = metrics::population_std(rwd);
            }
            table.rows.push_back(mean_row);
            table.rows.push_back(dev_row);

            std::vector<double> bwt, fwt, fgt;
            for (const auto* r : mine)
                if (r->transfer) {
                    bwt.push_back(r->transfer->bwt);
                    fwt.push_back(r->transfer->fwt);
                    fgt.push_back(r->transfer->forgetting);
                }
            if (!bwt.empty()) {
                table.bwt = metrics::mean(bwt);
                table.fwt = metrics::mean(fwt);
                table.forgetting = metrics::mean(fgt);
            }
        }
        rep.tables.push_back(std::move(table));
    }
    return rep;
}

std::string render_csv(const Report& report) {
    std::string out = "method,row,Acc,bAcc,F1,Rwd\n";
    for (const auto& t : report.tables)
        for (const auto& r : t.rows)
            out += t.method + "," + r.label + "," + fixed4(r.acc) + "," + fixed4(r.bacc) + "," + fixed4(r.f1) + "," +
                   (r.rwd ? fixed4(*r.rwd) : "---") + "\n";
    out += "\nmethod,seeds,BWT,FWT,Forgetting\n";
    for (const auto& t : report.tables)
        out += t.method + "," + std::to_string(t.seeds) + "," + (t.bwt ? fixed4(*t.bwt) : "---") + "," +
               (t.fwt ? fixed4(*t.fwt) : "---") + "," + (t.forgetting ? fixed4(*t.forgetting) : "---") + "\n";
    return out;
}

std::string render_text(const Report& report) {
    std::string hashes;
    for (const auto& h : report.config_hashes) hashes += (hashes.empty() ? "" : ", ") + h;
    std::string out = "dataset " + report.dataset + ", config " + hashes + "\n";
    const std::size_t w0 = 12, w = 9;
    for (const auto& t : report.tables) {
        out += "\n" + t.method + " (" + std::to_string(t.seeds) + " seed" + (t.seeds == 1 ? "" : "s");
        if (t.partial_runs) out += ", " + std::to_string(t.partial_runs) + " partial run(s) excluded";
        out += ")\n";
        out += pad("", w0) + lpad("Acc", w) + lpad("bAcc", w) + lpad("F1", w) + lpad("Rwd", w) + "\n";
        for (const auto& r : t.rows)
            out += pad(r.label, w0) + lpad(fixed4(r.acc), w) + lpad(fixed4(r.bacc), w) + lpad(fixed4(r.f1), w) +
                   lpad(r.rwd ? fixed4(*r.rwd) : "---", w) + "\n";
    }
    out += "\n" + pad("", w0) + lpad("BWT", w) + lpad("FWT", w) + lpad("Forget", w) + "\n";
    for (const auto& t : report.tables)
        out += pad(t.method, w0) + lpad(t.bwt ? fixed4(*t.bwt) : "---", w) + lpad(t.fwt ? fixed4(*t.fwt) : "---", w) +
               lpad(t.forgetting ? fixed4(*t.forgetting) : "---", w) + "\n";
    return out;
}

} // namespace clqas::results
