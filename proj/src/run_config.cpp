#include "clqas/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "clqas/errors.hpp"
#include "clqas/rng.hpp"

namespace clqas::config {

namespace {

using json = nlohmann::json;

struct KeyError {
    std::string message;
};

std::uint64_t as_uint(const json& v) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
        throw KeyError{"expected a non-negative integer, got " + v.dump()};
    return v.get<std::uint64_t>();
}

std::size_t as_count(const json& v) {
    const auto n = as_uint(v);
    if (n == 0) throw KeyError{"must be >= 1"};
    return static_cast<std::size_t>(n);
}

double as_real(const json& v) {
    if (!v.is_number()) throw KeyError{"expected a number, got " + v.dump()};
    return v.get<double>();
}

double as_probability(const json& v) {
    const double p = as_real(v);
    if (!(p >= 0.0 && p <= 1.0)) throw KeyError{"probability must lie in [0, 1], got " + v.dump()};
    return p;
}

bool as_bool(const json& v) {
    if (!v.is_boolean()) throw KeyError{"expected true or false, got " + v.dump()};
    return v.get<bool>();
}

std::string as_string(const json& v) {
    if (!v.is_string()) throw KeyError{"expected a quoted string, got " + v.dump()};
    return v.get<std::string>();
}

template <class F>
auto as_list(const json& v, F&& item) {
    if (!v.is_array()) throw KeyError{"expected an [array], got " + v.dump()};
    std::vector<decltype(item(v))> out;
    for (const auto& x : v) out.push_back(item(x));
    return out;
}

std::vector<std::size_t> as_size_list(const json& v) {
    auto raw = as_list(v, as_count);
    if (raw.empty()) throw KeyError{"array must not be empty"};
    return raw;
}

struct Entry {
    std::string key;
    std::function<void(RunConfig&, const json&)> set;
    std::function<json(const RunConfig&)> get;
    bool hashed = true;
};

template <class Fn>
auto rethrow_as_key_error(Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw KeyError{e.what()};
    }
}

const std::vector<Entry>& entries() {
    static const std::vector<Entry> table = [] {
        std::vector<Entry> t;
        auto add = [&](std::string key, auto set, auto get, bool hashed = true) {
            t.push_back(Entry{std::move(key), set, get, hashed});
        };
        add(
            "run.methods",
            [](RunConfig& c, const json& v) {
                c.methods = as_list(v, [](const json& x) {
                    return rethrow_as_key_error([&] { return harness::method_from_string(as_string(x)); });
                });
            },
            [](const RunConfig& c) {
                json a = json::array();
                for (auto m : c.methods) a.push_back(harness::to_string(m));
                return a;
            },
            false);
        add("run.dataset", [](RunConfig& c, const json& v) { c.dataset = as_string(v); },
            [](const RunConfig& c) { return json(c.dataset); });
        add("run.seeds", [](RunConfig& c, const json& v) { c.seeds = as_list(v, as_uint); },
            [](const RunConfig& c) { return json(c.seeds); }, false);
        add("run.master_seed", [](RunConfig& c, const json& v) { c.master_seed = as_uint(v); },
            [](const RunConfig& c) { return json(c.master_seed); });
        add("run.out", [](RunConfig& c, const json& v) { c.out = as_string(v); },
            [](const RunConfig& c) { return json(c.out.string()); }, false);
        add("run.jobs", [](RunConfig& c, const json& v) { c.jobs = as_count(v); },
            [](const RunConfig& c) { return json(c.jobs); }, false);

        add("data.seed", [](RunConfig& c, const json& v) { c.data_seed = as_uint(v); },
            [](const RunConfig& c) { return json(c.data_seed); });
        add("data.path", [](RunConfig& c, const json& v) { c.data_path = as_string(v); },
            [](const RunConfig& c) { return json(c.data_path.string()); });
        add("data.tasks", [](RunConfig& c, const json& v) { c.tasks = as_count(v); },
            [](const RunConfig& c) { return json(c.tasks); });

        add("circuit.qubits", [](RunConfig& c, const json& v) { c.harness.space.num_qubits = as_count(v); },
            [](const RunConfig& c) { return json(c.harness.space.num_qubits); });
        add("circuit.max_layers", [](RunConfig& c, const json& v) { c.harness.space.max_depth = as_count(v); },
            [](const RunConfig& c) { return json(c.harness.space.max_depth); });
        add("circuit.min_layers", [](RunConfig& c, const json& v) { c.harness.space.min_depth = as_count(v); },
            [](const RunConfig& c) { return json(c.harness.space.min_depth); });
        add("circuit.classes", [](RunConfig& c, const json& v) { c.harness.num_classes = as_count(v); },
            [](const RunConfig& c) { return json(c.harness.num_classes); });
        add(
            "circuit.rotations",
            [](RunConfig& c, const json& v) {
                c.harness.space.rotations = as_list(v, [](const json& x) {
                    return rethrow_as_key_error([&] { return qas::rotation_from_string(as_string(x)); });
                });
            },
            [](const RunConfig& c) {
                json a = json::array();
                for (auto r : c.harness.space.rotations) a.push_back(qas::to_string(r));
                return a;
            });
        add(
            "circuit.entanglers",
            [](RunConfig& c, const json& v) {
                c.harness.space.entanglers = as_list(v, [](const json& x) {
                    return rethrow_as_key_error([&] { return qas::entangler_from_string(as_string(x)); });
                });
            },
            [](const RunConfig& c) {
                json a = json::array();
                for (auto e : c.harness.space.entanglers) a.push_back(qas::to_string(e));
                return a;
            });

        add("encoder.input_modes", [](RunConfig& c, const json& v) { c.harness.encoder.input_modes = as_size_list(v); },
            [](const RunConfig& c) { return json(c.harness.encoder.input_modes); });
        add("encoder.output_modes", [](RunConfig& c, const json& v) { c.harness.encoder.output_modes = as_size_list(v); },
            [](const RunConfig& c) { return json(c.harness.encoder.output_modes); });
        add("encoder.ranks", [](RunConfig& c, const json& v) { c.harness.encoder.ranks = as_size_list(v); },
            [](const RunConfig& c) { return json(c.harness.encoder.ranks); });
        add("encoder.trainable", [](RunConfig& c, const json& v) { c.harness.encoder.trainable = as_bool(v); },
            [](const RunConfig& c) { return json(c.harness.encoder.trainable); });

        add("train.epochs", [](RunConfig& c, const json& v) { c.harness.epochs = as_count(v); },
            [](const RunConfig& c) { return json(c.harness.epochs); });
        add("train.finetune_epochs",
            [](RunConfig& c, const json& v) { c.harness.finetune_epochs = static_cast<std::size_t>(as_uint(v)); },
            [](const RunConfig& c) { return json(c.harness.finetune_epochs); });
        add("train.batch", [](RunConfig& c, const json& v) { c.harness.batch = as_count(v); },
            [](const RunConfig& c) { return json(c.harness.batch); });
        add(
            "train.lr",
            [](RunConfig& c, const json& v) {
                c.harness.adam.lr = as_real(v);
                if (!(c.harness.adam.lr > 0.0)) throw KeyError{"must be > 0"};
            },
            [](const RunConfig& c) { return json(c.harness.adam.lr); });
        add(
            "train.grad",
            [](RunConfig& c, const json& v) {
                const auto s = as_string(v);
                if (s == "adjoint")
                    c.harness.grad = vqc::GradientMethod::Adjoint;
                else if (s == "shift")
                    c.harness.grad = vqc::GradientMethod::ParameterShift;
                else
                    throw KeyError{"expected \"adjoint\" or \"shift\", got \"" + s + "\""};
            },
            [](const RunConfig& c) { return json(c.harness.grad == vqc::GradientMethod::Adjoint ? "adjoint" : "shift"); });
        add("train.reinit_theta", [](RunConfig& c, const json& v) { c.harness.reinit_theta = as_bool(v); },
            [](const RunConfig& c) { return json(c.harness.reinit_theta); });

        add("qas.candidates_per_round", [](RunConfig& c, const json& v) { c.harness.candidates = as_count(v); },
            [](const RunConfig& c) { return json(c.harness.candidates); });
        add("qas.rounds", [](RunConfig& c, const json& v) { c.harness.rounds = as_count(v); },
            [](const RunConfig& c) { return json(c.harness.rounds); });
        add(
            "qas.kappa",
            [](RunConfig& c, const json& v) {
                c.harness.kappa = as_real(v);
                if (!(c.harness.kappa >= 0.0)) throw KeyError{"must be >= 0"};
            },
            [](const RunConfig& c) { return json(c.harness.kappa); });
        add(
            "qas.policy_lr",
            [](RunConfig& c, const json& v) {
                c.harness.policy.lr = as_real(v);
                if (!(c.harness.policy.lr > 0.0)) throw KeyError{"must be > 0"};
            },
            [](const RunConfig& c) { return json(c.harness.policy.lr); });
        add(
            "qas.mu",
            [](RunConfig& c, const json& v) {
                c.harness.policy.mu = as_real(v);
                if (!(c.harness.policy.mu >= 0.0)) throw KeyError{"must be >= 0"};
            },
            [](const RunConfig& c) { return json(c.harness.policy.mu); });
        add(
            "qas.beta",
            [](RunConfig& c, const json& v) {
                c.harness.policy.beta = as_real(v);
                if (!(c.harness.policy.beta >= 0.0)) throw KeyError{"must be >= 0"};
            },
            [](const RunConfig& c) { return json(c.harness.policy.beta); });
        add(
            "ewc.lambda",
            [](RunConfig& c, const json& v) {
                c.harness.policy.ewc_lambda = as_real(v);
                if (!(c.harness.policy.ewc_lambda >= 0.0)) throw KeyError{"must be >= 0"};
            },
            [](const RunConfig& c) { return json(c.harness.policy.ewc_lambda); });
        add(
            "objective.lambda",
            [](RunConfig& c, const json& v) {
                c.harness.loss_lambda = as_real(v);
                if (!(c.harness.loss_lambda >= 0.0)) throw KeyError{"must be >= 0"};
            },
            [](const RunConfig& c) { return json(c.harness.loss_lambda); });
        add("qas.fisher_samples", [](RunConfig& c, const json& v) { c.harness.fisher_samples = as_count(v); },
            [](const RunConfig& c) { return json(c.harness.fisher_samples); });
        add(
            "qas.baseline",
            [](RunConfig& c, const json& v) {
                const auto s = as_string(v);
                if (s != "running_mean" && s != "none")
                    throw KeyError{"expected \"running_mean\" or \"none\", got \"" + s + "\""};
                c.harness.running_baseline = s == "running_mean";
            },
            [](const RunConfig& c) { return json(c.harness.running_baseline ? "running_mean" : "none"); });

        add("noise.enabled", [](RunConfig& c, const json& v) { c.noise_enabled = as_bool(v); },
            [](const RunConfig& c) { return json(c.noise_enabled); });
        add("noise.p1", [](RunConfig& c, const json& v) { c.noise.p1 = as_probability(v); },
            [](const RunConfig& c) { return json(c.noise.p1); });
        add("noise.p2", [](RunConfig& c, const json& v) { c.noise.p2 = as_probability(v); },
            [](const RunConfig& c) { return json(c.noise.p2); });
        add(
            "noise.pr",
            [](RunConfig& c, const json& v) {
                c.noise.pr = as_real(v);
                if (!(c.noise.pr >= 0.0 && c.noise.pr < 0.5)) throw KeyError{"must lie in [0, 0.5)"};
            },
            [](const RunConfig& c) { return json(c.noise.pr); });
        add(
            "noise.jitter",
            [](RunConfig& c, const json& v) {
                c.noise.eps_jitter = as_real(v);
                if (!(c.noise.eps_jitter >= 0.0)) throw KeyError{"must be >= 0"};
            },
            [](const RunConfig& c) { return json(c.noise.eps_jitter); });
        add(
            "noise.convention",
            [](RunConfig& c, const json& v) {
                c.noise.convention = rethrow_as_key_error([&] { return noise::convention_from_string(as_string(v)); });
            },
            [](const RunConfig& c) { return json(noise::to_string(c.noise.convention)); });
        add(
            "noise.eval",
            [](RunConfig& c, const json& v) {
                const auto s = as_string(v);
                if (s == "analytic")
                    c.harness.noise_eval = harness::NoiseEval::Analytic;
                else if (s == "trajectory")
                    c.harness.noise_eval = harness::NoiseEval::Trajectory;
                else
                    throw KeyError{"expected \"analytic\" or \"trajectory\", got \"" + s + "\""};
            },
            [](const RunConfig& c) {
                return json(c.harness.noise_eval == harness::NoiseEval::Analytic ? "analytic" : "trajectory");
            });
        add("noise.trajectories", [](RunConfig& c, const json& v) { c.harness.eval_trajectories = as_count(v); },
            [](const RunConfig& c) { return json(c.harness.eval_trajectories); });

        add("audit.enabled", [](RunConfig& c, const json& v) { c.harness.audit = as_bool(v); },
            [](const RunConfig& c) { return json(c.harness.audit); });
        add("audit.samples", [](RunConfig& c, const json& v) { c.harness.audit_samples = as_count(v); },
            [](const RunConfig& c) { return json(c.harness.audit_samples); });
        add("audit.trajectories", [](RunConfig& c, const json& v) { c.harness.audit_trajectories = as_count(v); },
            [](const RunConfig& c) { return json(c.harness.audit_trajectories); });
        add("diag.tt_probe_samples",
            [](RunConfig& c, const json& v) { c.harness.tt_probe_samples = static_cast<std::size_t>(as_uint(v)); },
            [](const RunConfig& c) { return json(c.harness.tt_probe_samples); });
        return t;
    }();
    return table;
}

const Entry& find_entry(const std::string& key) {
    for (const auto& e : entries())
        if (e.key == key) return e;
    std::string valid;
    for (const auto& e : entries()) valid += (valid.empty() ? "" : ", ") + e.key;
    throw ConfigError("unknown config key '" + key + "' (valid keys: " + valid + ")");
}

std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
        if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

void assign(RunConfig& cfg, const std::string& key, const std::string& raw, const std::string& where) {
    const Entry& entry = find_entry(key);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        throw ConfigError(where + "key '" + key + "': cannot parse value '" + raw + "'");
    }
    try {
        entry.set(cfg, value);
    } catch (const KeyError& e) {
        throw ConfigError(where + "key '" + key + "': " + e.message);
    }
}

} // namespace

void RunConfig::validate() const {
    if (methods.empty()) throw ConfigError("key 'run.methods': at least one method is required");
    if (seeds.empty()) throw ConfigError("key 'run.seeds': at least one seed is required");
    if (dataset != "financial" && dataset != "ecg" && dataset != "blobs")
        throw ConfigError("key 'run.dataset': expected financial, ecg or blobs, got '" + dataset + "'");
    if (dataset == "ecg") {
        if (data_path.empty()) throw ConfigError("key 'data.path': required for the ecg dataset");
        if (!std::filesystem::exists(data_path))
            throw ConfigError("key 'data.path': file '" + data_path.string() + "' does not exist");
    }
    try {
        noise.validate();
    } catch (const DomainError& e) {
        throw ConfigError(std::string("noise: ") + e.what());
    }
    harness_config().validate();
}

harness::HarnessConfig RunConfig::harness_config() const {
    harness::HarnessConfig h = harness;
    if (noise_enabled)
        h.noise = noise;
    else
        h.noise.reset();
    return h;
}

std::uint64_t RunConfig::run_seed(std::uint64_t seed) const { return derive_seed(master_seed, {seed}); }

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& e : entries()) k.push_back(e.key);
        return k;
    }();
    return keys;
}

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) { assign(cfg, key, value, ""); }

RunConfig parse_config(const std::string& text, const std::string& source, RunConfig base) {
    std::istringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = source + ":" + std::to_string(lineno) + ": ";
        const std::string body = trim(strip_comment(line));
        if (body.empty()) continue;
        if (body.front() == '[') {
            if (body.back() != ']') throw ConfigError(where + "malformed section header");
            section = trim(body.substr(1, body.size() - 2));
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
        std::string key = trim(body.substr(0, eq));
        if (!section.empty()) key = section + "." + key;
        if (!seen.insert(key).second) throw ConfigError(where + "key '" + key + "' set twice");
        try {
            assign(base, key, trim(body.substr(eq + 1)), where);
        } catch (const ConfigError& e) {
            const std::string msg = e.what();
            throw ConfigError(msg.rfind(where, 0) == 0 ? msg : where + msg);
        }
    }
    return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string(), std::move(base));
}

std::vector<std::pair<std::string, std::string>> resolved_entries(const RunConfig& cfg) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& e : entries()) out.emplace_back(e.key, e.get(cfg).dump());
    return out;
}

std::string resolved_text(const RunConfig& cfg) {
    std::string out;
    for (const auto& [k, v] : resolved_entries(cfg)) out += k + " = " + v + "\n";
    return out;
}

std::uint64_t config_hash(const RunConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& e : entries()) {
        if (!e.hashed) continue;
        for (unsigned char c : e.key + "=" + e.get(cfg).dump() + "\n") {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace clqas::config
