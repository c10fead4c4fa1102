#include "clqas/continual_harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "clqas/errors.hpp"
#include "clqas/rng.hpp"

namespace clqas::harness {

namespace {

struct Interrupted {};

bool stop_requested(const HarnessConfig& cfg) { return cfg.stop && cfg.stop->load(); }

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

vqc::EvalOptions analytic_options(const HarnessConfig& cfg) {
    vqc::EvalOptions o;
    o.noise = cfg.noise;
    return o;
}

vqc::TrainConfig train_config(const HarnessConfig& cfg, std::size_t epochs, std::uint64_t shuffle_seed,
                              std::size_t first_epoch) {
    vqc::TrainConfig t;
    t.epochs = epochs;
    t.batch = cfg.batch;
    t.adam = cfg.adam;
    t.method = cfg.grad;
    t.noise = cfg.noise;
    t.shuffle_seed = shuffle_seed;
    t.first_epoch = first_epoch;
    return t;
}

std::vector<double> per_epoch_means(const std::vector<double>& per_step, std::size_t steps_per_epoch) {
    std::vector<double> out;
    for (std::size_t s = 0; s < per_step.size(); s += steps_per_epoch) {
        const std::size_t e = std::min(per_step.size(), s + steps_per_epoch);
        double acc = 0.0;
        for (std::size_t i = s; i < e; ++i) acc += per_step[i];
        out.push_back(acc / static_cast<double>(e - s));
    }
    return out;
}

double split_accuracy(std::span<const Example> data, const std::vector<int>& pred) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < data.size(); ++i) ok += pred[i] == data[i].y;
    return static_cast<double>(ok) / static_cast<double>(data.size());
}

std::vector<int> labels_of(std::span<const Example> data) {
    std::vector<int> y;
    y.reserve(data.size());
    for (const Example& e : data) y.push_back(e.y);
    return y;
}

double curvature_probe(const vqc::Model& model, std::span<const Example> train, const HarnessConfig& cfg, Rng& rng) {
    const std::size_t n = std::min(train.size(), cfg.batch);
    const auto batch = train.subspan(0, n);
    const auto opts = analytic_options(cfg);
    const auto g0 = vqc::gradient(batch, model, opts, cfg.grad).flat();
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> v(g0.size());
    for (double& x : v) x = g(rng);
    const double nv = norm2(v);
    if (nv == 0.0) return 0.0;
    constexpr double h = 1e-4;
    vqc::Model moved = model;
    auto flat = moved.flat_parameters();
    for (std::size_t i = 0; i < flat.size(); ++i) flat[i] += h * v[i] / nv;
    moved.set_flat_parameters(flat);
    const auto g1 = vqc::gradient(batch, moved, opts, cfg.grad).flat();
    double d = 0.0;
    for (std::size_t i = 0; i < g0.size(); ++i) d += (g1[i] - g0[i]) * (g1[i] - g0[i]);
    return std::sqrt(d) / h;
}

void tt_probe(const TaskDataset& task, const HarnessConfig& cfg, TaskDiagnostics& diag) {
    const std::size_t max_rank = *std::max_element(cfg.encoder.ranks.begin(), cfg.encoder.ranks.end());
    std::size_t used = 0;
    double eps = 0.0, rho = 0.0, bound = 0.0;
    for (const Example& e : task.train) {
        if (used == cfg.tt_probe_samples) break;
        if (norm2(e.x) == 0.0) continue;
        const auto d = tt::tt_svd(e.x, cfg.encoder.input_modes, max_rank);
        eps += d.report.eps_tt;
        rho += d.report.rho;
        bound += d.report.fidelity_lower_bound;
        ++used;
    }
    if (used == 0) return;
    diag.eps_tt = eps / static_cast<double>(used);
    diag.rho = rho / static_cast<double>(used);
    diag.fidelity_bound = bound / static_cast<double>(used);
}

struct Candidate {
    vqc::Model model;
    vqc::AdamState adam;
    vqc::TrainLog log;
    qas::ArchSample sample;
    double val_accuracy = 0.0;
    double reward = -std::numeric_limits<double>::infinity();
};

} // namespace

std::string to_string(Method m) {
    switch (m) {
    case Method::NaiveVqc: return "naive_vqc";
    case Method::QasNoCl: return "qas_no_cl";
    case Method::ClQas: return "cl_qas";
    }
    return "?";
}

const std::vector<std::string>& method_names() {
    static const std::vector<std::string> names{"naive_vqc", "qas_no_cl", "cl_qas"};
    return names;
}

Method method_from_string(const std::string& s) {
    if (s == "naive_vqc") return Method::NaiveVqc;
    if (s == "qas_no_cl") return Method::QasNoCl;
    if (s == "cl_qas") return Method::ClQas;
    throw ConfigError("unknown method '" + s + "' (valid: naive_vqc, qas_no_cl, cl_qas)");
}

void HarnessConfig::validate() const {
    space.validate();
    const std::size_t u = space.num_qubits;
    std::size_t out = 1;
    for (std::size_t m : encoder.output_modes) out *= m;
    if (out != u)
        throw ConfigError("encoder output modes multiply to " + std::to_string(out) + " but circuit.qubits = " +
                          std::to_string(u));
    if (encoder.input_modes.size() != encoder.output_modes.size() || encoder.ranks.size() != encoder.input_modes.size() + 1)
        throw ConfigError("encoder modes and ranks are inconsistent");
    if (encoder.ranks.front() != 1 || encoder.ranks.back() != 1) throw ConfigError("encoder boundary ranks must be 1");
    if (num_classes < 2 || num_classes >= u) throw ConfigError("circuit.classes must satisfy 2 <= K < qubits");
    if (epochs == 0) throw ConfigError("train.epochs must be >= 1");
    if (batch == 0) throw ConfigError("train.batch must be >= 1");
    if (!(adam.lr > 0.0)) throw ConfigError("train.lr must be > 0");
    if (candidates == 0) throw ConfigError("qas.candidates_per_round must be >= 1");
    if (rounds == 0) throw ConfigError("qas.rounds must be >= 1");
    if (!(kappa >= 0.0)) throw ConfigError("qas.kappa must be >= 0");
    if (!(policy.lr > 0.0)) throw ConfigError("qas.policy_lr must be > 0");
    if (!(policy.mu >= 0.0) || !(policy.beta >= 0.0) || !(policy.ewc_lambda >= 0.0))
        throw ConfigError("qas.mu, qas.beta and ewc.lambda must be >= 0");
    if (!(loss_lambda >= 0.0)) throw ConfigError("objective.lambda must be >= 0");
    if (fisher_samples == 0) throw ConfigError("qas.fisher_samples must be >= 1");
    if (noise) {
        try {
            noise->validate();
        } catch (const DomainError& e) {
            throw ConfigError(std::string("noise: ") + e.what());
        }
    }
    if (eval_trajectories == 0 || audit_trajectories == 0 || audit_samples == 0)
        throw ConfigError("trajectory and audit sample counts must be >= 1");
}

LearnerState initial_state(const HarnessConfig& cfg, std::uint64_t seed) {
    LearnerState s;
    Rng rng = make_rng(seed, {stream::kInit});
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    s.bank.resize(qas::bank_size(cfg.space.num_qubits, cfg.space.max_depth));
    for (double& v : s.bank) v = u(rng);
    s.encoder = tt::TTLinear::random(cfg.encoder.input_modes, cfg.encoder.output_modes, cfg.encoder.ranks, rng);
    s.encoder.trainable = cfg.encoder.trainable;
    const qas::LogitTablePolicy policy(cfg.space);
    s.policy = qas::PolicySnapshot::uniform(policy.num_parameters());
    return s;
}

void redraw_bank(LearnerState& state, const HarnessConfig& cfg, std::uint64_t seed, std::size_t task) {
    Rng rng = make_rng(seed, {stream::kInit, task + 1});
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    state.bank.assign(qas::bank_size(cfg.space.num_qubits, cfg.space.max_depth), 0.0);
    for (double& v : state.bank) v = u(rng);
}

vqc::Model gather_model(const qas::Architecture& arch, const LearnerState& state, const HarnessConfig& cfg) {
    vqc::Model m;
    m.arch = arch;
    for (std::size_t slot : arch.parameter_slots()) {
        if (slot >= state.bank.size()) throw ShapeError("architecture deeper than the parameter bank");
        m.params.theta.push_back(state.bank[slot]);
    }
    m.head.num_classes = cfg.num_classes;
    m.encoder = state.encoder;
    return m;
}

void scatter_model(const vqc::Model& model, LearnerState& state) {
    const auto slots = model.arch.parameter_slots();
    if (slots.size() != model.params.theta.size()) throw ShapeError("scatter_model: theta does not match the architecture");
    for (std::size_t i = 0; i < slots.size(); ++i) state.bank.at(slots[i]) = model.params.theta[i];
    state.encoder = model.encoder;
}

std::vector<int> predict_split(std::span<const Example> data, const vqc::Model& model, const HarnessConfig& cfg,
                               std::uint64_t seed) {
    std::vector<int> out;
    out.reserve(data.size());
    if (cfg.noise && cfg.noise_eval == NoiseEval::Trajectory) {
        const auto gates = vqc::build_circuit(model.arch, model.params);
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto angles = tt::tt_linear_forward(data[i].x, model.encoder);
            const auto z = noise::mean_trajectory_expectations(angles, gates, *cfg.noise, cfg.eval_trajectories,
                                                               derive_seed(seed, {i}));
            const auto first = z.begin();
            out.push_back(static_cast<int>(
                std::max_element(first, first + static_cast<std::ptrdiff_t>(cfg.num_classes)) - first));
        }
        return out;
    }
    const auto opts = analytic_options(cfg);
    for (const Example& e : data) out.push_back(vqc::predict(e.x, model, opts));
    return out;
}

qas::PolicySnapshot consolidate(const qas::ArchitecturePolicy& policy, const qas::PolicySnapshot& snapshot,
                                std::size_t fisher_samples, Rng& rng) {
    qas::PolicySnapshot s = snapshot;
    s.phi_old = snapshot.phi;
    s.fisher = qas::estimate_fisher(policy, snapshot.phi, fisher_samples, rng);
    s.prior = snapshot.phi;
    return s;
}

TaskRecord run_task(const TaskDataset& task, LearnerState& state, Method method, const HarnessConfig& cfg,
                    std::uint64_t seed, double vqc_loss_so_far) {
    if (task.train.empty() || task.val.empty() || task.test.empty())
        throw DomainError("task " + std::to_string(task.task_id) + " has an empty split");
    if (task.feature_dim() != state.encoder.input_dim())
        throw ShapeError("task features have dimension " + std::to_string(task.feature_dim()) + ", encoder expects " +
                         std::to_string(state.encoder.input_dim()));

    const std::uint64_t shuffle_seed = derive_seed(seed, {stream::kShuffle, task.task_id});
    const std::size_t steps_per_epoch = (task.train.size() + cfg.batch - 1) / cfg.batch;
    const auto analytic = analytic_options(cfg);

    TaskRecord rec;
    rec.task_id = task.task_id;
    rec.group = task.group;

    vqc::Model chosen;
    std::vector<double> step_norms;
    double logprob = 0.0, c_pi_hat = 0.0;

    if (method == Method::NaiveVqc) {
        if (stop_requested(cfg)) throw Interrupted{};
        chosen = gather_model(qas::Architecture::baseline(cfg.space.num_qubits, cfg.space.max_depth), state, cfg);
        vqc::AdamState adam;
        const auto log =
            vqc::train(chosen, task.train, train_config(cfg, cfg.epochs + cfg.finetune_epochs, shuffle_seed, 0), adam);
        step_norms = log.grad_norm_sq;
    } else {
        const qas::LogitTablePolicy policy(cfg.space);
        qas::PolicyStepConfig step_cfg = cfg.policy;
        if (method == Method::QasNoCl) step_cfg.mu = step_cfg.beta = 0.0;

        Candidate best;
        double reward_sum = 0.0;
        std::size_t reward_count = 0;
        for (std::size_t round = 0; round < cfg.rounds; ++round) {
            Rng rng = make_rng(seed, {stream::kPolicy, task.task_id, round});
            std::vector<qas::ArchSample> samples;
            for (std::size_t c = 0; c < cfg.candidates; ++c) {
                if (stop_requested(cfg)) throw Interrupted{};
                Candidate cand;
                cand.sample = policy.sample(state.policy.phi, rng);
                cand.model = gather_model(cand.sample.arch, state, cfg);
                cand.log = vqc::train(cand.model, task.train, train_config(cfg, cfg.epochs, shuffle_seed, 0), cand.adam);
                cand.val_accuracy = vqc::accuracy(task.val, cand.model, analytic);
                const std::size_t n_cnot = cand.sample.arch.cnot_count();
                cand.reward = qas::reward(cand.val_accuracy, n_cnot, cfg.kappa);
                cand.sample.reward = cand.reward;
                c_pi_hat = std::max(c_pi_hat, std::abs(cand.sample.logprob));
                rec.candidates.push_back(CandidateLog{round, cand.sample.arch.to_tokens(), cand.val_accuracy, n_cnot,
                                                      cand.reward, cand.sample.logprob});
                samples.push_back(cand.sample);
                if (cand.reward > best.reward) best = std::move(cand);
            }
            for (const auto& s : samples) {
                reward_sum += *s.reward;
                ++reward_count;
            }
            step_cfg.baseline = cfg.running_baseline ? reward_sum / static_cast<double>(reward_count) : 0.0;
            rec.policy_steps.push_back(qas::policy_step(policy, state.policy, samples, step_cfg));
        }
        chosen = std::move(best.model);
        const auto fine = vqc::train(chosen, task.train,
                                     train_config(cfg, cfg.finetune_epochs, shuffle_seed, cfg.epochs), best.adam);
        step_norms = best.log.grad_norm_sq;
        step_norms.insert(step_norms.end(), fine.grad_norm_sq.begin(), fine.grad_norm_sq.end());
        rec.reward = best.reward;
        rec.policy_loss = rec.policy_steps.back().loss;
        logprob = policy.log_prob(state.policy.phi, best.sample.decisions);
    }

    scatter_model(chosen, state);
    rec.arch = chosen.arch;
    rec.val_accuracy = vqc::accuracy(task.val, chosen, analytic);
    const auto pred = predict_split(task.test, chosen, cfg, derive_seed(seed, {stream::kTrajectory, task.task_id, task.task_id}));
    rec.test = metrics::compute_metrics(pred, labels_of(task.test));
    rec.vqc_loss = vqc::loss(task.train, chosen, analytic);
    rec.total_loss = vqc_loss_so_far + rec.vqc_loss + cfg.loss_lambda * rec.policy_loss;

    auto& diag = rec.diag;
    diag.grad_norm_sq = per_epoch_means(step_norms, steps_per_epoch);
    for (double g : step_norms) diag.grad_norm_sq_max = std::max(diag.grad_norm_sq_max, g);
    Rng probe = make_rng(seed, {stream::kTtProbe, task.task_id});
    diag.curvature = curvature_probe(chosen, task.train, cfg, probe);
    tt_probe(task, cfg, diag);
    if (cfg.noise) diag.alpha = noise::contraction_alpha(*cfg.noise, vqc::circuit_census(chosen.arch));
    if (cfg.audit && cfg.noise) {
        AuditOptions ao;
        ao.loss_lambda = method == Method::NaiveVqc ? 0.0 : cfg.loss_lambda;
        ao.kappa = cfg.kappa;
        ao.c_pi_hat = c_pi_hat;
        ao.logprob = logprob;
        ao.samples = cfg.audit_samples;
        ao.trajectories = cfg.audit_trajectories;
        ao.seed = derive_seed(seed, {stream::kTrajectory, task.task_id, 1u << 20});
        diag.audit = robustness_audit(chosen, task, *cfg.noise, ao);
    }
    return rec;
}

RunRecord run_sequence(const std::vector<TaskDataset>& tasks, Method method, const HarnessConfig& cfg,
                       std::uint64_t seed) {
    if (tasks.empty()) throw DomainError("run_sequence: no tasks");
    cfg.validate();
    RunRecord run;
    run.method = method;
    run.seed = seed;
    LearnerState state = initial_state(cfg, seed);
    const qas::LogitTablePolicy policy(cfg.space);
    const std::size_t n = tasks.size();
    double vqc_sum = 0.0;
    try {
        for (std::size_t i = 0; i < n; ++i) {
            if (cfg.reinit_theta && i > 0) redraw_bank(state, cfg, seed, i);
            run.tasks.push_back(run_task(tasks[i], state, method, cfg, seed, vqc_sum));
            vqc_sum += run.tasks.back().vqc_loss;
            if (method == Method::ClQas) {
                Rng rng = make_rng(seed, {stream::kFisher, tasks[i].task_id});
                state.policy = consolidate(policy, state.policy, cfg.fisher_samples, rng);
            }
            std::vector<double> row(n);
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) {
                    row[j] = run.tasks[i].test.acc;
                    continue;
                }
                const auto& arch = j < i ? run.tasks[j].arch : run.tasks[i].arch;
                const auto model = gather_model(arch, state, cfg);
                const auto pred = predict_split(tasks[j].test, model, cfg,
                                                derive_seed(seed, {stream::kTrajectory, tasks[i].task_id, tasks[j].task_id}));
                row[j] = split_accuracy(tasks[j].test, pred);
            }
            run.r.push_back(std::move(row));
        }
        run.transfer = metrics::transfer_metrics(run.r);
    } catch (const Interrupted&) {
        run.partial = true;
    }
    return run;
}

AuditRow robustness_audit(const vqc::Model& model, const TaskDataset& task, const noise::NoiseModel& noise,
                          const AuditOptions& opts) {
    if (task.test.empty() || task.val.empty()) throw DomainError("robustness_audit: empty split");
    AuditRow row;
    row.noise = noise;
    const vqc::EvalOptions clean{};
    vqc::EvalOptions noisy;
    noisy.noise = noise;

    row.clean_loss = vqc::loss(task.test, model, clean);
    row.noisy_loss = vqc::loss(task.test, model, noisy);
    const std::size_t n_cnot = model.arch.cnot_count();
    row.clean_reward = qas::reward(vqc::accuracy(task.val, model, clean), n_cnot, opts.kappa);
    row.noisy_reward = qas::reward(vqc::accuracy(task.val, model, noisy), n_cnot, opts.kappa);
    const double policy_change = -(row.noisy_reward - row.clean_reward) * opts.logprob;
    row.lhs = std::abs((row.noisy_loss - row.clean_loss) + opts.loss_lambda * policy_change);

    row.alpha = noise::contraction_alpha(noise, vqc::circuit_census(model.arch));
    for (const Example& e : task.test) row.mean_z_norm += norm2(vqc::expectations(e.x, model, clean));
    row.mean_z_norm /= static_cast<double>(task.test.size());

    const auto gates = vqc::build_circuit(model.arch, model.params);
    const std::size_t k = model.head.num_classes;
    const std::size_t n_delta = std::min(opts.samples, task.test.size());
    const std::size_t per_delta = std::max<std::size_t>(1, opts.trajectories / n_delta);
    for (std::size_t i = 0; i < n_delta; ++i) {
        const auto& x = task.test[i].x;
        const auto z = vqc::expectations(x, model, clean);
        const auto zt = noise::mean_trajectory_expectations(tt::tt_linear_forward(x, model.encoder), gates, noise,
                                                            per_delta, derive_seed(opts.seed, {0, i}));
        double d = 0.0;
        for (std::size_t q = 0; q < z.size(); ++q) d += (zt[q] - row.alpha * z[q]) * (zt[q] - row.alpha * z[q]);
        row.delta_hat = std::max(row.delta_hat, std::sqrt(d));
    }

    const std::size_t per_val = std::max<std::size_t>(1, opts.trajectories / task.val.size());
    std::size_t correct = 0;
    for (std::size_t i = 0; i < task.val.size(); ++i) {
        const auto& e = task.val[i];
        const auto zt = noise::mean_trajectory_expectations(tt::tt_linear_forward(e.x, model.encoder), gates, noise,
                                                            per_val, derive_seed(opts.seed, {1, i}));
        const auto top = std::max_element(zt.begin(), zt.begin() + static_cast<std::ptrdiff_t>(k)) - zt.begin();
        correct += static_cast<int>(top) == e.y;
    }
    const double traj_reward =
        qas::reward(static_cast<double>(correct) / static_cast<double>(task.val.size()), n_cnot, opts.kappa);
    row.eps_c_hat = std::abs(traj_reward - row.alpha * row.clean_reward);
    row.c_pi_hat = opts.c_pi_hat;

    const double u = static_cast<double>(model.arch.num_qubits);
    row.rhs = kLossLipschitz * std::sqrt(u) * ((1.0 - row.alpha) + row.delta_hat) +
              opts.loss_lambda * row.c_pi_hat * ((1.0 - row.alpha) + row.eps_c_hat);
    row.lemma5_bound = kLossLipschitz * (1.0 - row.alpha) * row.mean_z_norm;
    return row;
}

} // namespace clqas::harness
