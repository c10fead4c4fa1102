#include "clqas/theory_checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <sstream>

#include "clqas/datasets.hpp"
#include "clqas/qas_policy.hpp"

namespace clqas::theory {

namespace {

template <typename... Args>
std::string fmt(const char* f, Args... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double norm2(std::span<const double> v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); }

std::vector<double> gaussian_vector(std::size_t n, Rng& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = g(rng);
    return v;
}

// Random factorization with every mode >= 2 and a product in [16, 256].
std::vector<std::size_t> random_modes(Rng& rng) {
    static const std::size_t choices[] = {2, 3, 4, 5, 6, 8};
    std::uniform_int_distribution<std::size_t> pick(0, std::size(choices) - 1);
    for (;;) {
        std::vector<std::size_t> modes;
        std::size_t n = 1;
        while (n < 16 || (modes.size() < 2)) {
            modes.push_back(choices[pick(rng)]);
            n *= modes.back();
        }
        if (n <= 256) {
            if (std::bernoulli_distribution(0.5)(rng) && n * 2 <= 256) modes.push_back(2);
            return modes;
        }
    }
}

std::string modes_text(const std::vector<std::size_t>& modes) {
    std::string s;
    for (std::size_t m : modes) s += (s.empty() ? "" : "x") + std::to_string(m);
    return s;
}

// Low-rank TT vector plus a small perturbation, so rho < 1 holds often.
std::vector<double> structured_vector(const std::vector<std::size_t>& modes, std::size_t rank, Rng& rng) {
    tt::TTVector t;
    t.modes = modes;
    t.ranks.assign(modes.size() + 1, rank);
    t.ranks.front() = t.ranks.back() = 1;
    std::normal_distribution<double> g(0.0, 1.0);
    for (std::size_t k = 0; k < modes.size(); ++k) {
        tt::Core3 c(t.ranks[k], modes[k], t.ranks[k + 1]);
        for (double& v : c.data) v = g(rng);
        t.cores.push_back(std::move(c));
    }
    auto x = tt::tt_reconstruct(t);
    const double scale = 0.3 * norm2(x) / std::sqrt(static_cast<double>(x.size()));
    for (double& v : x) v += scale * g(rng);
    return x;
}

} // namespace

bool SuiteResult::passed() const {
    return std::all_of(lines.begin(), lines.end(), [](const CheckLine& l) { return l.passed; });
}

std::string SuiteResult::render() const {
    std::ostringstream os;
    std::size_t ok = 0;
    for (const auto& l : lines) {
        ok += l.passed;
        os << (l.passed ? "[PASS] " : "[FAIL] ") << suite << ": " << l.name;
        if (!l.detail.empty()) os << "  " << l.detail;
        os << '\n';
    }
    os << suite << ": " << ok << "/" << lines.size() << " checks passed\n";
    return os.str();
}

SuiteResult tt_suite(std::uint64_t seed, std::size_t error_cases, std::size_t fidelity_cases) {
    SuiteResult res{"tt", {}};
    Rng rng = make_rng(seed, {stream::kTtProbe, 1});
    std::uniform_int_distribution<std::size_t> rank_dist(1, 4);

    std::size_t ok = 0;
    double worst_margin = -std::numeric_limits<double>::infinity();
    std::vector<CheckLine> failures;
    for (std::size_t c = 0; c < error_cases; ++c) {
        const auto modes = random_modes(rng);
        const std::size_t n = std::accumulate(modes.begin(), modes.end(), std::size_t{1}, std::multiplies<>());
        const std::size_t r = rank_dist(rng);
        const auto x = gaussian_vector(n, rng);
        const auto dec = tt::tt_svd(x, modes, r);
        const auto xt = tt::tt_reconstruct(dec.tt);
        std::vector<double> diff(n);
        for (std::size_t i = 0; i < n; ++i) diff[i] = x[i] - xt[i];
        const double err = norm2(diff);
        const double bound = dec.report.discarded_norm();
        worst_margin = std::max(worst_margin, err - bound);
        if (err <= bound + 1e-10) {
            ++ok;
        } else {
            failures.push_back({fmt("error bound case %zu (modes %s, rank %zu)", c, modes_text(modes).c_str(), r), false,
                                fmt("eps_tt=%.3e bound=%.3e", err, bound)});
        }
    }
    res.lines.push_back({fmt("eps_tt <= discarded norm + 1e-10 on %zu random vectors", error_cases), ok == error_cases,
                         fmt("%zu/%zu, max(eps_tt - bound)=%.3e", ok, error_cases, worst_margin)});
    res.lines.insert(res.lines.end(), failures.begin(), failures.end());
    failures.clear();

    ok = 0;
    std::size_t tried = 0;
    double min_slack = std::numeric_limits<double>::infinity();
    while (tried < fidelity_cases) {
        const auto modes = random_modes(rng);
        const std::size_t r = rank_dist(rng);
        const auto x = (tried % 2 == 0) ? structured_vector(modes, r, rng)
                                        : gaussian_vector(std::accumulate(modes.begin(), modes.end(), std::size_t{1},
                                                                          std::multiplies<>()),
                                                          rng);
        const auto dec = tt::tt_svd(x, modes, r);
        if (dec.report.rho_undefined || dec.report.rho >= 1.0) continue;
        const auto xt = tt::tt_reconstruct(dec.tt);
        const double dot = std::inner_product(x.begin(), x.end(), xt.begin(), 0.0);
        const double nx = norm2(x), nt = norm2(xt);
        const double fid = nt > 0.0 ? (dot * dot) / (nx * nx * nt * nt) : 0.0;
        min_slack = std::min(min_slack, fid - dec.report.fidelity_lower_bound);
        if (fid >= dec.report.fidelity_lower_bound - 1e-12) {
            ++ok;
        } else {
            failures.push_back({fmt("fidelity case %zu (modes %s, rank %zu)", tried, modes_text(modes).c_str(), r),
                                false, fmt("fidelity=%.6f bound=%.6f rho=%.4f", fid, dec.report.fidelity_lower_bound,
                                           dec.report.rho)});
        }
        ++tried;
    }
    res.lines.push_back({fmt("fidelity >= ((1-rho)/(1+rho))^2 - 1e-12 on %zu cases with rho < 1", fidelity_cases),
                         ok == fidelity_cases, fmt("%zu/%zu, min slack=%.3e", ok, fidelity_cases, min_slack)});
    res.lines.insert(res.lines.end(), failures.begin(), failures.end());
    return res;
}

SuiteResult noise_suite(std::uint64_t seed, std::size_t trajectories) {
    SuiteResult res{"noise", {}};
    const double t = static_cast<double>(trajectories);
    const std::size_t q0[] = {0};
    const std::size_t both[] = {0, 1};

    {
        const double p1 = 0.3;
        Rng rng = make_rng(seed, {stream::kTrajectory, 1});
        double sum = 0.0;
        for (std::size_t i = 0; i < trajectories; ++i)
            sum += qsim::expect_z_all(noise::stochastic_depolarize(qsim::QuantumState(1), q0, p1, rng))[0];
        const double mc = sum / t, expect = 1.0 - 4.0 * p1 / 3.0;
        res.lines.push_back({"single-qubit depolarizing p1=0.3: <Z> = 1 - 4p1/3", std::abs(mc - expect) <= 0.01,
                             fmt("mc=%.5f analytic=%.5f tol=0.01", mc, expect)});
    }
    {
        const double p2 = 0.15;
        const double r = 1.0 / std::numbers::sqrt2;
        Rng rng = make_rng(seed, {stream::kTrajectory, 2});
        double sum = 0.0;
        for (std::size_t i = 0; i < trajectories; ++i) {
            qsim::QuantumState bell(2, {r, 0.0, 0.0, r});
            sum += qsim::expect_z_product(noise::stochastic_depolarize2(std::move(bell), 0, 1, p2, rng), both);
        }
        const double mc = sum / t, expect = 1.0 - 16.0 * p2 / 15.0;
        res.lines.push_back({"two-qubit depolarizing p2=0.15 on a Bell pair: <ZZ> = 1 - 16p2/15",
                             std::abs(mc - expect) <= 0.01, fmt("mc=%.5f analytic=%.5f tol=0.01", mc, expect)});
    }
    {
        const double pr = 0.01;
        Rng rng = make_rng(seed, {stream::kShots, 3});
        double sum = 0.0;
        for (std::size_t i = 0; i < trajectories; ++i) sum += noise::readout_flip(0, 1, pr, rng) ? -1.0 : 1.0;
        const double mc = sum / t, expect = 1.0 - 2.0 * pr;
        res.lines.push_back({"readout flip pr=0.01: <Z> = 1 - 2pr", std::abs(mc - expect) <= 0.005,
                             fmt("mc=%.5f analytic=%.5f tol=0.005", mc, expect)});
    }

    // Full trajectories through small circuits on which the contraction is exact:
    // one qubit under single-qubit noise, and two qubits under two-qubit noise only.
    struct Row {
        const char* name;
        std::vector<double> enc;
        std::vector<qsim::Gate> gates;
        noise::NoiseModel model;
    };
    using qsim::Gate;
    const std::vector<Row> rows{
        {"U=1, 4 rotations, p1=0.02 pr=0.01", {0.3}, {Gate::rx(0, 0.2), Gate::ry(0, -0.4), Gate::rz(0, 0.7)},
         noise::NoiseModel{0.02, 0.0, 0.01, 0.0, noise::Convention::Standard}},
        {"U=2, 2 CNOTs, p2=0.05 pr=0.01", {0.4, 1.1}, {Gate::cnot(0, 1), Gate::ry(1, 0.3), Gate::cnot(1, 0)},
         noise::NoiseModel{0.0, 0.05, 0.01, 0.0, noise::Convention::Standard}},
        {"U=2, 3 CNOTs, p2=0.1 pr=0", {0.2, 0.9}, {Gate::cnot(0, 1), Gate::cnot(1, 0), Gate::cnot(0, 1)},
         noise::NoiseModel{0.0, 0.1, 0.0, 0.0, noise::Convention::Standard}},
    };
    std::ostringstream table;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& row = rows[k];
        auto all = std::vector<Gate>{};
        for (std::size_t q = 0; q < row.enc.size(); ++q) all.push_back(Gate::ry(q, row.enc[q]));
        all.insert(all.end(), row.gates.begin(), row.gates.end());
        const auto c = noise::census(all);
        const double alpha = noise::contraction_alpha(row.model, c);
        qsim::QuantumState clean = qsim::prepare_angle_state(row.enc);
        qsim::apply_circuit_inplace(clean, row.gates);
        const auto z = qsim::expect_z_all(clean);
        const auto zt = noise::mean_trajectory_expectations(row.enc, row.gates, row.model, trajectories,
                                                            derive_seed(seed, {stream::kTrajectory, 10 + k}));
        double worst = 0.0;
        for (std::size_t q = 0; q < z.size(); ++q) worst = std::max(worst, std::abs(zt[q] - alpha * z[q]));
        res.lines.push_back({fmt("circuit %s: trajectory mean = alpha z", row.name), worst <= 0.01,
                             fmt("zeta1=%.5f zeta2=%.5f n1=%zu n2=%zu alpha=%.5f max|z_mc - alpha z|=%.5f tol=0.01",
                                 row.model.zeta1(), row.model.zeta2(), c.n1, c.n2, alpha, worst)});
    }
    return res;
}

SuiteResult gradient_suite(std::uint64_t seed, std::size_t circuits, double tolerance) {
    SuiteResult res{"gradient", {}};
    Rng rng = make_rng(seed, {stream::kInit, 77});
    qas::SearchSpace space;
    space.num_qubits = 3;
    space.max_depth = 2;
    space.min_depth = 2;
    const qas::LogitTablePolicy policy(space);
    const std::vector<double> phi(policy.num_parameters(), 0.0);
    std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
    std::normal_distribution<double> g(0.0, 1.0);
    const double h = 1e-5;

    double worst_theta = 0.0, worst_enc = 0.0;
    for (std::size_t c = 0; c < circuits; ++c) {
        vqc::Model m;
        m.arch = policy.sample(phi, rng).arch;
        m.head.num_classes = 2;
        m.encoder = tt::TTLinear::random({2, 4}, {3, 1}, {1, 2, 1}, rng);
        m.params.theta.resize(m.arch.rotation_count());
        for (double& t : m.params.theta) t = angle(rng);
        std::vector<Example> batch(4);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            batch[i].x.resize(8);
            for (double& v : batch[i].x) v = g(rng);
            batch[i].y = static_cast<int>(i % 2);
        }
        vqc::EvalOptions opts;
        if (c % 2) opts.noise = noise::NoiseModel{0.001, 0.001, 0.01, 0.0, noise::Convention::Standard};

        const auto grad = vqc::gradient(batch, m, opts, vqc::GradientMethod::ParameterShift);
        const auto analytic = grad.flat();
        auto flat = m.flat_parameters();
        std::vector<double> fd(flat.size());
        for (std::size_t i = 0; i < flat.size(); ++i) {
            auto p = flat;
            p[i] += h;
            m.set_flat_parameters(p);
            const double lp = vqc::loss(batch, m, opts);
            p[i] -= 2 * h;
            m.set_flat_parameters(p);
            const double lm = vqc::loss(batch, m, opts);
            fd[i] = (lp - lm) / (2 * h);
        }
        m.set_flat_parameters(flat);

        const std::size_t nt = m.params.theta.size();
        auto rel = [&](std::size_t lo, std::size_t hi) {
            double num = 0.0, den = 0.0;
            for (std::size_t i = lo; i < hi; ++i) {
                num += (analytic[i] - fd[i]) * (analytic[i] - fd[i]);
                den += fd[i] * fd[i];
            }
            return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
        };
        const double e_theta = rel(0, nt), e_enc = rel(nt, flat.size());
        worst_theta = std::max(worst_theta, e_theta);
        worst_enc = std::max(worst_enc, e_enc);
        res.lines.push_back({fmt("circuit %zu (%s, %zu angles)", c, opts.noise ? "noisy head" : "clean head", nt),
                             e_theta < tolerance && e_enc < tolerance,
                             fmt("rel err theta=%.3e encoder=%.3e", e_theta, e_enc)});
    }
    res.lines.push_back({"max relative error over circuit angles", worst_theta < tolerance,
                         fmt("%.3e (threshold %.0e)", worst_theta, tolerance)});
    res.lines.push_back({"max relative error over TT encoder cores", worst_enc < tolerance,
                         fmt("%.3e (threshold %.0e)", worst_enc, tolerance)});
    return res;
}

RobustnessOptions default_robustness_options(std::uint64_t seed) {
    RobustnessOptions o;
    o.seed = seed;
    auto tasks = data::gen_financial(seed);
    tasks.resize(3);
    o.tasks = std::move(tasks);
    auto& h = o.harness;
    h.space.num_qubits = 8;
    h.space.max_depth = 2;
    h.space.min_depth = 1;
    h.epochs = 3;
    h.finetune_epochs = 3;
    h.batch = 32;
    h.adam.lr = 0.05;
    h.candidates = 3;
    h.rounds = 2;
    h.fisher_samples = 32;
    h.tt_probe_samples = 8;
    h.audit_samples = 10;
    h.audit_trajectories = 1000;
    return o;
}

std::vector<noise::NoiseModel> robustness_grid() {
    std::vector<noise::NoiseModel> grid;
    for (double pr : {0.0, 0.01})
        for (double p1 : {0.0, 0.001, 0.005})
            for (double p2 : {0.0, 0.001, 0.005}) grid.push_back(noise::NoiseModel{p1, p2, pr, 0.0, noise::Convention::Standard});
    return grid;
}

SuiteResult robustness_suite(const RobustnessOptions& opts) {
    SuiteResult res{"robustness", {}};
    harness::HarnessConfig cfg = opts.harness;
    cfg.noise.reset();
    cfg.audit = false;
    cfg.validate();
    const auto grid = robustness_grid();
    const qas::LogitTablePolicy policy(cfg.space);
    harness::LearnerState state = harness::initial_state(cfg, opts.seed);

    std::size_t held = 0, total = 0;
    double worst_ratio = 0.0;
    double vqc_sum = 0.0;
    for (const auto& task : opts.tasks) {
        const auto rec = harness::run_task(task, state, harness::Method::ClQas, cfg, opts.seed, vqc_sum);
        vqc_sum += rec.vqc_loss;
        const auto model = harness::gather_model(rec.arch, state, cfg);
        harness::AuditOptions ao;
        ao.loss_lambda = cfg.loss_lambda;
        ao.kappa = cfg.kappa;
        for (const auto& c : rec.candidates) ao.c_pi_hat = std::max(ao.c_pi_hat, std::abs(c.logprob));
        ao.logprob = policy.log_prob(state.policy.phi, cfg.space.encode(rec.arch));
        ao.samples = cfg.audit_samples;
        ao.trajectories = cfg.audit_trajectories;

        for (std::size_t k = 0; k < grid.size(); ++k) {
            const auto& nm = grid[k];
            ao.seed = derive_seed(opts.seed, {stream::kTrajectory, task.task_id, 1000 + k});
            const auto row = harness::robustness_audit(model, task, nm, ao);
            const bool ok = row.holds() && std::abs(row.noisy_loss - row.clean_loss) <= row.lemma5_bound + 1e-12;
            held += ok;
            ++total;
            if (row.rhs > 0.0) worst_ratio = std::max(worst_ratio, row.lhs / row.rhs);
            res.lines.push_back(
                {fmt("task %zu p1=%.3f p2=%.3f pr=%.2f", task.task_id, nm.p1, nm.p2, nm.pr), ok,
                 fmt("LHS=%.4e RHS=%.4e |dL|=%.4e loss bound=%.4e alpha=%.4f delta=%.4f eps_c=%.4f", row.lhs, row.rhs,
                     std::abs(row.noisy_loss - row.clean_loss), row.lemma5_bound, row.alpha, row.delta_hat,
                     row.eps_c_hat)});
        }

        harness::LearnerState next = state;
        Rng rng = make_rng(opts.seed, {stream::kFisher, task.task_id});
        next.policy = harness::consolidate(policy, state.policy, cfg.fisher_samples, rng);
        state = std::move(next);
    }
    res.lines.push_back({"LHS <= RHS on every (model, noise) pair", held == total,
                         fmt("%zu/%zu, max LHS/RHS=%.4f", held, total, worst_ratio)});
    return res;
}

} // namespace clqas::theory
