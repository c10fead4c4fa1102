#include "clqas/vqc_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "clqas/errors.hpp"

namespace clqas::vqc {

namespace {

std::vector<double> softmax_first(std::span<const double> z, std::size_t k) {
    std::vector<double> p(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(k));
    const double m = *std::max_element(p.begin(), p.end());
    double s = 0.0;
    for (double& v : p) {
        v = std::exp(v - m);
        s += v;
    }
    for (double& v : p) v /= s;
    return p;
}

double alpha_of(const Model& model, const EvalOptions& opts) {
    if (!opts.noise) return 1.0;
    return noise::contraction_alpha(*opts.noise, circuit_census(model.arch));
}

std::vector<double> matvec(const std::vector<double>& w, std::size_t rows, std::span<const double> x) {
    std::vector<double> y(rows, 0.0);
    const std::size_t cols = x.size();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = w.data() + r * cols;
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
    return y;
}

void check_batch(std::span<const Example> batch, const Model& model) {
    if (batch.empty()) throw DomainError("empty batch");
    for (const Example& e : batch) {
        if (e.y < 0 || static_cast<std::size_t>(e.y) >= model.head.num_classes)
            throw DomainError("label " + std::to_string(e.y) + " outside [0, K)");
        if (e.x.size() != model.encoder.input_dim()) throw ShapeError("feature length does not match the encoder input");
    }
}

// d sum_k w_k z_k / d(angle of each rotation gate), by the two-term shift rule.
std::vector<double> shift_rule_derivatives(const std::vector<qsim::Gate>& gates, std::size_t num_qubits,
                                           std::span<const double> weights) {
    std::vector<double> d(gates.size(), 0.0);
    std::vector<qsim::Gate> shifted = gates;
    auto eval = [&]() {
        qsim::QuantumState s(num_qubits);
        qsim::apply_circuit_inplace(s, shifted);
        const auto z = qsim::expect_z_all(s);
        double f = 0.0;
        for (std::size_t k = 0; k < weights.size(); ++k) f += weights[k] * z[k];
        return f;
    };
    for (std::size_t g = 0; g < gates.size(); ++g) {
        if (!gates[g].is_rotation()) continue;
        shifted[g].angle = gates[g].angle + std::numbers::pi / 2;
        const double plus = eval();
        shifted[g].angle = gates[g].angle - std::numbers::pi / 2;
        const double minus = eval();
        shifted[g].angle = gates[g].angle;
        d[g] = 0.5 * (plus - minus);
    }
    return d;
}

} // namespace

void ClassifierHead::validate(std::size_t num_qubits) const {
    if (num_classes < 2) throw ConfigError("classifier head needs at least 2 classes");
    if (num_classes >= num_qubits)
        throw ConfigError("classifier head: K = " + std::to_string(num_classes) + " must be below the qubit count " +
                          std::to_string(num_qubits));
}

CircuitParams CircuitParams::random(const qas::Architecture& arch, Rng& rng) {
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    CircuitParams p;
    p.theta.resize(arch.rotation_count());
    for (double& t : p.theta) t = u(rng);
    return p;
}

CircuitParams CircuitParams::zeros(const qas::Architecture& arch) {
    return CircuitParams{std::vector<double>(arch.rotation_count(), 0.0)};
}

std::vector<double> Model::flat_parameters() const {
    std::vector<double> flat = params.theta;
    if (encoder.trainable) {
        const auto e = encoder.flat_parameters();
        flat.insert(flat.end(), e.begin(), e.end());
    }
    return flat;
}

void Model::set_flat_parameters(std::span<const double> flat) {
    if (flat.size() != num_trainable()) throw ShapeError("Model::set_flat_parameters: length mismatch");
    std::copy(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(params.theta.size()), params.theta.begin());
    if (encoder.trainable) encoder.set_flat_parameters(flat.subspan(params.theta.size()));
}

std::size_t Model::num_trainable() const {
    return params.theta.size() + (encoder.trainable ? encoder.parameter_count() : 0);
}

std::vector<qsim::Gate> build_circuit(const qas::Architecture& arch, const CircuitParams& params) {
    arch.validate();
    if (params.theta.size() != arch.rotation_count())
        throw ShapeError("build_circuit: " + std::to_string(params.theta.size()) + " parameters for " +
                         std::to_string(arch.rotation_count()) + " rotation slots");
    const std::size_t u_count = arch.num_qubits;
    std::vector<qsim::Gate> gates;
    std::size_t slot = 0;
    for (const auto& layer : arch.layers) {
        for (std::size_t u = 0; u < u_count; ++u) {
            auto emit = [&](qsim::GateKind k) {
                gates.push_back(qsim::Gate{k, u, 0, params.theta[slot], slot});
                ++slot;
            };
            switch (layer.rotations[u]) {
            case qas::Rotation::RX: emit(qsim::GateKind::RX); break;
            case qas::Rotation::RY: emit(qsim::GateKind::RY); break;
            case qas::Rotation::RZ: emit(qsim::GateKind::RZ); break;
            case qas::Rotation::RXYZ:
                emit(qsim::GateKind::RX);
                emit(qsim::GateKind::RY);
                emit(qsim::GateKind::RZ);
                break;
            case qas::Rotation::I: break;
            }
        }
        if (layer.entangler == qas::Entangler::None || u_count < 2) continue;
        for (std::size_t u = 0; u + 1 < u_count; ++u) gates.push_back(qsim::Gate::cnot(u, u + 1));
        if (layer.entangler == qas::Entangler::Ring && u_count > 2) gates.push_back(qsim::Gate::cnot(u_count - 1, 0));
    }
    return gates;
}

std::vector<qsim::Gate> encoding_gates(std::span<const double> angles) {
    std::vector<qsim::Gate> gates;
    gates.reserve(angles.size());
    for (std::size_t u = 0; u < angles.size(); ++u) gates.push_back(qsim::Gate::ry(u, angles[u]));
    return gates;
}

noise::GateCensus circuit_census(const qas::Architecture& arch) {
    return noise::GateCensus{arch.num_qubits + arch.rotation_count(), arch.cnot_count()};
}

std::vector<double> expectations(std::span<const double> x, const Model& model, const EvalOptions& opts) {
    if (model.encoder.output_dim() != model.arch.num_qubits)
        throw ShapeError("encoder output dimension must equal the qubit count");
    const auto angles = tt::tt_linear_forward(x, model.encoder);
    qsim::QuantumState state = qsim::prepare_angle_state(angles);
    qsim::apply_circuit_inplace(state, build_circuit(model.arch, model.params));
    std::vector<double> z;
    if (opts.shots > 0) {
        if (!opts.rng) throw ConfigError("shot-mode evaluation needs an RNG");
        z = qsim::sample_bitstrings(state, opts.shots, *opts.rng).z;
    } else {
        z = qsim::expect_z_all(state);
    }
    if (opts.noise) z = noise::apply_expectation_noise(z, alpha_of(model, opts));
    return z;
}

std::vector<double> forward(std::span<const double> x, const Model& model, const EvalOptions& opts) {
    model.head.validate(model.arch.num_qubits);
    return softmax_first(expectations(x, model, opts), model.head.num_classes);
}

int predict(std::span<const double> x, const Model& model, const EvalOptions& opts) {
    const auto p = forward(x, model, opts);
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

double mean_cross_entropy(const std::vector<std::vector<double>>& probs, std::span<const int> labels) {
    if (probs.empty()) throw DomainError("cross-entropy of an empty batch");
    if (probs.size() != labels.size()) throw ShapeError("cross-entropy: probability and label counts differ");
    double l = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= probs[i].size())
            throw DomainError("cross-entropy: label outside [0, K)");
        l -= std::log(probs[i][static_cast<std::size_t>(labels[i])]);
    }
    return l / static_cast<double>(probs.size());
}

double loss(std::span<const Example> batch, const Model& model, const EvalOptions& opts) {
    check_batch(batch, model);
    std::vector<std::vector<double>> probs;
    std::vector<int> labels;
    for (const Example& e : batch) {
        probs.push_back(forward(e.x, model, opts));
        labels.push_back(e.y);
    }
    return mean_cross_entropy(probs, labels);
}

std::vector<double> Gradient::flat() const {
    std::vector<double> f = theta;
    for (const auto& c : encoder) f.insert(f.end(), c.data.begin(), c.data.end());
    return f;
}

double Gradient::squared_norm() const {
    double s = 0.0;
    for (double v : theta) s += v * v;
    for (const auto& c : encoder)
        for (double v : c.data) s += v * v;
    return s;
}

Gradient gradient(std::span<const Example> batch, const Model& model, const EvalOptions& opts, GradientMethod method) {
    if (opts.shots > 0) throw UnsupportedModeError("gradients are only available with exact expectations (shots = 0)");
    model.head.validate(model.arch.num_qubits);
    check_batch(batch, model);
    const std::size_t u_count = model.arch.num_qubits, k_count = model.head.num_classes;
    if (model.encoder.output_dim() != u_count) throw ShapeError("encoder output dimension must equal the qubit count");

    const double alpha = alpha_of(model, opts);
    const auto w = model.encoder.materialize();
    const std::size_t in_dim = model.encoder.input_dim();
    const auto circuit = build_circuit(model.arch, model.params);
    const double inv_b = 1.0 / static_cast<double>(batch.size());

    Gradient g;
    g.theta.assign(model.params.theta.size(), 0.0);
    std::vector<double> dense(model.encoder.trainable ? u_count * in_dim : 0, 0.0);

    std::vector<qsim::Gate> gates;
    for (const Example& e : batch) {
        const auto angles = matvec(w, u_count, e.x);
        gates = encoding_gates(angles);
        gates.insert(gates.end(), circuit.begin(), circuit.end());

        qsim::QuantumState s(u_count);
        qsim::apply_circuit_inplace(s, gates);
        const auto z = noise::apply_expectation_noise(qsim::expect_z_all(s), alpha);
        const auto p = softmax_first(z, k_count);
        g.loss -= std::log(p[static_cast<std::size_t>(e.y)]) * inv_b;

        // d loss / d <Z_k> of the noiseless expectations
        std::vector<double> weights(u_count, 0.0);
        for (std::size_t k = 0; k < k_count; ++k)
            weights[k] = alpha * (p[k] - (static_cast<int>(k) == e.y ? 1.0 : 0.0)) * inv_b;

        const std::vector<double> d = method == GradientMethod::Adjoint
                                          ? qsim::adjoint_gradient(qsim::QuantumState(u_count), gates, weights).gate_derivatives
                                          : shift_rule_derivatives(gates, u_count, weights);
        for (std::size_t i = u_count; i < gates.size(); ++i)
            if (gates[i].param_slot) g.theta[*gates[i].param_slot] += d[i];
        if (!dense.empty())
            for (std::size_t r = 0; r < u_count; ++r) {
                if (d[r] == 0.0) continue;
                double* row = dense.data() + r * in_dim;
                for (std::size_t c = 0; c < in_dim; ++c) row[c] += d[r] * e.x[c];
            }
    }
    if (!dense.empty()) g.encoder = tt::tt_linear_grad_from_dense(model.encoder, dense);
    return g;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& cfg) {
    if (params.size() != grads.size()) throw ShapeError("adam_step: parameter and gradient lengths differ");
    if (state.m.empty() && state.t == 0) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size() || state.v.size() != params.size())
        throw ShapeError("adam_step: optimizer state does not match the parameter vector");
    ++state.t;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
        const double mh = state.m[i] / c1, vh = state.v[i] / c2;
        params[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
    }
}

TrainLog train(Model& model, std::span<const Example> data, const TrainConfig& cfg, AdamState& adam) {
    if (data.empty()) throw DomainError("train: empty training set");
    if (cfg.batch == 0) throw ConfigError("train.batch must be >= 1");
    TrainLog log;
    EvalOptions opts;
    opts.noise = cfg.noise;
    std::vector<std::size_t> order(data.size());
    std::vector<Example> batch;
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng = make_rng(cfg.shuffle_seed, {stream::kShuffle, cfg.first_epoch + e});
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t end = std::min(order.size(), start + cfg.batch);
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
            const Gradient g = gradient(batch, model, opts, cfg.method);
            auto flat = model.flat_parameters();
            adam_step(flat, g.flat(), adam, cfg.adam);
            model.set_flat_parameters(flat);
            epoch_loss += g.loss;
            log.grad_norm_sq.push_back(g.squared_norm());
            ++steps;
        }
        log.epoch_loss.push_back(epoch_loss / static_cast<double>(steps));
    }
    return log;
}

double accuracy(std::span<const Example> data, const Model& model, const EvalOptions& opts) {
    if (data.empty()) throw DomainError("accuracy: empty data");
    std::size_t correct = 0;
    for (const Example& e : data) correct += predict(e.x, model, opts) == e.y;
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

} // namespace clqas::vqc
