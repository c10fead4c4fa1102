#include "clqas/architecture.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "clqas/errors.hpp"

namespace clqas::qas {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> words(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

std::size_t parse_index(const std::string& s, const std::string& context) {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }))
        throw ParseError("architecture tokens: bad number '" + s + "' in " + context, 0);
    return static_cast<std::size_t>(std::stoull(s));
}

} // namespace

std::string to_string(Rotation r) {
    switch (r) {
    case Rotation::RX: return "RX";
    case Rotation::RY: return "RY";
    case Rotation::RZ: return "RZ";
    case Rotation::RXYZ: return "RXYZ";
    case Rotation::I: return "I";
    }
    return "?";
}

std::string to_string(Entangler e) {
    switch (e) {
    case Entangler::Chain: return "chain";
    case Entangler::Ring: return "ring";
    case Entangler::None: return "none";
    }
    return "?";
}

Rotation rotation_from_string(const std::string& s) {
    if (s == "RX") return Rotation::RX;
    if (s == "RY") return Rotation::RY;
    if (s == "RZ") return Rotation::RZ;
    if (s == "RXYZ") return Rotation::RXYZ;
    if (s == "I") return Rotation::I;
    throw ConfigError("unknown rotation '" + s + "' (expected RX, RY, RZ, RXYZ or I)");
}

Entangler entangler_from_string(const std::string& s) {
    if (s == "chain") return Entangler::Chain;
    if (s == "ring") return Entangler::Ring;
    if (s == "none") return Entangler::None;
    throw ConfigError("unknown entangler '" + s + "' (expected chain, ring or none)");
}

std::size_t Architecture::cnot_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers) {
        if (layer.entangler == Entangler::None || num_qubits < 2) continue;
        n += num_qubits - 1;
        if (layer.entangler == Entangler::Ring && num_qubits > 2) n += 1;
    }
    return n;
}

std::size_t Architecture::rotation_count() const { return parameter_slots().size(); }

std::vector<std::size_t> Architecture::parameter_slots() const {
    std::vector<std::size_t> slots;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        for (std::size_t u = 0; u < num_qubits; ++u) {
            switch (layers[l].rotations[u]) {
            case Rotation::RX: slots.push_back(bank_slot(num_qubits, l, u, 0)); break;
            case Rotation::RY: slots.push_back(bank_slot(num_qubits, l, u, 1)); break;
            case Rotation::RZ: slots.push_back(bank_slot(num_qubits, l, u, 2)); break;
            case Rotation::RXYZ:
                for (std::size_t a = 0; a < 3; ++a) slots.push_back(bank_slot(num_qubits, l, u, a));
                break;
            case Rotation::I: break;
            }
        }
    }
    return slots;
}

void Architecture::validate() const {
    if (num_qubits == 0) throw ConfigError("architecture: zero qubits");
    if (layers.empty()) throw ConfigError("architecture: depth must be >= 1");
    for (const auto& layer : layers)
        if (layer.rotations.size() != num_qubits)
            throw ConfigError("architecture: layer has " + std::to_string(layer.rotations.size()) +
                              " rotation choices for " + std::to_string(num_qubits) + " qubits");
}

std::string Architecture::to_tokens() const {
    std::ostringstream out;
    out << 'L' << layers.size() << " | ";
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (l > 0) out << " ; ";
        for (std::size_t u = 0; u < num_qubits; ++u) out << 'q' << u << ':' << to_string(layers[l].rotations[u]) << ' ';
        out << "| ent:" << to_string(layers[l].entangler);
    }
    return out.str();
}

Architecture Architecture::from_tokens(const std::string& tokens) {
    const auto bar = tokens.find('|');
    if (bar == std::string::npos) throw ParseError("architecture tokens: missing '|' after depth", 0);
    const std::string head = trim(tokens.substr(0, bar));
    if (head.size() < 2 || head[0] != 'L') throw ParseError("architecture tokens: expected 'L<depth>'", 0);
    const std::size_t depth = parse_index(head.substr(1), "depth");

    Architecture arch;
    for (const std::string& chunk : split(tokens.substr(bar + 1), ';')) {
        const auto parts = split(chunk, '|');
        if (parts.size() != 2) throw ParseError("architecture tokens: layer needs '<rotations> | ent:<pattern>'", 0);
        LayerSpec layer;
        const auto qs = words(parts[0]);
        for (std::size_t u = 0; u < qs.size(); ++u) {
            const auto colon = qs[u].find(':');
            if (qs[u].empty() || qs[u][0] != 'q' || colon == std::string::npos)
                throw ParseError("architecture tokens: bad qubit token '" + qs[u] + "'", 0);
            if (parse_index(qs[u].substr(1, colon - 1), "qubit token") != u)
                throw ParseError("architecture tokens: qubit tokens out of order", 0);
            layer.rotations.push_back(rotation_from_string(qs[u].substr(colon + 1)));
        }
        const std::string ent = trim(parts[1]);
        if (ent.rfind("ent:", 0) != 0) throw ParseError("architecture tokens: expected 'ent:<pattern>'", 0);
        layer.entangler = entangler_from_string(ent.substr(4));
        if (arch.layers.empty())
            arch.num_qubits = layer.rotations.size();
        arch.layers.push_back(std::move(layer));
    }
    if (arch.layers.size() != depth)
        throw ParseError("architecture tokens: header depth " + std::to_string(depth) + " but " +
                             std::to_string(arch.layers.size()) + " layers listed",
                         0);
    arch.validate();
    return arch;
}

Architecture Architecture::baseline(std::size_t num_qubits, std::size_t layers) {
    Architecture a;
    a.num_qubits = num_qubits;
    a.layers.assign(layers, LayerSpec{std::vector<Rotation>(num_qubits, Rotation::RXYZ), Entangler::Chain});
    return a;
}

std::size_t DecisionSpace::num_logits() const { return std::accumulate(arities.begin(), arities.end(), std::size_t{0}); }

std::size_t DecisionSpace::offset(std::size_t pos) const {
    if (pos >= arities.size()) throw ShapeError("decision position out of range");
    return std::accumulate(arities.begin(), arities.begin() + static_cast<std::ptrdiff_t>(pos), std::size_t{0});
}

void SearchSpace::validate() const {
    if (num_qubits == 0) throw ConfigError("search space: num_qubits must be >= 1");
    if (min_depth == 0 || min_depth > max_depth) throw ConfigError("search space: need 1 <= min_depth <= max_depth");
    if (rotations.empty()) throw ConfigError("search space: empty rotation set");
    if (entanglers.empty()) throw ConfigError("search space: empty entangler set");
}

DecisionSpace SearchSpace::decision_space() const {
    validate();
    DecisionSpace d;
    d.arities.push_back(max_depth - min_depth + 1);
    for (std::size_t l = 0; l < max_depth; ++l) {
        for (std::size_t u = 0; u < num_qubits; ++u) d.arities.push_back(rotations.size());
        d.arities.push_back(entanglers.size());
    }
    return d;
}

Architecture SearchSpace::decode(const std::vector<int>& decisions) const {
    const DecisionSpace ds = decision_space();
    if (decisions.size() != ds.num_positions()) throw ShapeError("decode: decision vector length mismatch");
    auto pick = [&](std::size_t pos) {
        const int c = decisions[pos];
        if (c < 0 || static_cast<std::size_t>(c) >= ds.arities[pos])
            throw ShapeError("decode: decision out of range at position " + std::to_string(pos));
        return static_cast<std::size_t>(c);
    };
    Architecture a;
    a.num_qubits = num_qubits;
    const std::size_t depth = min_depth + pick(depth_position());
    for (std::size_t l = 0; l < depth; ++l) {
        LayerSpec layer;
        for (std::size_t u = 0; u < num_qubits; ++u) layer.rotations.push_back(rotations[pick(rotation_position(l, u))]);
        layer.entangler = entanglers[pick(entangler_position(l))];
        a.layers.push_back(std::move(layer));
    }
    return a;
}

std::vector<int> SearchSpace::encode(const Architecture& arch) const {
    const DecisionSpace ds = decision_space();
    if (arch.num_qubits != num_qubits) throw ConfigError("encode: qubit count outside the search space");
    if (arch.depth() < min_depth || arch.depth() > max_depth) throw ConfigError("encode: depth outside the search space");
    std::vector<int> d(ds.num_positions(), -1);
    d[depth_position()] = static_cast<int>(arch.depth() - min_depth);
    for (std::size_t l = 0; l < arch.depth(); ++l) {
        for (std::size_t u = 0; u < num_qubits; ++u) {
            const auto it = std::find(rotations.begin(), rotations.end(), arch.layers[l].rotations[u]);
            if (it == rotations.end()) throw ConfigError("encode: rotation outside the search space");
            d[rotation_position(l, u)] = static_cast<int>(it - rotations.begin());
        }
        const auto it = std::find(entanglers.begin(), entanglers.end(), arch.layers[l].entangler);
        if (it == entanglers.end()) throw ConfigError("encode: entangler outside the search space");
        d[entangler_position(l)] = static_cast<int>(it - entanglers.begin());
    }
    return d;
}

SearchSpace SearchSpace::degenerate_baseline(std::size_t num_qubits, std::size_t depth) {
    SearchSpace s;
    s.num_qubits = num_qubits;
    s.max_depth = depth;
    s.min_depth = depth;
    s.rotations = {Rotation::RXYZ};
    s.entanglers = {Entangler::Chain};
    return s;
}

} // namespace clqas::qas
