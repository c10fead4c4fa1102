#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace clqas::qas {

/// Per-qubit rotation choice inside one layer. RXYZ emits RX, RY, RZ in that order.
enum class Rotation { RX, RY, RZ, RXYZ, I };

/// CNOT pattern closing a layer. Ring adds CNOT(U-1, 0) to the chain when U > 2.
enum class Entangler { Chain, Ring, None };

std::string to_string(Rotation r);
std::string to_string(Entangler e);
Rotation rotation_from_string(const std::string& s);
Entangler entangler_from_string(const std::string& s);

struct LayerSpec {
    std::vector<Rotation> rotations; // one per qubit
    Entangler entangler = Entangler::Chain;

    bool operator==(const LayerSpec&) const = default;
};

/**
 * Discrete gate layout: a stack of layers, each choosing one rotation block
 * per qubit followed by an entangler pattern.
 *
 * Canonical token form, e.g. for two layers on two qubits:
 *   "L2 | q0:RY q1:RXYZ | ent:chain ; q0:I q1:RZ | ent:none"
 */
struct Architecture {
    std::size_t num_qubits = 0;
    std::vector<LayerSpec> layers;

    std::size_t depth() const noexcept { return layers.size(); }
    std::size_t cnot_count() const;
    std::size_t rotation_count() const;

    /// Index into a parameter bank of 3 * U * L_max angles for every
    /// rotation this architecture emits, in emission order.
    std::vector<std::size_t> parameter_slots() const;

    std::string to_tokens() const;
    static Architecture from_tokens(const std::string& tokens);

    /// RXYZ on every qubit and a chain entangler, repeated `layers` times.
    static Architecture baseline(std::size_t num_qubits, std::size_t layers);

    /// Throws ConfigError on an empty stack or per-layer qubit count mismatch.
    void validate() const;

    bool operator==(const Architecture&) const = default;
};

/// Angles in the shared parameter bank for U qubits and up to max_layers layers.
constexpr std::size_t bank_size(std::size_t num_qubits, std::size_t max_layers) { return 3 * num_qubits * max_layers; }

/// Bank slot of (layer, qubit, axis) with axis 0/1/2 for X/Y/Z.
constexpr std::size_t bank_slot(std::size_t num_qubits, std::size_t layer, std::size_t qubit, std::size_t axis) {
    return (layer * num_qubits + qubit) * 3 + axis;
}

/// Categorical decision positions, each with its own number of choices.
struct DecisionSpace {
    std::vector<std::size_t> arities;

    std::size_t num_positions() const noexcept { return arities.size(); }
    std::size_t num_logits() const;
    /// Offset of the first logit of position `pos` inside phi.
    std::size_t offset(std::size_t pos) const;
};

/**
 * The searchable set of architectures, laid out as an autoregressive
 * decision sequence: depth first, then for each layer the U rotation choices
 * followed by the entangler. Positions belonging to layers at or beyond the
 * sampled depth are inactive (decision -1).
 */
struct SearchSpace {
    std::size_t num_qubits = 8;
    std::size_t max_depth = 4;
    std::size_t min_depth = 1;
    std::vector<Rotation> rotations{Rotation::RX, Rotation::RY, Rotation::RZ, Rotation::RXYZ, Rotation::I};
    std::vector<Entangler> entanglers{Entangler::Chain, Entangler::Ring, Entangler::None};

    void validate() const;
    DecisionSpace decision_space() const;

    std::size_t depth_position() const noexcept { return 0; }
    std::size_t rotation_position(std::size_t layer, std::size_t qubit) const noexcept {
        return 1 + layer * (num_qubits + 1) + qubit;
    }
    std::size_t entangler_position(std::size_t layer) const noexcept { return 1 + layer * (num_qubits + 1) + num_qubits; }

    Architecture decode(const std::vector<int>& decisions) const;
    /// Throws ConfigError if the architecture lies outside the space.
    std::vector<int> encode(const Architecture& arch) const;

    /// Single-point space containing only Architecture::baseline(U, depth).
    static SearchSpace degenerate_baseline(std::size_t num_qubits, std::size_t depth);
};

} // namespace clqas::qas
