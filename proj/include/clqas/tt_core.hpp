#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "clqas/rng.hpp"

namespace clqas::tt {

/// 3-way core of shape (r_left, mode, r_right), row-major.
struct Core3 {
    std::size_t r_left = 1, mode = 1, r_right = 1;
    std::vector<double> data;

    Core3() = default;
    Core3(std::size_t rl, std::size_t m, std::size_t rr) : r_left(rl), mode(m), r_right(rr), data(rl * m * rr, 0.0) {}

    double& operator()(std::size_t a, std::size_t i, std::size_t b) { return data[(a * mode + i) * r_right + b]; }
    double operator()(std::size_t a, std::size_t i, std::size_t b) const { return data[(a * mode + i) * r_right + b]; }
};

/**
 * Tensor-train representation of a dense vector of length prod(modes).
 *
 * The dense index is row-major over the mode multi-index: the first mode is
 * the most significant digit. ranks has modes.size()+1 entries with
 * ranks.front() == ranks.back() == 1.
 */
struct TTVector {
    std::vector<std::size_t> modes;
    std::vector<std::size_t> ranks;
    std::vector<Core3> cores;

    std::size_t size() const;
    /// Throws ShapeError if ranks/modes/core shapes disagree.
    void validate() const;
};

struct TTDecompositionReport {
    double eps_tt = 0.0;
    /// Singular values dropped at each unfolding (one list per cut u = 1..U-1).
    std::vector<std::vector<double>> discarded_singular_values;
    double rho = 0.0;
    double fidelity_lower_bound = 0.0;
    /// Set when rho could not be formed (zero input) or rho >= 1.
    bool rho_undefined = false;

    /// sqrt of the sum of squares of every discarded singular value.
    double discarded_norm() const;
};

struct TTDecomposition {
    TTVector tt;
    TTDecompositionReport report;
};

/// Sequential truncated SVD of the unfoldings, left to right.
TTDecomposition tt_svd(std::span<const double> x, std::span<const std::size_t> modes, std::size_t max_rank);

/// Dense vector by contracting the cores left to right.
std::vector<double> tt_reconstruct(const TTVector& tt);

/// ((1-rho)/(1+rho))^2 with rho = eps_tt / x_norm, or 0 when rho >= 1.
double fidelity_lower_bound(double eps_tt, double x_norm);

/// 4-way core of shape (r_left, in_mode, out_mode, r_right), row-major.
struct Core4 {
    std::size_t r_left = 1, in_mode = 1, out_mode = 1, r_right = 1;
    std::vector<double> data;

    Core4() = default;
    Core4(std::size_t rl, std::size_t m, std::size_t n, std::size_t rr)
        : r_left(rl), in_mode(m), out_mode(n), r_right(rr), data(rl * m * n * rr, 0.0) {}

    std::size_t index(std::size_t a, std::size_t i, std::size_t j, std::size_t b) const {
        return ((a * in_mode + i) * out_mode + j) * r_right + b;
    }
    double& operator()(std::size_t a, std::size_t i, std::size_t j, std::size_t b) { return data[index(a, i, j, b)]; }
    double operator()(std::size_t a, std::size_t i, std::size_t j, std::size_t b) const { return data[index(a, i, j, b)]; }
};

/**
 * Linear map R^{prod(input_modes)} -> R^{prod(output_modes)} whose weight
 * matrix is stored as a tensor train:
 *
 *   W[j_1..j_d, i_1..i_d] = G_1[:, i_1, j_1, :] G_2[:, i_2, j_2, :] ... G_d[:, i_d, j_d, :]
 *
 * Both multi-indices are row-major with the first mode most significant.
 */
class TTLinear {
public:
    TTLinear() = default;
    /// Zero-initialised cores.
    TTLinear(std::vector<std::size_t> input_modes, std::vector<std::size_t> output_modes,
             std::vector<std::size_t> ranks);

    /// Entries i.i.d. uniform in [-a, a], a = (1/sqrt(fan_in))^(1/num_cores).
    static TTLinear random(std::vector<std::size_t> input_modes, std::vector<std::size_t> output_modes,
                           std::vector<std::size_t> ranks, Rng& rng);

    const std::vector<std::size_t>& input_modes() const noexcept { return input_modes_; }
    const std::vector<std::size_t>& output_modes() const noexcept { return output_modes_; }
    const std::vector<std::size_t>& ranks() const noexcept { return ranks_; }
    std::size_t input_dim() const noexcept;
    std::size_t output_dim() const noexcept;
    std::size_t num_cores() const noexcept { return cores_.size(); }
    std::size_t parameter_count() const noexcept;

    std::vector<Core4>& cores() noexcept { return cores_; }
    const std::vector<Core4>& cores() const noexcept { return cores_; }

    bool trainable = true;

    /// All core entries, core by core, flattened.
    std::vector<double> flat_parameters() const;
    void set_flat_parameters(std::span<const double> flat);

    /// Dense (output_dim x input_dim) row-major weight matrix.
    std::vector<double> materialize() const;

private:
    std::vector<std::size_t> input_modes_, output_modes_, ranks_;
    std::vector<Core4> cores_;
};

/// Apply the TT-factorised map by sequential core contraction.
std::vector<double> tt_linear_forward(std::span<const double> input, const TTLinear& w);

/// Gradients of <upstream, W x> with respect to every core entry (same layout as w.cores()).
std::vector<Core4> tt_linear_grad(std::span<const double> input, const TTLinear& w, std::span<const double> upstream);

/**
 * Gradients with respect to the cores given the gradient with respect to the
 * dense weight matrix (output_dim x input_dim, row-major). Lets a batch
 * accumulate one dense outer-product sum and chain it once.
 */
std::vector<Core4> tt_linear_grad_from_dense(const TTLinear& w, std::span<const double> dense_grad);

} // namespace clqas::tt
