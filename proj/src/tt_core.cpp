#include "clqas/tt_core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "clqas/errors.hpp"

namespace clqas::tt {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::size_t product(std::span<const std::size_t> v) {
    return std::accumulate(v.begin(), v.end(), std::size_t{1}, std::multiplies<>());
}

double norm2(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

void check_modes(std::span<const std::size_t> modes, const char* what) {
    if (modes.empty()) throw ShapeError(std::string(what) + ": empty mode list");
    for (std::size_t m : modes)
        if (m == 0) throw ShapeError(std::string(what) + ": zero mode size");
}

// Partial products of the leading cores: shape (out_prefix, in_prefix, rank).
struct Partial {
    std::size_t rows = 1, cols = 1, rank = 1;
    std::vector<double> data{1.0};
    double at(std::size_t j, std::size_t i, std::size_t a) const { return data[(j * cols + i) * rank + a]; }
};

// Partial products of the trailing cores: shape (rank, out_suffix, in_suffix).
struct Suffix {
    std::size_t rank = 1, rows = 1, cols = 1;
    std::vector<double> data{1.0};
    double at(std::size_t b, std::size_t j, std::size_t i) const { return data[(b * rows + j) * cols + i]; }
};

Partial extend_prefix(const Partial& p, const Core4& g) {
    Partial out;
    out.rows = p.rows * g.out_mode;
    out.cols = p.cols * g.in_mode;
    out.rank = g.r_right;
    out.data.assign(out.rows * out.cols * out.rank, 0.0);
    for (std::size_t jp = 0; jp < p.rows; ++jp)
        for (std::size_t ip = 0; ip < p.cols; ++ip)
            for (std::size_t a = 0; a < p.rank; ++a) {
                const double left = p.at(jp, ip, a);
                if (left == 0.0) continue;
                for (std::size_t i = 0; i < g.in_mode; ++i)
                    for (std::size_t j = 0; j < g.out_mode; ++j) {
                        double* dst = &out.data[((jp * g.out_mode + j) * out.cols + (ip * g.in_mode + i)) * out.rank];
                        for (std::size_t b = 0; b < g.r_right; ++b) dst[b] += left * g(a, i, j, b);
                    }
            }
    return out;
}

Suffix extend_suffix(const Core4& g, const Suffix& s) {
    Suffix out;
    out.rank = g.r_left;
    out.rows = g.out_mode * s.rows;
    out.cols = g.in_mode * s.cols;
    out.data.assign(out.rank * out.rows * out.cols, 0.0);
    for (std::size_t a = 0; a < g.r_left; ++a)
        for (std::size_t i = 0; i < g.in_mode; ++i)
            for (std::size_t j = 0; j < g.out_mode; ++j)
                for (std::size_t b = 0; b < g.r_right; ++b) {
                    const double w = g(a, i, j, b);
                    if (w == 0.0) continue;
                    for (std::size_t js = 0; js < s.rows; ++js)
                        for (std::size_t is = 0; is < s.cols; ++is)
                            out.data[(a * out.rows + j * s.rows + js) * out.cols + i * s.cols + is] += w * s.at(b, js, is);
                }
    return out;
}

} // namespace

std::size_t TTVector::size() const { return product(modes); }

void TTVector::validate() const {
    check_modes(modes, "TTVector");
    if (ranks.size() != modes.size() + 1) throw ShapeError("TTVector: ranks must have modes+1 entries");
    if (ranks.front() != 1 || ranks.back() != 1) throw ShapeError("TTVector: boundary ranks must be 1");
    if (cores.size() != modes.size()) throw ShapeError("TTVector: one core per mode required");
    for (std::size_t u = 0; u < cores.size(); ++u) {
        const Core3& c = cores[u];
        if (c.r_left != ranks[u] || c.mode != modes[u] || c.r_right != ranks[u + 1])
            throw ShapeError("TTVector: core " + std::to_string(u) + " shape does not match ranks/modes");
        if (c.data.size() != c.r_left * c.mode * c.r_right)
            throw ShapeError("TTVector: core " + std::to_string(u) + " storage size mismatch");
    }
}

double TTDecompositionReport::discarded_norm() const {
    double s = 0.0;
    for (const auto& cut : discarded_singular_values)
        for (double v : cut) s += v * v;
    return std::sqrt(s);
}

TTDecomposition tt_svd(std::span<const double> x, std::span<const std::size_t> modes, std::size_t max_rank) {
    check_modes(modes, "tt_svd");
    if (max_rank < 1) throw DomainError("tt_svd: max_rank must be >= 1");
    if (product(modes) != x.size())
        throw ShapeError("tt_svd: length " + std::to_string(x.size()) + " != product of modes " +
                         std::to_string(product(modes)));

    const std::size_t d = modes.size();
    TTDecomposition out;
    TTVector& tt = out.tt;
    tt.modes.assign(modes.begin(), modes.end());
    tt.ranks.assign(d + 1, 1);
    tt.cores.reserve(d);
    out.report.discarded_singular_values.resize(d - 1);

    const double x_norm = norm2(x);
    if (x_norm == 0.0) {
        for (std::size_t u = 0; u < d; ++u) tt.cores.emplace_back(1, modes[u], 1);
        out.report.rho_undefined = true;
        return out;
    }

    // Remainder C, row-major, reinterpreted at each step as (r_prev * m_u) x rest.
    std::vector<double> rem(x.begin(), x.end());
    std::size_t r_prev = 1;
    std::size_t rest = x.size();
    for (std::size_t u = 0; u + 1 < d; ++u) {
        const std::size_t rows = r_prev * modes[u];
        rest /= modes[u];
        Eigen::Map<const RowMatrix> unfolding(rem.data(), static_cast<Eigen::Index>(rows),
                                              static_cast<Eigen::Index>(rest));
        Eigen::BDCSVD<RowMatrix> svd(unfolding, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& s = svd.singularValues();
        const std::size_t full = static_cast<std::size_t>(s.size());
        const std::size_t r = std::min(max_rank, full);

        for (std::size_t j = r; j < full; ++j) out.report.discarded_singular_values[u].push_back(s[j]);

        Core3 core(r_prev, modes[u], r);
        const auto& U = svd.matrixU();
        for (std::size_t row = 0; row < rows; ++row)
            for (std::size_t b = 0; b < r; ++b)
                core.data[row * r + b] = U(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(b));
        tt.cores.push_back(std::move(core));
        tt.ranks[u + 1] = r;

        const auto& V = svd.matrixV();
        std::vector<double> next(r * rest);
        for (std::size_t b = 0; b < r; ++b)
            for (std::size_t c = 0; c < rest; ++c)
                next[b * rest + c] = s[static_cast<Eigen::Index>(b)] *
                                     V(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(b));
        rem = std::move(next);
        r_prev = r;
    }
    Core3 last(r_prev, modes[d - 1], 1);
    last.data = std::move(rem);
    tt.cores.push_back(std::move(last));

    const std::vector<double> approx = tt_reconstruct(tt);
    double err = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) err += (x[i] - approx[i]) * (x[i] - approx[i]);
    out.report.eps_tt = std::sqrt(err);
    out.report.rho = out.report.eps_tt / x_norm;
    out.report.rho_undefined = out.report.rho >= 1.0;
    out.report.fidelity_lower_bound = fidelity_lower_bound(out.report.eps_tt, x_norm);
    return out;
}

std::vector<double> tt_reconstruct(const TTVector& tt) {
    tt.validate();
    std::vector<double> cur{1.0};
    std::size_t prefix = 1;
    for (const Core3& g : tt.cores) {
        std::vector<double> next(prefix * g.mode * g.r_right, 0.0);
        for (std::size_t p = 0; p < prefix; ++p)
            for (std::size_t a = 0; a < g.r_left; ++a) {
                const double left = cur[p * g.r_left + a];
                if (left == 0.0) continue;
                for (std::size_t i = 0; i < g.mode; ++i)
                    for (std::size_t b = 0; b < g.r_right; ++b)
                        next[(p * g.mode + i) * g.r_right + b] += left * g(a, i, b);
            }
        cur = std::move(next);
        prefix *= g.mode;
    }
    return cur;
}

double fidelity_lower_bound(double eps_tt, double x_norm) {
    if (!(x_norm > 0.0)) throw DomainError("fidelity_lower_bound: x_norm must be positive");
    if (eps_tt < 0.0) throw DomainError("fidelity_lower_bound: eps_tt must be nonnegative");
    const double rho = eps_tt / x_norm;
    if (rho >= 1.0) return 0.0;
    const double q = (1.0 - rho) / (1.0 + rho);
    return q * q;
}

TTLinear::TTLinear(std::vector<std::size_t> input_modes, std::vector<std::size_t> output_modes,
                   std::vector<std::size_t> ranks)
    : input_modes_(std::move(input_modes)), output_modes_(std::move(output_modes)), ranks_(std::move(ranks)) {
    check_modes(input_modes_, "TTLinear input");
    check_modes(output_modes_, "TTLinear output");
    if (input_modes_.size() != output_modes_.size())
        throw ShapeError("TTLinear: input and output mode lists must have equal length");
    if (ranks_.size() != input_modes_.size() + 1) throw ShapeError("TTLinear: ranks must have cores+1 entries");
    if (ranks_.front() != 1 || ranks_.back() != 1) throw ShapeError("TTLinear: boundary ranks must be 1");
    for (std::size_t r : ranks_)
        if (r == 0) throw ShapeError("TTLinear: zero rank");
    for (std::size_t k = 0; k < input_modes_.size(); ++k)
        cores_.emplace_back(ranks_[k], input_modes_[k], output_modes_[k], ranks_[k + 1]);
}

TTLinear TTLinear::random(std::vector<std::size_t> input_modes, std::vector<std::size_t> output_modes,
                          std::vector<std::size_t> ranks, Rng& rng) {
    TTLinear w(std::move(input_modes), std::move(output_modes), std::move(ranks));
    const double fan_in = static_cast<double>(w.input_dim());
    const double a = std::pow(1.0 / std::sqrt(fan_in), 1.0 / static_cast<double>(w.num_cores()));
    std::uniform_real_distribution<double> dist(-a, a);
    for (Core4& c : w.cores_)
        for (double& v : c.data) v = dist(rng);
    return w;
}

std::size_t TTLinear::input_dim() const noexcept { return product(input_modes_); }
std::size_t TTLinear::output_dim() const noexcept { return product(output_modes_); }

std::size_t TTLinear::parameter_count() const noexcept {
    std::size_t n = 0;
    for (std::size_t k = 0; k < input_modes_.size(); ++k)
        n += ranks_[k] * input_modes_[k] * output_modes_[k] * ranks_[k + 1];
    return n;
}

std::vector<double> TTLinear::flat_parameters() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (const Core4& c : cores_) flat.insert(flat.end(), c.data.begin(), c.data.end());
    return flat;
}

void TTLinear::set_flat_parameters(std::span<const double> flat) {
    if (flat.size() != parameter_count()) throw ShapeError("TTLinear: flat parameter length mismatch");
    std::size_t off = 0;
    for (Core4& c : cores_) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), c.data.size(), c.data.begin());
        off += c.data.size();
    }
}

std::vector<double> TTLinear::materialize() const {
    Partial p;
    for (const Core4& g : cores_) p = extend_prefix(p, g);
    return p.data; // rank is 1, so layout is (out, in)
}

std::vector<double> tt_linear_forward(std::span<const double> input, const TTLinear& w) {
    if (input.size() != w.input_dim())
        throw ShapeError("tt_linear_forward: input length " + std::to_string(input.size()) + " != " +
                         std::to_string(w.input_dim()));
    // T has shape (out_prefix, rank, in_suffix).
    std::vector<double> t(input.begin(), input.end());
    std::size_t out_prefix = 1, in_suffix = w.input_dim();
    for (const Core4& g : w.cores()) {
        const std::size_t rest = in_suffix / g.in_mode;
        std::vector<double> next(out_prefix * g.out_mode * g.r_right * rest, 0.0);
        for (std::size_t jp = 0; jp < out_prefix; ++jp)
            for (std::size_t a = 0; a < g.r_left; ++a)
                for (std::size_t i = 0; i < g.in_mode; ++i) {
                    const double* src = &t[((jp * g.r_left + a) * g.in_mode + i) * rest];
                    for (std::size_t j = 0; j < g.out_mode; ++j)
                        for (std::size_t b = 0; b < g.r_right; ++b) {
                            const double c = g(a, i, j, b);
                            if (c == 0.0) continue;
                            double* dst = &next[((jp * g.out_mode + j) * g.r_right + b) * rest];
                            for (std::size_t s = 0; s < rest; ++s) dst[s] += c * src[s];
                        }
                }
        t = std::move(next);
        out_prefix *= g.out_mode;
        in_suffix = rest;
    }
    return t;
}

std::vector<Core4> tt_linear_grad_from_dense(const TTLinear& w, std::span<const double> dense_grad) {
    const std::size_t out_dim = w.output_dim(), in_dim = w.input_dim();
    if (dense_grad.size() != out_dim * in_dim) throw ShapeError("tt_linear_grad: dense gradient shape mismatch");
    const auto& cores = w.cores();
    const std::size_t d = cores.size();

    std::vector<Partial> prefix(d + 1);
    for (std::size_t k = 0; k < d; ++k) prefix[k + 1] = extend_prefix(prefix[k], cores[k]);
    std::vector<Suffix> suffix(d + 1);
    for (std::size_t k = d; k-- > 0;) suffix[k] = extend_suffix(cores[k], suffix[k + 1]);

    std::vector<Core4> grads;
    grads.reserve(d);
    for (std::size_t k = 0; k < d; ++k) {
        const Core4& g = cores[k];
        const Partial& L = prefix[k];
        const Suffix& R = suffix[k + 1];
        Core4 out(g.r_left, g.in_mode, g.out_mode, g.r_right);
        for (std::size_t jp = 0; jp < L.rows; ++jp)
            for (std::size_t jk = 0; jk < g.out_mode; ++jk)
                for (std::size_t js = 0; js < R.rows; ++js) {
                    const std::size_t j = (jp * g.out_mode + jk) * R.rows + js;
                    for (std::size_t ip = 0; ip < L.cols; ++ip)
                        for (std::size_t ik = 0; ik < g.in_mode; ++ik)
                            for (std::size_t is = 0; is < R.cols; ++is) {
                                const std::size_t i = (ip * g.in_mode + ik) * R.cols + is;
                                const double gd = dense_grad[j * in_dim + i];
                                if (gd == 0.0) continue;
                                for (std::size_t a = 0; a < g.r_left; ++a) {
                                    const double la = gd * L.at(jp, ip, a);
                                    if (la == 0.0) continue;
                                    for (std::size_t b = 0; b < g.r_right; ++b)
                                        out(a, ik, jk, b) += la * R.at(b, js, is);
                                }
                            }
                }
        grads.push_back(std::move(out));
    }
    return grads;
}

std::vector<Core4> tt_linear_grad(std::span<const double> input, const TTLinear& w, std::span<const double> upstream) {
    if (input.size() != w.input_dim()) throw ShapeError("tt_linear_grad: input length mismatch");
    if (upstream.size() != w.output_dim()) throw ShapeError("tt_linear_grad: upstream length mismatch");
    std::vector<double> dense(w.output_dim() * w.input_dim());
    for (std::size_t j = 0; j < upstream.size(); ++j)
        for (std::size_t i = 0; i < input.size(); ++i) dense[j * input.size() + i] = upstream[j] * input[i];
    return tt_linear_grad_from_dense(w, dense);
}

} // namespace clqas::tt
