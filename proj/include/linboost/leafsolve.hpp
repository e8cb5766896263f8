#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <variant>

#include <Eigen/Dense>

#include "linboost/error.hpp"

namespace linboost {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// lambda: L2 penalty on leaf weights (never on the linear bias). gamma: per-leaf penalty.
struct RegularizationSpec {
    double lambda = 0.0;
    double gamma = 0.0;

    void validate() const {
        if (!std::isfinite(lambda) || lambda < 0.0) throw std::invalid_argument("lambda must be finite and >= 0");
        if (!std::isfinite(gamma) || gamma < 0.0) throw std::invalid_argument("gamma must be finite and >= 0");
    }
};

struct ScalarLeafStats {
    double G = 0.0;
    double H = 0.0;
    std::size_t count = 0;

    void add(double g, double h) {
        G += g;
        H += h;
        ++count;
    }
};

/// g_tilde = sum g_i [x_i, 1], H_tilde = sum h_i [x_i, 1][x_i, 1]^T over a leaf's samples.
/// The last component of g_tilde and the last diagonal entry of H_tilde are
/// therefore the scalar G and H of the same samples.
struct LinearLeafStats {
    Vector g_tilde;
    Matrix H_tilde;
    std::size_t count = 0;

    LinearLeafStats() = default;
    explicit LinearLeafStats(std::size_t d)
        : g_tilde(Vector::Zero(static_cast<Eigen::Index>(d + 1))),
          H_tilde(Matrix::Zero(static_cast<Eigen::Index>(d + 1), static_cast<Eigen::Index>(d + 1))) {}

    std::size_t dim() const { return static_cast<std::size_t>(g_tilde.size()) - 1; }

    /// Adds one sample given its raw (non-augmented) features.
    void add(std::span<const double> x, double g, double h) {
        const auto d = static_cast<Eigen::Index>(x.size());
        for (Eigen::Index a = 0; a < d; ++a) {
            const double hx = h * x[static_cast<std::size_t>(a)];
            g_tilde[a] += g * x[static_cast<std::size_t>(a)];
            for (Eigen::Index b = 0; b <= a; ++b) H_tilde(a, b) += hx * x[static_cast<std::size_t>(b)];
            H_tilde(d, a) += hx;
        }
        g_tilde[d] += g;
        H_tilde(d, d) += h;
        for (Eigen::Index a = 0; a <= d; ++a)
            for (Eigen::Index b = 0; b < a; ++b) H_tilde(b, a) = H_tilde(a, b);
        ++count;
    }

    ScalarLeafStats scalar() const {
        const auto d = static_cast<Eigen::Index>(dim());
        return {g_tilde[d], H_tilde(d, d), count};
    }
};

struct ConstantLeaf {
    double weight = 0.0;
};

/// weights has d + 1 entries; the last one is the bias.
struct LinearLeaf {
    Vector weights;
};

using LeafModel = std::variant<ConstantLeaf, LinearLeaf>;

inline double leaf_output(const LeafModel& model, std::span<const double> x) {
    if (const auto* c = std::get_if<ConstantLeaf>(&model)) return c->weight;
    const auto& w = std::get<LinearLeaf>(model).weights;
    double acc = w[static_cast<Eigen::Index>(x.size())];
    for (std::size_t k = 0; k < x.size(); ++k) acc += w[static_cast<Eigen::Index>(k)] * x[k];
    return acc;
}

inline bool is_linear(const LeafModel& model) { return std::holds_alternative<LinearLeaf>(model); }

// ---------------------------------------------------------------------------
// Accumulation
// ---------------------------------------------------------------------------

inline ScalarLeafStats accumulate_scalar(std::span<const double> g, std::span<const double> h) {
    if (g.size() != h.size()) throw std::invalid_argument("gradient and hessian lengths differ");
    if (g.empty()) throw std::invalid_argument("cannot accumulate an empty leaf");
    ScalarLeafStats s;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (h[i] < 0.0) throw std::invalid_argument("negative hessian entry");
        s.add(g[i], h[i]);
    }
    return s;
}

/// x_aug holds already-augmented inputs [x, 1]; every entry must have the same length.
inline LinearLeafStats accumulate_linear(std::span<const Vector> x_aug, std::span<const double> g,
                                         std::span<const double> h) {
    if (x_aug.size() != g.size() || g.size() != h.size())
        throw std::invalid_argument("input, gradient and hessian lengths differ");
    if (x_aug.empty()) throw std::invalid_argument("cannot accumulate an empty leaf");
    const auto m = x_aug.front().size();
    if (m < 2) throw std::invalid_argument("augmented inputs need at least two components");
    LinearLeafStats s(static_cast<std::size_t>(m - 1));
    for (std::size_t i = 0; i < x_aug.size(); ++i) {
        const auto& x = x_aug[i];
        if (x.size() != m) throw std::invalid_argument("augmented inputs have differing lengths");
        if (!x.allFinite() || !std::isfinite(g[i]) || !std::isfinite(h[i]))
            throw std::invalid_argument("non-finite leaf input");
        if (h[i] < 0.0) throw std::invalid_argument("negative hessian entry");
        s.g_tilde.noalias() += g[i] * x;
        s.H_tilde.noalias() += h[i] * x * x.transpose();
        ++s.count;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Dense kernels
// ---------------------------------------------------------------------------

namespace detail {

/// Relative pivot floor for the symmetric factorization. A pivot at or below
/// pivot_tolerance * max(diagonal) counts as a failed positive-definiteness test.
inline constexpr double pivot_tolerance = 1e-12;

/// In-place lower Cholesky factor of a symmetric matrix. Only the lower
/// triangle is read. Returns false if a pivot falls to the floor.
inline bool cholesky_in_place(Eigen::Ref<Matrix> a) {
    const Eigen::Index n = a.rows();
    double max_diag = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) max_diag = std::max(max_diag, a(i, i));
    if (!(max_diag > 0.0)) return false;
    const double floor = pivot_tolerance * max_diag;
    for (Eigen::Index j = 0; j < n; ++j) {
        double pivot = a(j, j);
        for (Eigen::Index k = 0; k < j; ++k) pivot -= a(j, k) * a(j, k);
        if (!(pivot > floor)) return false;
        const double ljj = std::sqrt(pivot);
        a(j, j) = ljj;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            double v = a(i, j);
            for (Eigen::Index k = 0; k < j; ++k) v -= a(i, k) * a(j, k);
            a(i, j) = v / ljj;
        }
    }
    return true;
}

/// Solves (L L^T) x = b in place given the lower factor from cholesky_in_place.
inline void cholesky_solve_in_place(const Eigen::Ref<const Matrix>& l, Eigen::Ref<Vector> b) {
    const Eigen::Index n = l.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        double v = b[i];
        for (Eigen::Index k = 0; k < i; ++k) v -= l(i, k) * b[k];
        b[i] = v / l(i, i);
    }
    for (Eigen::Index i = n - 1; i >= 0; --i) {
        double v = b[i];
        for (Eigen::Index k = i + 1; k < n; ++k) v -= l(k, i) * b[k];
        b[i] = v / l(i, i);
    }
}

inline void require_finite(const Vector& w) {
    if (!w.allFinite()) throw NumericalError("leaf solve produced non-finite weights");
}

} // namespace detail

// ---------------------------------------------------------------------------
// Solves
// ---------------------------------------------------------------------------

/// w = -G / (H + lambda)
inline ConstantLeaf solve_constant(const ScalarLeafStats& stats, const RegularizationSpec& reg) {
    const double denom = stats.H + reg.lambda;
    if (!(denom > 0.0)) throw std::domain_error("H + lambda must be positive for a constant leaf solve");
    return {-stats.G / denom};
}

/// -1/2 G^2 / (H + lambda), written as 1/2 G w at the optimum.
inline double leaf_objective_term(const ConstantLeaf& model, const ScalarLeafStats& stats) {
    return 0.5 * stats.G * model.weight;
}

inline double leaf_objective_term(const LeafModel& model, const LinearLeafStats& stats) {
    if (const auto* c = std::get_if<ConstantLeaf>(&model)) return leaf_objective_term(*c, stats.scalar());
    return 0.5 * stats.g_tilde.dot(std::get<LinearLeaf>(model).weights);
}

/**
 * Reusable workspace for the linear-leaf normal equations
 * (Lambda + H_tilde) w = -g_tilde with Lambda = diag(lambda, ..., lambda, 0).
 *
 * A failed factorization means the leaf falls back to the constant model
 * built from the same samples' scalar statistics.
 */
class LinearLeafSolver {
public:
    explicit LinearLeafSolver(std::size_t d)
        : factor_(static_cast<Eigen::Index>(d + 1), static_cast<Eigen::Index>(d + 1)),
          weights_(static_cast<Eigen::Index>(d + 1)) {}

    /// Factorizes and solves. On success the weights are available via weights().
    /// Without a penalty, fewer than d + 1 samples always take the fallback.
    bool solve(const LinearLeafStats& stats, double lambda) {
        const Matrix& H_tilde = stats.H_tilde;
        const Eigen::Index m = H_tilde.rows();
        if (!(lambda > 0.0) && stats.count < static_cast<std::size_t>(m)) return false;
        for (Eigen::Index j = 0; j < m; ++j)
            for (Eigen::Index i = j; i < m; ++i) factor_(i, j) = H_tilde(i, j);
        for (Eigen::Index i = 0; i + 1 < m; ++i) factor_(i, i) += lambda;
        if (!detail::cholesky_in_place(factor_)) return false;
        weights_ = -stats.g_tilde;
        detail::cholesky_solve_in_place(factor_, weights_);
        return true;
    }

    const Vector& weights() const { return weights_; }

    /// Optimal objective term of a leaf with these statistics, including the fallback.
    double objective(const LinearLeafStats& stats, double lambda) {
        if (solve(stats, lambda)) return 0.5 * stats.g_tilde.dot(weights_);
        return constant_fallback_objective(stats.g_tilde, stats.H_tilde, lambda);
    }

    static double constant_fallback_objective(const Vector& g_tilde, const Matrix& H_tilde, double lambda) {
        const Eigen::Index d = g_tilde.size() - 1;
        const double denom = H_tilde(d, d) + lambda;
        if (!(denom > 0.0)) return 0.0;
        return -0.5 * g_tilde[d] * g_tilde[d] / denom;
    }

private:
    Matrix factor_;
    Vector weights_;
};

inline LeafModel constant_fallback(const ScalarLeafStats& stats, const RegularizationSpec& reg) {
    if (!(stats.H + reg.lambda > 0.0)) return ConstantLeaf{0.0};
    return solve_constant(stats, reg);
}

inline LeafModel solve_linear(const LinearLeafStats& stats, const RegularizationSpec& reg) {
    LinearLeafSolver solver(stats.dim());
    if (!solver.solve(stats, reg.lambda)) return constant_fallback(stats.scalar(), reg);
    Vector w = solver.weights();
    detail::require_finite(w);
    return LinearLeaf{std::move(w)};
}

/**
 * Same optimum as solve_linear, computed through an inner system whose size
 * is the number of samples rather than d + 1.
 *
 * The bias is unpenalized, so it is eliminated first: with c = sum h_i and
 * xbar = sum h_i x_i / c, the feature weights v solve
 *     (lambda I + U U^T) v = -(g_x - xbar * G),   U = [sqrt(h_i) (x_i - xbar)],
 * and the bias is -(G + c xbar^T v) / c. The Woodbury identity turns the
 * d-by-d inverse into one of lambda I_m + U^T U (m samples).
 *
 * x_aug rows are augmented inputs [x, 1].
 */
inline LeafModel solve_linear_woodbury(const Matrix& x_aug, std::span<const double> g, std::span<const double> h,
                                       const RegularizationSpec& reg) {
    if (!(reg.lambda > 0.0)) throw std::invalid_argument("Woodbury solve requires lambda > 0");
    const auto m = static_cast<std::size_t>(x_aug.rows());
    if (m == 0 || g.size() != m || h.size() != m)
        throw std::invalid_argument("input, gradient and hessian lengths differ");
    if (x_aug.cols() < 2) throw std::invalid_argument("augmented inputs need at least two components");
    const Eigen::Index d = x_aug.cols() - 1;
    const auto mi = static_cast<Eigen::Index>(m);

    ScalarLeafStats scalar;
    Vector g_x = Vector::Zero(d);
    Vector xbar = Vector::Zero(d);
    for (Eigen::Index i = 0; i < mi; ++i) {
        const auto si = static_cast<std::size_t>(i);
        if (h[si] < 0.0) throw std::invalid_argument("negative hessian entry");
        scalar.add(g[si], h[si]);
        g_x.noalias() += g[si] * x_aug.row(i).head(d).transpose();
        xbar.noalias() += h[si] * x_aug.row(i).head(d).transpose();
    }
    const double c = scalar.H;
    if (!(c > 0.0)) return constant_fallback(scalar, reg);
    xbar /= c;

    Matrix u(d, mi);
    for (Eigen::Index i = 0; i < mi; ++i)
        u.col(i) = std::sqrt(h[static_cast<std::size_t>(i)]) * (x_aug.row(i).head(d).transpose() - xbar);
    const Vector r = g_x - xbar * scalar.G;

    Matrix inner = u.transpose() * u;
    inner.diagonal().array() += reg.lambda;
    if (!detail::cholesky_in_place(inner)) return constant_fallback(scalar, reg);
    Vector t = u.transpose() * r;
    detail::cholesky_solve_in_place(inner, t);
    const Vector v = -(r - u * t) / reg.lambda;

    Vector w(d + 1);
    w.head(d) = v;
    w[d] = -(scalar.G + c * xbar.dot(v)) / c;
    detail::require_finite(w);
    return LinearLeaf{std::move(w)};
}

} // namespace linboost
