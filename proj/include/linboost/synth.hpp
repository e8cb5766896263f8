#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "linboost/dataset.hpp"
#include "linboost/random.hpp"

namespace linboost::synth {

inline double sign(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

/// Sinusoid of period 1 with jumps at t = 0.3 and t = 0.72.
inline double heavysine(double t) {
    return 4.0 * std::sin(4.0 * std::numbers::pi * t) - sign(t - 0.3) - sign(0.72 - t);
}

/// Peaks at 10 on the circle x1^2 + x2^2 = 0.3.
inline double jakeman1(double x1, double x2) { return 1.0 / (std::abs(0.3 - x1 * x1 - x2 * x2) + 0.1); }

/// Zero when x1 > 0.5 or x2 > 0.5; the boundary itself takes the exponential branch.
inline double jakeman4(double x1, double x2) {
    if (x1 > 0.5 || x2 > 0.5) return 0.0;
    return std::exp(0.5 * x1 + 3.0 * x2);
}

/// Noise-free Friedman #1; components beyond the fifth are ignored.
inline double friedman1(std::span<const double> x) {
    if (x.size() < 5) throw std::invalid_argument("friedman1 needs at least 5 inputs");
    const double a = x[2] - 0.5;
    return 10.0 * std::sin(std::numbers::pi * x[0] * x[1]) + 20.0 * a * a + 10.0 * x[3] + 5.0 * x[4];
}

struct NoiseSpec {
    double variance = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (!std::isfinite(variance) || variance < 0.0) throw std::invalid_argument("noise variance must be >= 0");
    }
};

/// m equally spaced points per axis covering [0, 1] inclusive.
struct GridSpec {
    std::size_t points_per_axis = 11;

    void validate() const {
        if (points_per_axis < 2) throw std::invalid_argument("grid needs at least 2 points per axis");
    }
    double coordinate(std::size_t i) const {
        return static_cast<double>(i) / static_cast<double>(points_per_axis - 1);
    }
};

/// A named target function of fixed input dimension.
struct Function {
    std::string name;
    std::size_t dim = 1;
    std::function<double(std::span<const double>)> eval;

    double operator()(std::span<const double> x) const { return eval(x); }
};

inline Function heavysine_function() {
    return {"heavysine", 1, [](std::span<const double> x) { return heavysine(x[0]); }};
}
inline Function jakeman1_function() {
    return {"jakeman1", 2, [](std::span<const double> x) { return jakeman1(x[0], x[1]); }};
}
inline Function jakeman4_function() {
    return {"jakeman4", 2, [](std::span<const double> x) { return jakeman4(x[0], x[1]); }};
}
inline Function friedman1_function() { return {"friedman1", 10, [](std::span<const double> x) { return friedman1(x); }}; }

inline std::vector<std::string> function_names() { return {"heavysine", "jakeman1", "jakeman4", "friedman1"}; }

inline Function function_by_name(const std::string& name) {
    if (name == "heavysine") return heavysine_function();
    if (name == "jakeman1") return jakeman1_function();
    if (name == "jakeman4") return jakeman4_function();
    if (name == "friedman1") return friedman1_function();
    std::string valid;
    for (const auto& n : function_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown function '" + name + "' (valid: " + valid + ")");
}

namespace detail {

inline void add_noise(Vector& targets, const NoiseSpec& noise) {
    noise.validate();
    if (noise.variance == 0.0) return;
    Rng rng(derive_seed(noise.seed, 0x6e6f697365ULL));
    const double sd = std::sqrt(noise.variance);
    for (auto& v : targets) v += sd * rng.normal();
}

inline std::vector<std::string> axis_names(std::size_t d) {
    std::vector<std::string> names;
    for (std::size_t k = 0; k < d; ++k) names.push_back("x" + std::to_string(k + 1));
    return names;
}

} // namespace detail

/**
 * Full tensor grid over [0, 1]^d, rows in row-major axis order (the last
 * axis varies fastest), targets f(x) + N(0, variance).
 */
inline Dataset make_grid_dataset(const Function& f, const GridSpec& grid, const NoiseSpec& noise) {
    grid.validate();
    const std::size_t d = f.dim;
    const std::size_t m = grid.points_per_axis;
    std::size_t n = 1;
    for (std::size_t k = 0; k < d; ++k) {
        if (n > (std::size_t{1} << 31) / m) throw std::invalid_argument("grid too large");
        n *= m;
    }
    Dataset ds;
    ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    ds.targets.resize(static_cast<Eigen::Index>(n));
    std::vector<double> x(d);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t rest = i;
        for (std::size_t k = d; k-- > 0;) {
            x[k] = grid.coordinate(rest % m);
            rest /= m;
        }
        for (std::size_t k = 0; k < d; ++k) ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = x[k];
        ds.targets[static_cast<Eigen::Index>(i)] = f(x);
    }
    detail::add_noise(ds.targets, noise);
    ds.feature_names = detail::axis_names(d);
    return ds;
}

/// n rows drawn i.i.d. uniform on (0, 1)^d, targets f(x) + N(0, variance).
inline Dataset make_random_dataset(const Function& f, std::size_t n, const NoiseSpec& noise) {
    if (n < 1) throw std::invalid_argument("random dataset needs at least one row");
    const std::size_t d = f.dim;
    Dataset ds;
    ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    ds.targets.resize(static_cast<Eigen::Index>(n));
    Rng rng(derive_seed(noise.seed, 0x696e707574ULL));
    std::vector<double> x(d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < d; ++k) {
            x[k] = rng.uniform();
            ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = x[k];
        }
        ds.targets[static_cast<Eigen::Index>(i)] = f(x);
    }
    detail::add_noise(ds.targets, noise);
    ds.feature_names = detail::axis_names(d);
    return ds;
}

} // namespace linboost::synth
