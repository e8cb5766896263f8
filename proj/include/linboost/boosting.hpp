#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "linboost/dataset.hpp"
#include "linboost/leafsolve.hpp"
#include "linboost/random.hpp"
#include "linboost/tree.hpp"

namespace linboost {

/// First and second derivative of a loss with respect to the prediction.
template <typename L>
concept Loss = requires(const L& loss, double y, double yhat) {
    { loss.gradient(y, yhat) } -> std::convertible_to<double>;
    { loss.hessian(y, yhat) } -> std::convertible_to<double>;
};

/// (y - yhat)^2. The second-order expansion is exact for this loss.
struct SquareLoss {
    double gradient(double y, double yhat) const { return 2.0 * (yhat - y); }
    double hessian(double, double) const { return 2.0; }
};

struct BoostParams {
    std::size_t num_trees = 1;
    double learning_rate = 0.1;
    double lambda = 0.0;
    double gamma = 3.0;
    int max_depth = 30;
    std::optional<std::size_t> min_samples_leaf; // unset: 1 (constant) or d + 2 (linear)
    std::size_t min_samples_split = 2;
    double subsample = 1.0;
    LeafMode mode = LeafMode::constant;
    std::uint64_t seed = 0;

    RegularizationSpec reg() const { return {lambda, gamma}; }

    std::size_t resolved_min_samples_leaf(std::size_t d) const {
        if (min_samples_leaf) return *min_samples_leaf;
        return mode == LeafMode::linear ? d + 2 : 1;
    }

    GrowthLimits limits(std::size_t d) const { return {max_depth, resolved_min_samples_leaf(d), min_samples_split}; }

    void validate() const {
        if (num_trees < 1) throw std::invalid_argument("num_trees must be >= 1");
        if (!(learning_rate > 0.0) || learning_rate > 1.0)
            throw std::invalid_argument("learning_rate must lie in (0, 1]");
        reg().validate();
        if (max_depth < 0) throw std::invalid_argument("max_depth must be >= 0");
        if (min_samples_leaf && *min_samples_leaf < 1) throw std::invalid_argument("min_samples_leaf must be >= 1");
        if (min_samples_split < 1) throw std::invalid_argument("min_samples_split must be >= 1");
        if (!(subsample > 0.0) || subsample > 1.0) throw std::invalid_argument("subsample must lie in (0, 1]");
    }
};

/// Trained model: base + sum of learning_rate * tree(x - means).
struct Ensemble {
    std::vector<Tree> trees;
    CenteringTransform centering;
    double base_prediction = 0.0;
    BoostParams params;

    std::size_t dim() const { return static_cast<std::size_t>(centering.means.size()); }
    LeafMode mode() const { return params.mode; }

    double predict_one(std::span<const double> x, std::size_t max_trees) const {
        const std::size_t d = dim();
        double buf_small[16];
        std::vector<double> buf_large;
        double* xc = buf_small;
        if (d > 16) {
            buf_large.resize(d);
            xc = buf_large.data();
        }
        for (std::size_t k = 0; k < d; ++k) xc[k] = x[k] - centering.means[static_cast<Eigen::Index>(k)];
        const std::span<const double> centered(xc, d);
        double acc = base_prediction;
        const std::size_t count = std::min(max_trees, trees.size());
        for (std::size_t t = 0; t < count; ++t) acc += params.learning_rate * predict_node(trees[t], centered);
        return acc;
    }

    double predict_one(std::span<const double> x) const { return predict_one(x, trees.size()); }

    /// Predictions using only the first max_trees trees.
    Vector predict(const FeatureMatrix& x, std::size_t max_trees) const {
        if (static_cast<std::size_t>(x.cols()) != dim())
            throw std::invalid_argument("input has " + std::to_string(x.cols()) + " features, model expects " +
                                        std::to_string(dim()));
        Vector out(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            out[i] = predict_one({x.data() + i * x.cols(), dim()}, max_trees);
        return out;
    }

    Vector predict(const FeatureMatrix& x) const { return predict(x, trees.size()); }
};

/// Diagnostics of one boosting round.
struct RoundTrace {
    bool accepted = false;
    double tree_objective = 0.0; // sum of leaf terms + gamma * leaves of the accepted tree
    double loss_before = 0.0;    // sum over all training rows
    double loss_after = 0.0;
};

struct FitResult {
    Ensemble model;
    Vector training_predictions; // cached predictions after the final round
    std::vector<RoundTrace> rounds;
};

/**
 * Boosting loop. Features are centered with the training means; the base
 * prediction is the target mean. Each round draws its own subsample, grows
 * a tree on the current g/h, prunes it (bottom-up for constant leaves,
 * top-down for linear ones) and, if it survives, adds learning_rate * tree
 * to the predictions of every training row. A removed linear tree ends the
 * loop.
 */
template <Loss L = SquareLoss>
FitResult fit_with_trace(const Dataset& ds, const BoostParams& params, const L& loss = {}) {
    ds.validate();
    params.validate();
    const std::size_t n = ds.rows();
    const std::size_t d = ds.cols();

    FitResult result;
    Ensemble& model = result.model;
    model.params = params;
    model.centering = fit_centering(ds);
    model.base_prediction = ds.targets.mean();
    const FeatureMatrix xc = model.centering.apply(ds.features);

    Vector& pred = result.training_predictions;
    pred = Vector::Constant(static_cast<Eigen::Index>(n), model.base_prediction);
    std::vector<double> g(n), h(n);
    const auto total_loss = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = ds.targets[static_cast<Eigen::Index>(i)] - pred[static_cast<Eigen::Index>(i)];
            s += r * r;
        }
        return s;
    };

    const GrowthProblem problem{xc, g, h, params.reg(), params.limits(d), params.mode};
    for (std::size_t t = 0; t < params.num_trees; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            const double y = ds.targets[static_cast<Eigen::Index>(i)];
            const double yhat = pred[static_cast<Eigen::Index>(i)];
            g[i] = loss.gradient(y, yhat);
            h[i] = loss.hessian(y, yhat);
        }
        const SampleIndexSet rows = subsample(n, params.subsample, derive_seed(params.seed, t));
        Tree grown = grow_tree(problem, rows);

        RoundTrace trace;
        trace.loss_before = total_loss();
        std::optional<Tree> kept;
        if (params.mode == LeafMode::constant)
            kept = prune_bottom_up(std::move(grown));
        else
            kept = prune_top_down(std::move(grown));
        if (!kept) {
            trace.loss_after = trace.loss_before;
            result.rounds.push_back(trace);
            break;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double f = predict_node(*kept, problem.row(i));
            pred[static_cast<Eigen::Index>(i)] += params.learning_rate * f;
        }
        if (!pred.allFinite()) throw NumericalError("boosting produced non-finite training predictions");
        trace.accepted = true;
        trace.tree_objective = kept->total_objective();
        trace.loss_after = total_loss();
        result.rounds.push_back(trace);
        model.trees.push_back(std::move(*kept));
    }
    return result;
}

template <Loss L = SquareLoss>
Ensemble fit(const Dataset& ds, const BoostParams& params, const L& loss = {}) {
    return fit_with_trace(ds, params, loss).model;
}

} // namespace linboost
