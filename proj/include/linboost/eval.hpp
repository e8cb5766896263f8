#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "linboost/boosting.hpp"
#include "linboost/dataset.hpp"
#include "linboost/parallel.hpp"
#include "linboost/random.hpp"

namespace linboost {

/// sum (y - yhat)^2 / sum (y - mean(y))^2, mean taken over the same sequence.
inline double nmse(std::span<const double> y, std::span<const double> yhat) {
    if (y.size() != yhat.size()) throw std::invalid_argument("nmse: length mismatch");
    if (y.size() < 2) throw std::invalid_argument("nmse: need at least two values");
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        num += (y[i] - yhat[i]) * (y[i] - yhat[i]);
        den += (y[i] - mean) * (y[i] - mean);
    }
    if (!(den > 0.0)) throw std::invalid_argument("nmse: target is constant");
    return num / den;
}

inline double nmse(const Vector& y, const Vector& yhat) {
    return nmse(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())),
                std::span<const double>(yhat.data(), static_cast<std::size_t>(yhat.size())));
}

/// Shuffled partition of [0, n) into k folds; the first n % k folds get one extra index.
inline std::vector<SampleIndexSet> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("kfold_split: need at least 2 folds");
    if (k > n) throw std::invalid_argument("kfold_split: more folds than samples");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    std::vector<SampleIndexSet> folds(k);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = n / k + (f < n % k ? 1 : 0);
        auto& idx = folds[f].indices;
        idx.assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                   perm.begin() + static_cast<std::ptrdiff_t>(pos + size));
        std::sort(idx.begin(), idx.end());
        pos += size;
    }
    return folds;
}

/// Complement of one fold inside [0, n).
inline SampleIndexSet complement(const SampleIndexSet& fold, std::size_t n) {
    SampleIndexSet out;
    out.indices.reserve(n - fold.size());
    std::size_t j = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (j < fold.size() && fold.indices[j] == i) {
            ++j;
            continue;
        }
        out.indices.push_back(i);
    }
    return out;
}

/**
 * Candidate values per BoostParams field; an empty list keeps the base value.
 * Expansion order is mode, learning_rate, lambda, gamma, max_depth,
 * min_samples_leaf, min_samples_split, subsample, num_trees (innermost).
 */
struct ParamGrid {
    std::vector<LeafMode> mode;
    std::vector<double> learning_rate;
    std::vector<double> lambda;
    std::vector<double> gamma;
    std::vector<int> max_depth;
    std::vector<std::optional<std::size_t>> min_samples_leaf;
    std::vector<std::size_t> min_samples_split;
    std::vector<double> subsample;
    std::vector<std::size_t> num_trees;

    std::vector<BoostParams> expand(const BoostParams& base) const {
        std::vector<BoostParams> out{base};
        const auto axis = [&out](const auto& values, auto assign) {
            if (values.empty()) return;
            std::vector<BoostParams> next;
            next.reserve(out.size() * values.size());
            for (const auto& p : out)
                for (const auto& v : values) {
                    BoostParams q = p;
                    assign(q, v);
                    next.push_back(q);
                }
            out = std::move(next);
        };
        axis(mode, [](BoostParams& p, LeafMode v) { p.mode = v; });
        axis(learning_rate, [](BoostParams& p, double v) { p.learning_rate = v; });
        axis(lambda, [](BoostParams& p, double v) { p.lambda = v; });
        axis(gamma, [](BoostParams& p, double v) { p.gamma = v; });
        axis(max_depth, [](BoostParams& p, int v) { p.max_depth = v; });
        axis(min_samples_leaf, [](BoostParams& p, std::optional<std::size_t> v) { p.min_samples_leaf = v; });
        axis(min_samples_split, [](BoostParams& p, std::size_t v) { p.min_samples_split = v; });
        axis(subsample, [](BoostParams& p, double v) { p.subsample = v; });
        axis(num_trees, [](BoostParams& p, std::size_t v) { p.num_trees = v; });
        for (const auto& p : out) p.validate();
        return out;
    }
};

struct GridSearchResult {
    BoostParams best;
    double best_score = std::numeric_limits<double>::infinity();
    std::vector<BoostParams> candidates;
    std::vector<double> scores; // mean validation NMSE per candidate; +inf when disqualified
};

namespace detail {

inline bool same_except_trees(const BoostParams& a, const BoostParams& b) {
    return a.mode == b.mode && a.learning_rate == b.learning_rate && a.lambda == b.lambda && a.gamma == b.gamma &&
           a.max_depth == b.max_depth && a.min_samples_leaf == b.min_samples_leaf &&
           a.min_samples_split == b.min_samples_split && a.subsample == b.subsample && a.seed == b.seed;
}

} // namespace detail

/**
 * Exhaustive k-fold search minimizing mean validation NMSE. The first
 * candidate in expansion order wins ties. No refit is done here.
 *
 * Candidates that differ only in num_trees share one fit with the largest
 * count: a boosted model with K trees is the K-tree prefix of the same fit
 * run longer, because every round draws from its own seed.
 */
inline GridSearchResult grid_search(const Dataset& ds, const ParamGrid& grid, const BoostParams& base,
                                    std::size_t k, std::uint64_t seed) {
    GridSearchResult result;
    result.candidates = grid.expand(base);
    const std::size_t n_cand = result.candidates.size();
    if (n_cand == 0) throw std::invalid_argument("grid_search: empty grid");
    result.scores.assign(n_cand, std::numeric_limits<double>::infinity());
    if (n_cand == 1) {
        result.best = result.candidates.front();
        return result;
    }

    struct Group {
        std::size_t first;
        std::size_t last; // exclusive
        std::size_t max_trees;
    };
    std::vector<Group> groups;
    for (std::size_t i = 0; i < n_cand; ++i) {
        const auto& c = result.candidates[i];
        if (!groups.empty() && detail::same_except_trees(result.candidates[groups.back().first], c)) {
            groups.back().last = i + 1;
            groups.back().max_trees = std::max(groups.back().max_trees, c.num_trees);
        } else {
            groups.push_back({i, i + 1, c.num_trees});
        }
    }

    const auto folds = kfold_split(ds.rows(), k, seed);
    const std::size_t n_tasks = groups.size() * k;
    // fold_scores[candidate * k + fold]
    std::vector<double> fold_scores(n_cand * k, std::numeric_limits<double>::quiet_NaN());
    std::vector<unsigned char> failed(n_cand * k, 0);

    parallel_for(n_tasks, [&](std::size_t task) {
        const auto& group = groups[task / k];
        const std::size_t f = task % k;
        try {
            const Dataset train = ds.subset(complement(folds[f], ds.rows()).indices);
            const Dataset valid = ds.subset(folds[f].indices);
            BoostParams params = result.candidates[group.first];
            params.num_trees = group.max_trees;
            const Ensemble model = fit(train, params);

            const std::size_t nv = valid.rows();
            const FeatureMatrix xc = model.centering.apply(valid.features);
            Vector acc = Vector::Constant(static_cast<Eigen::Index>(nv), model.base_prediction);
            const auto score_prefix = [&](std::size_t used) {
                for (std::size_t c = group.first; c < group.last; ++c)
                    if (std::min(result.candidates[c].num_trees, model.trees.size()) == used)
                        fold_scores[c * k + f] = nmse(valid.targets, acc);
            };
            score_prefix(0);
            for (std::size_t t = 0; t < model.trees.size(); ++t) {
                for (std::size_t i = 0; i < nv; ++i)
                    acc[static_cast<Eigen::Index>(i)] +=
                        params.learning_rate *
                        predict_node(model.trees[t], {xc.data() + i * xc.cols(), static_cast<std::size_t>(xc.cols())});
                score_prefix(t + 1);
            }
        } catch (const std::exception&) {
            for (std::size_t c = group.first; c < group.last; ++c) failed[c * k + f] = 1;
        }
    });

    for (std::size_t c = 0; c < n_cand; ++c) {
        double sum = 0.0;
        bool ok = true;
        for (std::size_t f = 0; f < k; ++f) {
            const double s = fold_scores[c * k + f];
            if (failed[c * k + f] || !std::isfinite(s)) {
                ok = false;
                break;
            }
            sum += s;
        }
        if (ok) result.scores[c] = sum / static_cast<double>(k);
    }
    const auto best = std::min_element(result.scores.begin(), result.scores.end());
    if (!std::isfinite(*best)) throw std::runtime_error("grid_search: every candidate failed");
    const auto idx = static_cast<std::size_t>(best - result.scores.begin());
    result.best = result.candidates[idx];
    result.best_score = *best;
    return result;
}

} // namespace linboost
