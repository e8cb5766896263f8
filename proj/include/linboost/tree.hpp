#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "linboost/dataset.hpp"
#include "linboost/leafsolve.hpp"

namespace linboost {

enum class LeafMode { constant, linear };

inline const char* to_string(LeafMode mode) { return mode == LeafMode::constant ? "constant" : "linear"; }

inline LeafMode parse_leaf_mode(const std::string& s) {
    if (s == "constant") return LeafMode::constant;
    if (s == "linear") return LeafMode::linear;
    throw std::invalid_argument("unknown leaf mode '" + s + "' (expected constant or linear)");
}

/// Both sample-count limits are enforced independently of each other.
struct GrowthLimits {
    int max_depth = 30;
    std::size_t min_samples_leaf = 1;
    std::size_t min_samples_split = 2;

    void validate() const {
        if (max_depth < 0) throw std::invalid_argument("max_depth must be >= 0");
        if (min_samples_leaf < 1) throw std::invalid_argument("min_samples_leaf must be >= 1");
        if (min_samples_split < 1) throw std::invalid_argument("min_samples_split must be >= 1");
    }
};

/// Samples go left iff x[feature] < threshold.
struct Split {
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain = 0.0;
};

struct TreeNode {
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain = 0.0;       // split gain, meaningful on internal nodes
    LeafModel model;         // model this node would carry as a leaf
    double objective = 0.0;  // optimal objective term of that model, gamma excluded
    std::size_t count = 0;   // training samples that reached the node

    bool is_leaf() const { return left < 0; }
};

/// Flat binary tree; node 0 is the root and children always follow their parent.
struct Tree {
    std::vector<TreeNode> nodes;
    double gamma = 0.0;

    const TreeNode& root() const { return nodes.front(); }

    std::size_t leaf_count() const {
        return static_cast<std::size_t>(
            std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
    }

    int depth() const { return depth_from(0); }

    /// Sum of leaf objective terms plus gamma per leaf.
    double total_objective() const { return subtree_objective(0); }

    double subtree_objective(std::size_t index) const {
        const auto& n = nodes[index];
        if (n.is_leaf()) return n.objective + gamma;
        return subtree_objective(static_cast<std::size_t>(n.left)) +
               subtree_objective(static_cast<std::size_t>(n.right));
    }

    std::size_t leaf_index(std::span<const double> x) const {
        std::size_t i = 0;
        while (!nodes[i].is_leaf()) {
            const auto& n = nodes[i];
            i = static_cast<std::size_t>(x[n.feature] < n.threshold ? n.left : n.right);
        }
        return i;
    }

private:
    int depth_from(std::size_t index) const {
        const auto& n = nodes[index];
        if (n.is_leaf()) return 0;
        return 1 + std::max(depth_from(static_cast<std::size_t>(n.left)),
                            depth_from(static_cast<std::size_t>(n.right)));
    }
};

/// x must already be centered when the tree was grown on centered features.
inline double predict_node(const Tree& tree, std::span<const double> x) {
    return leaf_output(tree.nodes[tree.leaf_index(x)].model, x);
}

/// Inputs shared by split search and growth. g and h are indexed by dataset row.
struct GrowthProblem {
    const FeatureMatrix& x;
    std::span<const double> g;
    std::span<const double> h;
    RegularizationSpec reg;
    GrowthLimits limits;
    LeafMode mode = LeafMode::constant;

    std::size_t dim() const { return static_cast<std::size_t>(x.cols()); }
    std::span<const double> row(std::size_t i) const {
        return {x.data() + i * dim(), dim()};
    }
};

namespace detail {

struct LeafFit {
    LeafModel model;
    double objective = 0.0;
};

inline LeafFit fit_leaf(const GrowthProblem& p, std::span<const std::size_t> rows) {
    if (p.mode == LeafMode::constant) {
        ScalarLeafStats s;
        for (auto r : rows) s.add(p.g[r], p.h[r]);
        const LeafModel m = constant_fallback(s, p.reg);
        return {m, leaf_objective_term(std::get<ConstantLeaf>(m), s)};
    }
    LinearLeafStats s(p.dim());
    for (auto r : rows) s.add(p.row(r), p.g[r], p.h[r]);
    LeafModel m = solve_linear(s, p.reg);
    const double obj = leaf_objective_term(m, s);
    return {std::move(m), obj};
}

/// Running statistics for one side of a sweep, in either mode.
class SweepAccumulator {
public:
    SweepAccumulator(const GrowthProblem& p) : p_(p), linear_(p.dim()), solver_(p.dim()) {}

    void reset() {
        scalar_ = {};
        if (p_.mode == LeafMode::linear) {
            linear_.g_tilde.setZero();
            linear_.H_tilde.setZero();
            linear_.count = 0;
        }
    }

    void add(std::size_t r) {
        if (p_.mode == LeafMode::constant)
            scalar_.add(p_.g[r], p_.h[r]);
        else
            linear_.add(p_.row(r), p_.g[r], p_.h[r]);
    }

    double objective() {
        if (p_.mode == LeafMode::constant) {
            const double denom = scalar_.H + p_.reg.lambda;
            return denom > 0.0 ? -0.5 * scalar_.G * scalar_.G / denom : 0.0;
        }
        return solver_.objective(linear_, p_.reg.lambda);
    }

private:
    const GrowthProblem& p_;
    ScalarLeafStats scalar_;
    LinearLeafStats linear_;
    LinearLeafSolver solver_;
};

struct ScanBuffers {
    std::vector<double> left_terms;
    std::vector<double> right_terms;
};

inline double midpoint_threshold(double lo, double hi) {
    const double mid = lo + 0.5 * (hi - lo);
    return mid > lo ? mid : hi;
}

/// Scans all thresholds of one feature. sorted_rows are the node's rows in
/// ascending order of that feature. Replaces best only on a strictly larger
/// gain, so earlier features and lower thresholds win ties.
inline void scan_feature(const GrowthProblem& p, std::size_t feature, std::span<const std::size_t> sorted_rows,
                         double parent_objective, SweepAccumulator& acc, ScanBuffers& buf,
                         std::optional<Split>& best) {
    const std::size_t n = sorted_rows.size();
    if (n < 2) return;
    const auto value = [&](std::size_t pos) {
        return p.x(static_cast<Eigen::Index>(sorted_rows[pos]), static_cast<Eigen::Index>(feature));
    };
    const std::size_t min_leaf = p.limits.min_samples_leaf;
    // Candidate p splits between sorted positions p and p + 1.
    const auto legal = [&](std::size_t pos) {
        return pos + 1 >= min_leaf && n - pos - 1 >= min_leaf && value(pos) < value(pos + 1);
    };

    buf.left_terms.assign(n, 0.0);
    buf.right_terms.assign(n, 0.0);
    bool any = false;
    acc.reset();
    for (std::size_t pos = 0; pos + 1 < n; ++pos) {
        acc.add(sorted_rows[pos]);
        if (legal(pos)) {
            buf.left_terms[pos] = acc.objective();
            any = true;
        }
    }
    if (!any) return;
    acc.reset();
    for (std::size_t pos = n - 1; pos >= 1; --pos) {
        acc.add(sorted_rows[pos]);
        if (legal(pos - 1)) buf.right_terms[pos - 1] = acc.objective();
    }
    for (std::size_t pos = 0; pos + 1 < n; ++pos) {
        if (!legal(pos)) continue;
        const double gain = parent_objective - buf.left_terms[pos] - buf.right_terms[pos] - p.reg.gamma;
        if (!best || gain > best->gain)
            best = Split{feature, midpoint_threshold(value(pos), value(pos + 1)), gain};
    }
}

} // namespace detail

/**
 * Exact greedy split search over every feature and every threshold between
 * consecutive distinct values. The best split is returned even when its gain
 * is negative; none only when no candidate satisfies the child-size limit.
 */
inline std::optional<Split> find_best_split(const GrowthProblem& p, const SampleIndexSet& rows) {
    if (rows.size() < p.limits.min_samples_split || rows.size() < 2) return std::nullopt;
    // Same row orders as the grower, so near-singular leaves round identically.
    std::vector<std::vector<std::size_t>> sorted(p.dim(), rows.indices);
    for (std::size_t f = 0; f < p.dim(); ++f) {
        const auto col = static_cast<Eigen::Index>(f);
        std::stable_sort(sorted[f].begin(), sorted[f].end(), [&](std::size_t a, std::size_t b) {
            return p.x(static_cast<Eigen::Index>(a), col) < p.x(static_cast<Eigen::Index>(b), col);
        });
    }
    const double parent = detail::fit_leaf(p, sorted.front()).objective;
    detail::SweepAccumulator acc(p);
    detail::ScanBuffers buf;
    std::optional<Split> best;
    for (std::size_t f = 0; f < p.dim(); ++f) detail::scan_feature(p, f, sorted[f], parent, acc, buf, best);
    return best;
}

namespace detail {

/// Depth-first grower. Rows are pre-sorted once per feature; each node owns
/// the same [begin, end) range in every per-feature order, and a split
/// stable-partitions those ranges so children stay sorted.
class TreeGrower {
public:
    TreeGrower(const GrowthProblem& p, const SampleIndexSet& rows) : p_(p), acc_(p) {
        const std::size_t d = p.dim();
        order_.resize(d);
        for (std::size_t f = 0; f < d; ++f) {
            auto& o = order_[f];
            o = rows.indices;
            const auto col = static_cast<Eigen::Index>(f);
            std::stable_sort(o.begin(), o.end(), [&](std::size_t a, std::size_t b) {
                return p.x(static_cast<Eigen::Index>(a), col) < p.x(static_cast<Eigen::Index>(b), col);
            });
        }
        goes_left_.assign(static_cast<std::size_t>(p.x.rows()), 0);
    }

    Tree grow() {
        tree_.gamma = p_.reg.gamma;
        build(0, order_.front().size(), 0);
        return std::move(tree_);
    }

private:
    std::int32_t build(std::size_t begin, std::size_t end, int depth) {
        const auto index = static_cast<std::int32_t>(tree_.nodes.size());
        const std::span<const std::size_t> rows(order_.front().data() + begin, end - begin);
        LeafFit fit = fit_leaf(p_, rows);
        TreeNode node;
        node.model = std::move(fit.model);
        node.objective = fit.objective;
        node.count = rows.size();
        tree_.nodes.push_back(std::move(node));

        if (depth >= p_.limits.max_depth || rows.size() < p_.limits.min_samples_split || rows.size() < 2)
            return index;

        std::optional<Split> best;
        for (std::size_t f = 0; f < p_.dim(); ++f) {
            const std::span<const std::size_t> sorted(order_[f].data() + begin, end - begin);
            scan_feature(p_, f, sorted, fit.objective, acc_, buf_, best);
        }
        if (!best) return index;

        const auto col = static_cast<Eigen::Index>(best->feature);
        std::size_t n_left = 0;
        for (auto r : rows) {
            const bool left = p_.x(static_cast<Eigen::Index>(r), col) < best->threshold;
            goes_left_[r] = left ? 1 : 0;
            n_left += left ? 1 : 0;
        }
        for (auto& o : order_) partition(o, begin, end);

        const std::int32_t left = build(begin, begin + n_left, depth + 1);
        const std::int32_t right = build(begin + n_left, end, depth + 1);
        auto& self = tree_.nodes[static_cast<std::size_t>(index)];
        self.left = left;
        self.right = right;
        self.feature = best->feature;
        self.threshold = best->threshold;
        self.gain = self.objective - tree_.nodes[static_cast<std::size_t>(left)].objective -
                    tree_.nodes[static_cast<std::size_t>(right)].objective - p_.reg.gamma;
        return index;
    }

    void partition(std::vector<std::size_t>& o, std::size_t begin, std::size_t end) {
        scratch_.clear();
        std::size_t out = begin;
        for (std::size_t i = begin; i < end; ++i) {
            if (goes_left_[o[i]])
                o[out++] = o[i];
            else
                scratch_.push_back(o[i]);
        }
        std::copy(scratch_.begin(), scratch_.end(), o.begin() + static_cast<std::ptrdiff_t>(out));
    }

    const GrowthProblem& p_;
    std::vector<std::vector<std::size_t>> order_;
    std::vector<unsigned char> goes_left_;
    std::vector<std::size_t> scratch_;
    SweepAccumulator acc_;
    ScanBuffers buf_;
    Tree tree_;
};

inline void collect_preorder(const Tree& src, std::size_t index, Tree& dst) {
    const auto out = dst.nodes.size();
    dst.nodes.push_back(src.nodes[index]);
    const auto& n = src.nodes[index];
    if (n.is_leaf()) {
        dst.nodes[out].left = dst.nodes[out].right = -1;
        return;
    }
    dst.nodes[out].left = static_cast<std::int32_t>(dst.nodes.size());
    collect_preorder(src, static_cast<std::size_t>(n.left), dst);
    dst.nodes[out].right = static_cast<std::int32_t>(dst.nodes.size());
    collect_preorder(src, static_cast<std::size_t>(n.right), dst);
}

/// Drops nodes no longer reachable from the root.
inline Tree compact(const Tree& t) {
    Tree out;
    out.gamma = t.gamma;
    out.nodes.reserve(t.nodes.size());
    collect_preorder(t, 0, out);
    return out;
}

inline void make_leaf(TreeNode& n) {
    n.left = n.right = -1;
    n.gain = 0.0;
}

inline void prune_post_order(Tree& t, std::size_t index) {
    auto& n = t.nodes[index];
    if (n.is_leaf()) return;
    const auto l = static_cast<std::size_t>(n.left);
    const auto r = static_cast<std::size_t>(n.right);
    prune_post_order(t, l);
    prune_post_order(t, r);
    if (t.nodes[l].is_leaf() && t.nodes[r].is_leaf()) {
        const double gain = n.objective - t.nodes[l].objective - t.nodes[r].objective - t.gamma;
        if (gain < 0.0) make_leaf(n);
    }
}

inline void prune_pre_order(Tree& t, std::size_t index) {
    auto& n = t.nodes[index];
    if (n.is_leaf()) return;
    if (n.gain < 0.0) {
        const double as_subtree = t.subtree_objective(index);
        const double as_leaf = n.objective + t.gamma;
        if (!(as_subtree < as_leaf)) {
            make_leaf(n);
            return;
        }
    }
    prune_pre_order(t, static_cast<std::size_t>(n.left));
    prune_pre_order(t, static_cast<std::size_t>(n.right));
}

} // namespace detail

/**
 * Grows a tree top-down until max_depth, the sample-count limits, or the
 * lack of any legal split stops a branch. Negative-gain splits are accepted
 * here; pruning decides afterwards which of them survive.
 */
inline Tree grow_tree(const GrowthProblem& p, const SampleIndexSet& rows) {
    if (rows.empty()) throw std::invalid_argument("grow_tree needs at least one row");
    p.limits.validate();
    p.reg.validate();
    if (p.g.size() != static_cast<std::size_t>(p.x.rows()) || p.h.size() != p.g.size())
        throw std::invalid_argument("gradient/hessian length must equal the row count");
    detail::TreeGrower grower(p, rows);
    return grower.grow();
}

/// Collapses, in post-order, every split whose children are both leaves and whose gain is negative.
inline Tree prune_bottom_up(Tree tree) {
    detail::prune_post_order(tree, 0);
    return detail::compact(tree);
}

/**
 * Pre-order: at each negative-gain node, the whole subtree (leaf terms plus
 * gamma per leaf) is compared with the node as a single leaf and collapsed
 * unless strictly better. Returns none when what is left is a single leaf
 * that does not strictly decrease the objective.
 */
inline std::optional<Tree> prune_top_down(Tree tree) {
    detail::prune_pre_order(tree, 0);
    Tree out = detail::compact(tree);
    if (out.root().is_leaf() && !(out.root().objective + out.gamma < 0.0)) return std::nullopt;
    return out;
}

} // namespace linboost
