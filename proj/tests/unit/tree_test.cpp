#include <gtest/gtest.h>

#include "linboost/tree.hpp"
#include "test_support.hpp"
#include "tree_oracles.hpp"

namespace lb = linboost;

namespace {

struct Problem {
    lb::FeatureMatrix x;
    std::vector<double> g;
    std::vector<double> h;

    // Square loss at prediction 0 for residuals r: g = -2 r, h = 2.
    Problem(lb::FeatureMatrix features, const std::vector<double>& residuals) : x(std::move(features)) {
        for (double r : residuals) {
            g.push_back(-2.0 * r);
            h.push_back(2.0);
        }
    }

    lb::GrowthProblem make(lb::RegularizationSpec reg, lb::GrowthLimits limits, lb::LeafMode mode) const {
        return {x, g, h, reg, limits, mode};
    }
};

lb::FeatureMatrix column(std::initializer_list<double> v) {
    lb::FeatureMatrix m(static_cast<Eigen::Index>(v.size()), 1);
    Eigen::Index i = 0;
    for (double x : v) m(i++, 0) = x;
    return m;
}

lb::TreeNode leaf(double weight, double objective, std::size_t count = 1) {
    lb::TreeNode n;
    n.model = lb::ConstantLeaf{weight};
    n.objective = objective;
    n.count = count;
    return n;
}

lb::TreeNode split(std::int32_t left, std::int32_t right, double threshold, double objective, double gain) {
    lb::TreeNode n;
    n.left = left;
    n.right = right;
    n.threshold = threshold;
    n.objective = objective;
    n.gain = gain;
    n.model = lb::ConstantLeaf{0.0};
    return n;
}

} // namespace

TEST(FindBestSplit, StepResidualsGain) {
    const Problem pr(column({0, 1, 2, 3}), {0, 0, 10, 10});
    const auto p = pr.make({0.0, 0.0}, {}, lb::LeafMode::constant);
    const auto s = lb::find_best_split(p, lb::SampleIndexSet::all(4));
    ASSERT_TRUE(s);
    EXPECT_EQ(s->feature, 0u);
    EXPECT_GT(s->threshold, 1.0);
    EXPECT_LT(s->threshold, 2.0);
    // g = -2r, h = 2: parent G = -40, H = 8; the right side holds all of G with H = 4.
    const auto term = [](double G, double H) { return -0.5 * G * G / H; };
    EXPECT_NEAR(s->gain, term(-40, 8) - term(0, 4) - term(-40, 4), 1e-12);
    EXPECT_NEAR(s->gain, 100.0, 1e-12);
}

TEST(FindBestSplit, BelowMinSamplesSplitGivesNone) {
    const Problem pr(column({0, 1, 2, 3}), {0, 0, 10, 10});
    lb::GrowthLimits limits;
    limits.min_samples_split = 5;
    EXPECT_FALSE(lb::find_best_split(pr.make({0, 0}, limits, lb::LeafMode::constant), lb::SampleIndexSet::all(4)));
}

TEST(FindBestSplit, NoDistinctValuesGivesNone) {
    const Problem pr(column({1, 1, 1}), {0, 1, 2});
    EXPECT_FALSE(lb::find_best_split(pr.make({0, 0}, {}, lb::LeafMode::constant), lb::SampleIndexSet::all(3)));
}

TEST(FindBestSplit, LinearResidualsLeaveNothingToGain) {
    lb::FeatureMatrix x(12, 1);
    std::vector<double> r;
    for (int i = 0; i < 12; ++i) {
        x(i, 0) = 0.1 * i;
        r.push_back(3.0 * x(i, 0) - 1.0);
    }
    const Problem pr(x, r);
    lb::GrowthLimits limits;
    limits.min_samples_leaf = 3;
    const auto s = lb::find_best_split(pr.make({0, 0}, limits, lb::LeafMode::linear), lb::SampleIndexSet::all(12));
    ASSERT_TRUE(s);
    EXPECT_LE(s->gain, 1e-9);
}

TEST(FindBestSplit, TiesGoToLowerFeatureThenLowerThreshold) {
    // Both features carry the same ordering, so both offer identical gains.
    lb::FeatureMatrix x(4, 2);
    x << 0, 0, 1, 1, 2, 2, 3, 3;
    const Problem pr(x, {1, -1, 1, -1});
    const auto s = lb::find_best_split(pr.make({0, 0}, {}, lb::LeafMode::constant), lb::SampleIndexSet::all(4));
    ASSERT_TRUE(s);
    EXPECT_EQ(s->feature, 0u);
    EXPECT_LT(s->threshold, 1.0);
}

TEST(FindBestSplit, ThresholdSeparatesAdjacentDoubles) {
    const double lo = 1.0;
    const double hi = std::nextafter(1.0, 2.0);
    const Problem pr(column({lo, hi}), {0, 1});
    const auto s = lb::find_best_split(pr.make({0, 0}, {}, lb::LeafMode::constant), lb::SampleIndexSet::all(2));
    ASSERT_TRUE(s);
    EXPECT_FALSE(lo >= s->threshold);
    EXPECT_FALSE(hi < s->threshold);
}

TEST(FindBestSplit, MatchesBruteForceOnSmallInstances) {
    lb::Rng rng(31);
    for (int rep = 0; rep < 300; ++rep) {
        auto e = lb::testing::random_episode(rng, 12, 2, false);
        e.limits.min_samples_split = 2;
        const auto s = lb::find_best_split(e.problem(), e.rows);
        const auto oracle = lb::testing::brute_force_best_gain(e.x, e.g, e.h, e.rows.indices, e.mode, e.reg,
                                                               e.limits.min_samples_leaf);
        ASSERT_EQ(s.has_value(), oracle.has_value()) << "rep " << rep;
        if (s) {
            EXPECT_NEAR(s->gain, *oracle, 1e-10 * std::max(1.0, std::abs(*oracle))) << "rep " << rep;
        }
    }
}

TEST(GrowTree, DepthZeroIsTheRootLeaf) {
    const Problem pr(column({0, 1, 2, 3}), {0, 0, 10, 10});
    lb::GrowthLimits limits;
    limits.max_depth = 0;
    const auto t = lb::grow_tree(pr.make({0, 0}, limits, lb::LeafMode::constant), lb::SampleIndexSet::all(4));
    ASSERT_EQ(t.nodes.size(), 1u);
    EXPECT_DOUBLE_EQ(std::get<lb::ConstantLeaf>(t.root().model).weight, 5.0);
}

TEST(GrowTree, TwoPointsReproducedExactly) {
    const Problem pr(column({0.3, 0.7}), {-1.5, 4.0});
    const auto t = lb::grow_tree(pr.make({0, 0}, {}, lb::LeafMode::constant), lb::SampleIndexSet::all(2));
    EXPECT_EQ(t.depth(), 1);
    const std::vector<double> a{0.3}, b{0.7};
    EXPECT_DOUBLE_EQ(lb::predict_node(t, a), -1.5);
    EXPECT_DOUBLE_EQ(lb::predict_node(t, b), 4.0);
}

TEST(GrowTree, ConstantModeDrivesResidualsToZero) {
    lb::Rng rng(32);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 5 + rng.below(60);
        const auto x = lb::testing::random_features(rng, n, 1 + rng.below(3));
        std::vector<double> r(n);
        for (auto& v : r) v = 5.0 * rng.normal();
        const Problem pr(x, r);
        const auto t = lb::grow_tree(pr.make({0, 0}, {}, lb::LeafMode::constant), lb::SampleIndexSet::all(n));
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = pr.make({0, 0}, {}, lb::LeafMode::constant).row(i);
            EXPECT_NEAR(lb::predict_node(t, row), r[i], 1e-9);
        }
    }
}

TEST(GrowTree, RespectsSampleLimits) {
    lb::Rng rng(33);
    const auto x = lb::testing::random_features(rng, 80, 2);
    std::vector<double> r(80);
    for (auto& v : r) v = rng.normal();
    const Problem pr(x, r);
    lb::GrowthLimits limits;
    limits.min_samples_leaf = 7;
    const auto t = lb::grow_tree(pr.make({0, 0}, limits, lb::LeafMode::linear), lb::SampleIndexSet::all(80));
    for (const auto& n : t.nodes) EXPECT_GE(n.count, 7u);
}

TEST(PruneBottomUp, PositiveGainTreeUnchanged) {
    const Problem pr(column({0, 1, 2, 3}), {0, 0, 10, 10});
    const auto t = lb::grow_tree(pr.make({0, 0}, {}, lb::LeafMode::constant), lb::SampleIndexSet::all(4));
    const auto pruned = lb::prune_bottom_up(t);
    EXPECT_EQ(pruned.nodes.size(), t.nodes.size());
}

TEST(PruneBottomUp, NegativeStumpCollapses) {
    // Both halves have zero mean residual, so the split only costs gamma.
    const Problem pr(column({0, 1}), {0, 0});
    const auto t = lb::grow_tree(pr.make({0, 2.0}, {}, lb::LeafMode::constant), lb::SampleIndexSet::all(2));
    ASSERT_EQ(t.nodes.size(), 3u);
    EXPECT_DOUBLE_EQ(t.root().gain, -2.0);
    const auto pruned = lb::prune_bottom_up(t);
    EXPECT_EQ(pruned.nodes.size(), 1u);
}

TEST(PruneBottomUp, NegativeNodeAboveKeptSplitSurvives) {
    lb::Tree t;
    t.gamma = 1.0;
    t.nodes = {split(1, 4, 0.5, -10.0, -2.0), split(2, 3, 0.25, -3.0, 6.0), leaf(0, -5.0), leaf(0, -5.0),
               leaf(0, -6.0)};
    const auto pruned = lb::prune_bottom_up(t);
    EXPECT_EQ(pruned.nodes.size(), 5u);
    EXPECT_FALSE(pruned.root().is_leaf());
}

TEST(PruneTopDown, PositiveGainTreeUnchanged) {
    const Problem pr(column({0, 1, 2, 3}), {0, 0, 10, 10});
    lb::GrowthLimits limits;
    limits.max_depth = 1;
    const auto t = lb::grow_tree(pr.make({0, 0.1}, limits, lb::LeafMode::constant), lb::SampleIndexSet::all(4));
    ASSERT_GT(t.root().gain, 0.0);
    const auto pruned = lb::prune_top_down(t);
    ASSERT_TRUE(pruned);
    EXPECT_EQ(pruned->nodes.size(), t.nodes.size());
}

TEST(PruneTopDown, ZeroGradientLeafIsRemoved) {
    lb::Tree t;
    t.gamma = 3.0;
    t.nodes = {leaf(0, 0.0)};
    EXPECT_FALSE(lb::prune_top_down(t));
}

TEST(PruneTopDown, XorPatternKeepsTheNegativeRoot) {
    // Residuals [1, -1, 1, -1] at x = 0..3. Splitting at 1.5 leaves two
    // zero-mean halves (gain -gamma), but each half then splits into two
    // exactly fitted singletons.
    const Problem pr(column({0, 1, 2, 3}), {1, -1, 1, -1});
    const lb::RegularizationSpec reg{0.0, 0.1};
    const auto obj = [&](std::vector<std::size_t> rows) {
        return lb::testing::oracle_leaf_objective(pr.x, pr.g, pr.h, rows, lb::LeafMode::constant, reg);
    };
    lb::Tree t;
    t.gamma = reg.gamma;
    const double root = obj({0, 1, 2, 3});
    const double half = obj({0, 1});
    const double single = obj({0});
    EXPECT_DOUBLE_EQ(root, 0.0);
    EXPECT_DOUBLE_EQ(half, 0.0);
    EXPECT_DOUBLE_EQ(single, -1.0);
    t.nodes = {split(1, 4, 1.5, root, root - 2 * half - reg.gamma),
               split(2, 3, 0.5, half, half - 2 * single - reg.gamma),
               leaf(1, single),
               leaf(-1, single),
               split(5, 6, 2.5, half, half - 2 * single - reg.gamma),
               leaf(1, single),
               leaf(-1, single)};
    ASSERT_LT(t.root().gain, 0.0);
    const auto pruned = lb::prune_top_down(t);
    ASSERT_TRUE(pruned);
    EXPECT_EQ(pruned->nodes.size(), 7u);
    EXPECT_EQ(pruned->leaf_count(), 4u);

    // Bottom-up keeps it too, since the lower splits pay for themselves.
    EXPECT_EQ(lb::prune_bottom_up(t).nodes.size(), 7u);
}

TEST(PruneTopDown, NegativeSubtreeThatDoesNotPayCollapses) {
    lb::Tree t;
    t.gamma = 1.0;
    // Leaves improve on the root by 0.5 in total but cost an extra gamma.
    t.nodes = {split(1, 2, 0.5, -4.0, -0.5), leaf(0, -2.25), leaf(0, -2.25)};
    const auto pruned = lb::prune_top_down(t);
    ASSERT_TRUE(pruned);
    EXPECT_EQ(pruned->nodes.size(), 1u);
}

TEST(PredictNode, LeavesAndRouting) {
    lb::Tree c;
    c.nodes = {leaf(2.5, 0)};
    const std::vector<double> any{123.0};
    EXPECT_EQ(lb::predict_node(c, any), 2.5);

    lb::Tree l;
    lb::TreeNode n;
    n.model = lb::LinearLeaf{(lb::Vector(2) << 2, 1).finished()};
    l.nodes = {n};
    const std::vector<double> three{3.0};
    EXPECT_EQ(lb::predict_node(l, three), 7.0);

    lb::Tree s;
    s.nodes = {split(1, 2, 0.5, 0, 0), leaf(0, 0), leaf(1, 0)};
    EXPECT_EQ(lb::predict_node(s, std::vector<double>{0.4}), 0.0);
    EXPECT_EQ(lb::predict_node(s, std::vector<double>{0.6}), 1.0);
    EXPECT_EQ(lb::predict_node(s, std::vector<double>{0.5}), 1.0);
}

TEST(TreeInvariants, HoldOverRandomEpisodes) {
    lb::Rng rng(34);
    for (int rep = 0; rep < 300; ++rep) {
        const auto e = lb::testing::random_episode(rng, 60, 3, true);
        const auto problems = lb::testing::check_episode(e);
        EXPECT_TRUE(problems.empty()) << "episode " << rep << ":\n" << problems;
    }
}

TEST(LeafMode, ParseAndPrint) {
    EXPECT_EQ(lb::parse_leaf_mode("linear"), lb::LeafMode::linear);
    EXPECT_EQ(lb::parse_leaf_mode(lb::to_string(lb::LeafMode::constant)), lb::LeafMode::constant);
    EXPECT_THROW(lb::parse_leaf_mode("quadratic"), std::invalid_argument);
}
