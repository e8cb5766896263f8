#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "linboost/synth.hpp"
#include "test_support.hpp"

namespace lb = linboost;
namespace synth = linboost::synth;

TEST(HeavySine, Values) {
    EXPECT_EQ(synth::heavysine(0.0), 0.0);
    EXPECT_NEAR(synth::heavysine(0.5), -2.0, 1e-14);
}

TEST(HeavySine, MatchesSymbolicFormAtRandomPoints) {
    lb::Rng rng(61);
    const auto sgn = [](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); };
    for (int i = 0; i < 10000; ++i) {
        const double t = rng.uniform();
        const double expected = 4.0 * std::sin(4.0 * std::numbers::pi * t) - sgn(t - 0.3) - sgn(0.72 - t);
        EXPECT_NEAR(synth::heavysine(t), expected, 1e-15);
    }
}

TEST(HeavySine, SignOfZeroIsZero) {
    EXPECT_EQ(synth::sign(0.0), 0.0);
    EXPECT_EQ(synth::sign(-0.0), 0.0);
    EXPECT_EQ(synth::sign(-3.0), -1.0);
}

TEST(Jakeman1, Values) {
    EXPECT_DOUBLE_EQ(synth::jakeman1(0, 0), 2.5);
    EXPECT_NEAR(synth::jakeman1(1, 1), 1.0 / 1.8, 1e-15);
    const double r = std::sqrt(0.3);
    EXPECT_NEAR(synth::jakeman1(r * std::cos(0.7), r * std::sin(0.7)), 10.0, 1e-9);
}

TEST(Jakeman1, BoundedOnTheUnitSquare) {
    lb::Rng rng(62);
    for (int i = 0; i < 10000; ++i) {
        const double v = synth::jakeman1(rng.uniform(), rng.uniform());
        EXPECT_GT(v, 0.0);
        EXPECT_LE(v, 10.0);
    }
}

TEST(Jakeman4, Values) {
    EXPECT_EQ(synth::jakeman4(0.6, 0.2), 0.0);
    EXPECT_EQ(synth::jakeman4(0, 0), 1.0);
    EXPECT_NEAR(synth::jakeman4(0.5, 0.5), std::exp(1.75), 1e-12);
}

TEST(Jakeman4, ZeroOutsideTheLowerQuadrant) {
    lb::Rng rng(63);
    for (int i = 0; i < 10000; ++i) {
        const double a = rng.uniform();
        const double b = rng.uniform();
        const double v = synth::jakeman4(a, b);
        if (a > 0.5 || b > 0.5)
            EXPECT_EQ(v, 0.0);
        else
            EXPECT_GT(v, 0.0);
    }
}

TEST(Friedman1, Values) {
    std::vector<double> x(10, 0.0);
    EXPECT_DOUBLE_EQ(synth::friedman1(x), 5.0);
    x[2] = 0.5;
    EXPECT_DOUBLE_EQ(synth::friedman1(x), 0.0);
    x = {1, 0.5, 0.5, 0, 0, 0, 0, 0, 0, 0};
    EXPECT_NEAR(synth::friedman1(x), 10.0, 1e-14);
    EXPECT_THROW(synth::friedman1(std::vector<double>{1, 2}), std::invalid_argument);
}

TEST(GridDataset, CornersOfJakeman4) {
    const auto ds = synth::make_grid_dataset(synth::jakeman4_function(), {2}, {0.0, 0});
    ASSERT_EQ(ds.rows(), 4u);
    const double corners[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
    const double values[4] = {1, 0, 0, 0};
    for (Eigen::Index i = 0; i < 4; ++i) {
        EXPECT_EQ(ds.features(i, 0), corners[i][0]);
        EXPECT_EQ(ds.features(i, 1), corners[i][1]);
        EXPECT_EQ(ds.targets[i], values[i]);
    }
}

TEST(GridDataset, SizeSpacingAndSymmetricMeans) {
    const auto ds = synth::make_grid_dataset(synth::jakeman1_function(), {11}, {0.05, 3});
    ASSERT_EQ(ds.rows(), 121u);
    EXPECT_DOUBLE_EQ(ds.features(1, 1) - ds.features(0, 1), 0.1);
    EXPECT_EQ(ds.features(120, 0), 1.0);
    for (std::size_t m : {2u, 11u, 41u}) {
        const auto g = synth::make_grid_dataset(synth::jakeman1_function(), {m}, {0.0, 0});
        const lb::Vector means = g.features.colwise().mean().transpose();
        EXPECT_NEAR(means[0], 0.5, 1e-15);
        EXPECT_NEAR(means[1], 0.5, 1e-15);
    }
}

TEST(GridDataset, NoiseIsSeededAndCentred) {
    const auto a = synth::make_grid_dataset(synth::jakeman1_function(), {41}, {0.05, 7});
    const auto b = synth::make_grid_dataset(synth::jakeman1_function(), {41}, {0.05, 7});
    const auto c = synth::make_grid_dataset(synth::jakeman1_function(), {41}, {0.05, 8});
    const auto clean = synth::make_grid_dataset(synth::jakeman1_function(), {41}, {0.0, 7});
    EXPECT_TRUE((a.targets.array() == b.targets.array()).all());
    EXPECT_FALSE((a.targets.array() == c.targets.array()).all());
    const lb::Vector noise = a.targets - clean.targets;
    const double n = static_cast<double>(noise.size());
    const double mean = noise.mean();
    const double var = (noise.array() - mean).square().sum() / (n - 1.0);
    // 1681 draws: the standard error of the mean is about 0.0055, of the variance about 0.0017.
    EXPECT_LT(std::abs(mean), 0.025);
    EXPECT_NEAR(var, 0.05, 0.008);
}

TEST(RandomDataset, NoiseFreeTargetsMatchTheFormula) {
    const auto ds = synth::make_random_dataset(synth::friedman1_function(), 5, {0.0, 4});
    ASSERT_EQ(ds.cols(), 10u);
    for (Eigen::Index i = 0; i < 5; ++i) {
        std::vector<double> x(ds.features.row(i).begin(), ds.features.row(i).end());
        EXPECT_EQ(ds.targets[i], synth::friedman1(x));
        for (double v : x) {
            EXPECT_GT(v, 0.0);
            EXPECT_LT(v, 1.0);
        }
    }
}

TEST(RandomDataset, SeedsChangeTheFeatures) {
    const auto a = synth::make_random_dataset(synth::jakeman4_function(), 20, {0.0, 1});
    const auto b = synth::make_random_dataset(synth::jakeman4_function(), 20, {0.0, 2});
    const auto a2 = synth::make_random_dataset(synth::jakeman4_function(), 20, {0.0, 1});
    EXPECT_FALSE((a.features.array() == b.features.array()).all());
    EXPECT_TRUE((a.features.array() == a2.features.array()).all());
}

TEST(Functions, LookupByName) {
    for (const auto& name : synth::function_names()) EXPECT_EQ(synth::function_by_name(name).name, name);
    EXPECT_EQ(synth::function_by_name("friedman1").dim, 10u);
    EXPECT_THROW(synth::function_by_name("sinc"), std::invalid_argument);
}

TEST(Rng, UniformMomentsAndRange) {
    lb::Rng rng(64);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
        sq += u * u;
    }
    EXPECT_NEAR(sum / n, 0.5, 0.005);
    EXPECT_NEAR(sq / n - 0.25, 1.0 / 12.0, 0.002);
}

TEST(Rng, NormalMoments) {
    lb::Rng rng(65);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    EXPECT_NEAR(sum / n, 0.0, 0.01);
    EXPECT_NEAR(sq / n, 1.0, 0.015);
}

TEST(Rng, DerivedSeedsDiffer) {
    EXPECT_NE(lb::derive_seed(1, 0), lb::derive_seed(1, 1));
    EXPECT_NE(lb::derive_seed(1, 0), lb::derive_seed(2, 0));
    EXPECT_EQ(lb::derive_seed(5, 9), lb::derive_seed(5, 9));
}
