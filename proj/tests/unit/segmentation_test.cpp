#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "capfade/segmentation.hpp"
#include "../support/synthetic.hpp"

using namespace capfade;
namespace ct = capfade::testing;

namespace {

CurvatureSeries as_curvature(const std::vector<double>& k) {
    CurvatureSeries c;
    c.kappa = k;
    c.cycle.resize(k.size());
    std::iota(c.cycle.begin(), c.cycle.end(), 0.0);
    return c;
}

} // namespace

TEST(MatrixProfile, ExactCopiesPointAtEachOther) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    std::vector<double> x(80);
    for (double& v : x) v = g(rng);
    const std::vector<double> pattern{0.0, 3.0, -1.0, 4.0, 1.0, -5.0, 9.0, 2.0};
    std::copy(pattern.begin(), pattern.end(), x.begin() + 10);
    std::copy(pattern.begin(), pattern.end(), x.begin() + 50);
    const auto mp = matrix_profile(x, 8, 4);
    EXPECT_EQ(mp.distances[10], 0.0);
    EXPECT_EQ(mp.distances[50], 0.0);
    EXPECT_EQ(mp.indices[10], 50);
    EXPECT_EQ(mp.indices[50], 10);
}

TEST(MatrixProfile, MatchesBruteForceOnRandomWalk) {
    std::mt19937_64 rng(42);
    const auto x = ct::random_walk(64, rng);
    const auto mp = matrix_profile(x, 8, 4);
    const auto bp = ct::brute_force_profile(x, 8, 4);
    ASSERT_EQ(mp.distances.size(), 57u);
    for (std::size_t i = 0; i < bp.distances.size(); ++i) {
        EXPECT_EQ(mp.indices[i], bp.indices[i]) << i;
        EXPECT_NEAR(mp.distances[i], bp.distances[i], 1e-6 * bp.distances[i]) << i;
    }
}

TEST(MatrixProfile, AffineTransformLeavesProfileUnchanged) {
    std::mt19937_64 rng(9);
    const auto x = ct::random_walk(120, rng);
    std::vector<double> y(x.size());
    std::transform(x.begin(), x.end(), y.begin(), [](double v) { return 3.0 * v + 7.0; });
    const auto a = matrix_profile(x, 16, 8);
    const auto b = matrix_profile(y, 16, 8);
    EXPECT_EQ(a.indices, b.indices);
    for (std::size_t i = 0; i < a.distances.size(); ++i) {
        EXPECT_NEAR(a.distances[i], b.distances[i], 1e-9 * (1.0 + a.distances[i]));
    }
}

TEST(MatrixProfile, StructuralInvariants) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        const auto x = ct::random_walk(200, rng);
        const int m = 12;
        const int excl = 6;
        const auto mp = matrix_profile(x, m, excl);
        ASSERT_EQ(mp.distances.size(), x.size() - m + 1);
        ASSERT_EQ(mp.indices.size(), mp.distances.size());
        for (std::size_t i = 0; i < mp.indices.size(); ++i) {
            EXPECT_GT(std::abs(mp.indices[i] - static_cast<long>(i)), excl);
            EXPECT_GE(mp.distances[i], 0.0);
            EXPECT_LE(mp.distances[i], 2.0 * std::sqrt(m));
            const double recomputed = ct::znorm_distance(x, i, static_cast<std::size_t>(mp.indices[i]), m);
            EXPECT_NEAR(mp.distances[i], recomputed, 1e-6 * (recomputed + 1e-12));
        }
    }
}

TEST(MatrixProfile, ThreadCountDoesNotChangeResult) {
    std::mt19937_64 rng(8);
    const auto x = ct::random_walk(700, rng);
    const auto one = matrix_profile(x, 20, 10, 1);
    const auto many = matrix_profile(x, 20, 10, 8);
    EXPECT_EQ(one.indices, many.indices);
    EXPECT_EQ(one.distances, many.distances);
}

TEST(MatrixProfile, FlatSubsequences) {
    // Flat stretch followed by structure: flat-vs-flat matches are free.
    std::vector<double> x(60, 0.0);
    for (std::size_t i = 30; i < 60; ++i) x[i] = std::sin(0.9 * static_cast<double>(i)) + 0.01 * static_cast<double>(i);
    const auto mp = matrix_profile(x, 6, 3);
    EXPECT_EQ(mp.distances[0], 0.0);
    EXPECT_LE(mp.indices[0], 24);
}

TEST(MatrixProfile, Errors) {
    std::mt19937_64 rng(2);
    const auto x = ct::random_walk(40, rng);
    EXPECT_THROW(matrix_profile(x, 3, 2), ConfigError);
    EXPECT_THROW(matrix_profile(x, 21, 2), ConfigError);
    EXPECT_THROW(matrix_profile(x, 8, 0), ConfigError);
    EXPECT_THROW(matrix_profile(std::vector<double>(40, 2.5), 8, 4), DegenerateInputError);
}

TEST(CorrectedArcCurve, NoArcsBeyondRightmostEndpoint) {
    MatrixProfile mp;
    mp.m = 10;
    mp.exclusion = 5;
    const long len = 200;
    mp.distances.assign(len, 1.0);
    mp.indices.resize(len);
    for (long i = 0; i < len; ++i) {
        mp.indices[i] = i < 100 ? (i + 37) % 100 : (i + 1 < len ? i + 1 : i - 1);
    }
    const auto cac = corrected_arc_curve(mp);
    long rightmost = 0;
    for (long i = 0; i < 100; ++i) rightmost = std::max(rightmost, mp.indices[i]);
    for (long k = rightmost; k < len - mp.m; ++k) EXPECT_EQ(cac[k], 0.0) << k;
    for (long k = mp.m; k < 60; ++k) EXPECT_GT(cac[k], 0.0);
}

TEST(CorrectedArcCurve, RandomNeighborsSitNearOne) {
    std::mt19937_64 rng(17);
    const long len = 500;
    const int excl = 5;
    double total = 0.0;
    long count = 0;
    for (int trial = 0; trial < 100; ++trial) {
        MatrixProfile mp;
        mp.m = 10;
        mp.exclusion = excl;
        mp.distances.assign(len, 1.0);
        mp.indices.resize(len);
        std::uniform_int_distribution<long> pick(0, len - 1);
        for (long i = 0; i < len; ++i) {
            long j;
            do j = pick(rng);
            while (std::abs(j - i) <= excl);
            mp.indices[i] = j;
        }
        const auto cac = corrected_arc_curve(mp);
        for (long k = mp.m; k < len - mp.m; ++k) {
            ASSERT_GE(cac[k], 0.0);
            ASSERT_LE(cac[k], 1.0);
            total += cac[k];
            ++count;
        }
    }
    const double mean = total / static_cast<double>(count);
    EXPECT_GE(mean, 0.85);
    EXPECT_LE(mean, 1.0);
}

TEST(CorrectedArcCurve, EdgesClampedToOne) {
    std::mt19937_64 rng(4);
    const auto x = ct::random_walk(300, rng);
    const auto mp = matrix_profile(x, 15, 8);
    const auto cac = corrected_arc_curve(mp);
    for (int k = 0; k < 15; ++k) {
        EXPECT_EQ(cac[k], 1.0);
        EXPECT_EQ(cac[cac.size() - 1 - k], 1.0);
    }
    for (double v : cac) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(ExtractRegimes, TwoPlantedZeros) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.3, 1.0);
    std::vector<double> cac(571);
    for (double& v : cac) v = u(rng);
    cac[190] = 0.0;
    cac[452] = 0.0;
    EXPECT_EQ(extract_regimes(cac, 2, 25), (std::vector<long>{190, 452}));
}

TEST(ExtractRegimes, MonotoneDecreasingPicksLast) {
    std::vector<double> cac(100);
    for (int i = 0; i < 100; ++i) cac[i] = 1.0 - 0.01 * i;
    EXPECT_EQ(extract_regimes(cac, 1, 10), (std::vector<long>{99}));
}

TEST(ExtractRegimes, TieGoesToSmallestIndexAndMaskApplies) {
    std::vector<double> cac(300, 0.9);
    cac[100] = 0.1;
    cac[101] = 0.1;
    cac[250] = 0.5;
    const auto b = extract_regimes(cac, 2, 25);
    EXPECT_EQ(b, (std::vector<long>{100, 250}));
}

TEST(ExtractRegimes, TooShortIsConfigError) {
    const std::vector<double> cac(50, 0.5);
    EXPECT_THROW(extract_regimes(cac, 2, 20), ConfigError);
    EXPECT_THROW(extract_regimes(cac, 0, 5), ConfigError);
}

TEST(IdentifyKnee, OrderedBoundariesAndAffineInvariance) {
    // A regime change that FLUSS resolves cleanly: three distinct periodic regimes.
    std::vector<double> k(600);
    for (int i = 0; i < 600; ++i) {
        if (i < 200) k[i] = std::sin(2 * 3.14159265358979 * i / 23.0);
        else if (i < 450) k[i] = std::sin(2 * 3.14159265358979 * i / 9.0) + 0.5 * std::sin(2 * 3.14159265358979 * i / 5.3);
        else k[i] = std::abs(std::fmod(i / 17.0, 2.0) - 1.0);
    }
    const auto base = identify_knee(as_curvature(k), SegmentationConfig{});
    EXPECT_LT(base.onset_index, base.knee_index);
    EXPECT_GT(base.onset_index, 0);
    EXPECT_NEAR(base.onset_index, 200, 30);
    EXPECT_NEAR(base.knee_index, 450, 30);
    EXPECT_DOUBLE_EQ(base.onset_cycle, static_cast<double>(base.onset_index));
    for (double a : {2.0, 0.001, 1e-5}) {
        for (double b : {0.0, -3.0, 1e-6}) {
            std::vector<double> t(k.size());
            std::transform(k.begin(), k.end(), t.begin(), [&](double v) { return a * v + b; });
            const auto p = identify_knee(as_curvature(t), SegmentationConfig{});
            EXPECT_EQ(p.onset_index, base.onset_index) << a << ' ' << b;
            EXPECT_EQ(p.knee_index, base.knee_index) << a << ' ' << b;
        }
    }
}

TEST(IdentifyKnee, FlatCurvatureIsDegenerate) {
    EXPECT_THROW(identify_knee(as_curvature(std::vector<double>(500, 0.0)), SegmentationConfig{}),
                 DegenerateInputError);
    std::vector<double> tiny(500);
    for (int i = 0; i < 500; ++i) tiny[i] = 1e-19 * std::sin(i);
    EXPECT_THROW(identify_knee(as_curvature(tiny), SegmentationConfig{}), DegenerateInputError);
}

TEST(IdentifyKnee, ShortSeriesRejected) {
    std::mt19937_64 rng(1);
    const auto x = ct::random_walk(100, rng);
    EXPECT_THROW(identify_knee(as_curvature(x), 30), InsufficientDataError);
}

TEST(IdentifyKnee, DeterministicAcrossThreads) {
    const auto t = ct::three_regime_series(1234);
    SegmentationConfig one;
    SegmentationConfig eight;
    eight.threads = 8;
    const auto a = segment_regimes(t.x, one);
    const auto b = segment_regimes(t.x, eight);
    EXPECT_EQ(a.boundaries, b.boundaries);
    EXPECT_EQ(a.cac, b.cac);
}

TEST(DefaultSubsequenceLength, ClampsAroundTwentieth) {
    EXPECT_EQ(default_subsequence_length(500), 25);
    EXPECT_EQ(default_subsequence_length(100), 10);
    EXPECT_EQ(default_subsequence_length(5000), 100);
    EXPECT_EQ(default_subsequence_length(30), 7);
}
