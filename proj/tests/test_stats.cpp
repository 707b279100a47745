#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "oracles.hpp"
#include "srpl/stats.hpp"

using namespace srpl;

TEST(Wilcoxon, ExactThreePositive) {
    const std::vector<double> d{1, 2, 3};
    const auto r = wilcoxon_signed_rank(d);
    EXPECT_TRUE(r.exact);
    EXPECT_EQ(r.w_minus, 0.0);
    EXPECT_EQ(r.w_plus, 6.0);
    EXPECT_DOUBLE_EQ(r.p_two_sided, 0.25);
}

TEST(Wilcoxon, SymmetricPairIsOne) {
    const std::vector<double> d{-1, 1};
    EXPECT_DOUBLE_EQ(wilcoxon_signed_rank(d).p_two_sided, 1.0);
}

TEST(Wilcoxon, EffectSizeFormula) {
    EXPECT_DOUBLE_EQ(2.0 / std::sqrt(100.0), 0.2);
    EXPECT_EQ(effect_magnitude(0.2), Magnitude::small);
    EXPECT_EQ(effect_magnitude(0.09), Magnitude::negligible);
    EXPECT_EQ(effect_magnitude(0.3), Magnitude::medium);
    EXPECT_EQ(effect_magnitude(-0.5), Magnitude::large);
    // r recomputed from the reported z over every pair
    Rng rng = make_stream(51, 0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> d(100);
        for (auto& v : d) v = uniform01(rng) < 0.2 ? 0.0 : standard_normal(rng) + 0.3;
        const auto r = wilcoxon_signed_rank(d);
        EXPECT_NEAR(r.effect_size_r, std::abs(r.z) / 10.0, 1e-12);
        EXPECT_NEAR(r.effect_size_r_effective, std::abs(r.z) / std::sqrt(double(r.n_effective)), 1e-12);
        EXPECT_EQ(r.magnitude, effect_magnitude(r.effect_size_r));
        EXPECT_EQ(r.significant, r.p_two_sided < 0.05);
    }
}

TEST(Wilcoxon, ExactMatchesEnumeration) {
    Rng rng = make_stream(52, 0);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + uniform_index(rng, 12);
        std::vector<double> d(n);
        // Small integers so ties and zeros occur.
        for (auto& v : d) v = static_cast<double>(static_cast<int>(uniform_index(rng, 9)) - 4);
        const auto r = wilcoxon_signed_rank(d);
        if (r.degenerate) continue;
        ASSERT_TRUE(r.exact);
        EXPECT_NEAR(r.p_two_sided, oracle::enumerate_signed_rank_p(d), 1e-12);
    }
}

TEST(Wilcoxon, ExactAgreesWithNormalAtTwelve) {
    Rng rng = make_stream(53, 0);
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> d(12);
        const double shift = uniform(rng, -1.0, 1.0);
        for (auto& v : d) v = standard_normal(rng) + shift;
        const auto e = wilcoxon_signed_rank(d);
        const auto a = wilcoxon_signed_rank_normal(d);
        ASSERT_TRUE(e.exact);
        ASSERT_FALSE(a.exact);
        worst = std::max(worst, std::abs(e.p_two_sided - a.p_two_sided));
    }
    EXPECT_LE(worst, 0.02);
}

TEST(Wilcoxon, NullCalibration) {
    Rng rng = make_stream(54, 0);
    int hits = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> d(50);
        for (auto& v : d) v = standard_normal(rng) - standard_normal(rng);
        hits += wilcoxon_signed_rank(d).significant ? 1 : 0;
    }
    EXPECT_NEAR(hits / 1000.0, 0.05, 0.02);
}

TEST(Wilcoxon, AllPositiveLargeSample) {
    std::vector<double> d(1000, 1.0);
    const auto r = wilcoxon_signed_rank(d);
    EXPECT_FALSE(r.exact);
    EXPECT_LT(r.p_two_sided, 1e-3);
    EXPECT_GT(r.z, 0.0);
}

TEST(Wilcoxon, ScaleInvariantAndAntisymmetric) {
    Rng rng = make_stream(55, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 5 + uniform_index(rng, 60);
        std::vector<double> d(n), scaled(n), neg(n);
        const double c = uniform(rng, 0.01, 100.0);
        for (std::size_t i = 0; i < n; ++i) {
            d[i] = standard_normal(rng) + 0.2;
            scaled[i] = c * d[i];
            neg[i] = -d[i];
        }
        const auto a = wilcoxon_signed_rank(d);
        const auto b = wilcoxon_signed_rank(scaled);
        const auto m = wilcoxon_signed_rank(neg);
        EXPECT_EQ(a.w_plus, b.w_plus);
        EXPECT_EQ(a.p_two_sided, b.p_two_sided);
        EXPECT_EQ(a.effect_size_r, b.effect_size_r);
        EXPECT_EQ(a.z, -m.z);
        EXPECT_EQ(a.p_two_sided, m.p_two_sided);
        EXPECT_EQ(a.w_plus, m.w_minus);
    }
}

TEST(Wilcoxon, ZerosAndDegenerate) {
    const std::vector<double> zeros(7, 0.0);
    const auto z = wilcoxon_signed_rank(zeros);
    EXPECT_TRUE(z.degenerate);
    EXPECT_EQ(z.p_two_sided, 1.0);
    EXPECT_EQ(z.effect_size_r, 0.0);
    const std::vector<double> some{0, 0, 1, 2, 3};
    const auto s = wilcoxon_signed_rank(some);
    EXPECT_EQ(s.n_pairs, 5u);
    EXPECT_EQ(s.n_effective, 3u);
    EXPECT_DOUBLE_EQ(s.p_two_sided, 0.25);
}

TEST(Wilcoxon, RejectsEmptyAndNonFinite) {
    EXPECT_THROW(wilcoxon_signed_rank(std::vector<double>{}), std::invalid_argument);
    EXPECT_THROW(wilcoxon_signed_rank(std::vector<double>{1.0, NAN}), std::invalid_argument);
}

TEST(Wilcoxon, TieCorrectedNormal) {
    // Ranks 1.5,1.5,3,4,5,6 for |d|; variance shrinks by sum(t^3 - t)/48 = 6/48.
    const std::vector<double> d{1, -1, 2, 3, 4, 5};
    const auto r = wilcoxon_signed_rank_normal(d);
    const double mean = 6 * 7 / 4.0;
    const double var = 6 * 7 * 13 / 24.0 - 6.0 / 48.0;
    const double w = 1.5 + 3 + 4 + 5 + 6;
    EXPECT_DOUBLE_EQ(r.w_plus, w);
    EXPECT_NEAR(r.z, (w - mean - 0.5) / std::sqrt(var), 1e-12);
    EXPECT_NEAR(r.p_two_sided, std::erfc(std::abs(r.z) / std::sqrt(2.0)), 1e-12);
}

TEST(TestResult, JsonFields) {
    const auto j = nlohmann::json::parse(wilcoxon_signed_rank(std::vector<double>{1, 2, 3}).to_json());
    EXPECT_EQ(j["n"], 3);
    EXPECT_EQ(j["W_minus"], 0.0);
    EXPECT_DOUBLE_EQ(j["p"].get<double>(), 0.25);
    EXPECT_EQ(j["exact"], true);
    EXPECT_EQ(j["magnitude"], "large");
}
