// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "rfo/error.hpp"
#include "rfo/metrics.hpp"
#include "rfo/mixture.hpp"
#include "rfo/noise.hpp"

namespace {

using rfo::StateBatch;

double dist(const StateBatch& a, std::size_t i, const StateBatch& b, std::size_t j) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.dim(); ++k) s += (a(i, k) - b(j, k)) * (a(i, k) - b(j, k));
    return std::sqrt(s);
}

double brute_energy(const StateBatch& a, const StateBatch& b) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.batch(); ++i)
        for (std::size_t j = 0; j < b.batch(); ++j) ab += dist(a, i, b, j);
    for (std::size_t i = 0; i < a.batch(); ++i)
        for (std::size_t j = 0; j < a.batch(); ++j) aa += dist(a, i, a, j);
    for (std::size_t i = 0; i < b.batch(); ++i)
        for (std::size_t j = 0; j < b.batch(); ++j) bb += dist(b, i, b, j);
    const double na = static_cast<double>(a.batch()), nb = static_cast<double>(b.batch());
    return 2.0 * ab / (na * nb) - aa / (na * na) - bb / (nb * nb);
}

TEST(EnergyDistance, MatchesBruteForce) {
    rfo::NoiseSource rng(1);
    const StateBatch a = rng.normal_batch(57, 3);
    StateBatch b = rng.normal_batch(41, 3);
    for (double& x : b.values()) x += 0.3;
    const auto r = rfo::energy_distance(a, b);
    EXPECT_NEAR(r.value, brute_energy(a, b), 1e-12);
    EXPECT_EQ(r.n_a, 57u);
    EXPECT_EQ(r.n_b, 41u);
    EXPECT_EQ(rfo::energy_distance(a, a).value, 0.0);
    EXPECT_THROW((void)rfo::energy_distance(a, rng.normal_batch(3, 2)), rfo::ShapeError);
}

TEST(EnergyTest, RejectsShiftAndCalibratesUnderNull) {
    rfo::NoiseSource rng(2);
    int rejections = 0;
    const int trials = 40;
    for (int k = 0; k < trials; ++k) {
        const StateBatch a = rng.normal_batch(60, 2);
        const StateBatch b = rng.normal_batch(60, 2);
        const auto r = rfo::energy_test(a, b, 99, 0.05, rng);
        rejections += r.verdict == rfo::Verdict::fail;
        const double p = r.details.at("p_value");
        EXPECT_GT(p, 0.0);
        EXPECT_LE(p, 1.0);
    }
    // Binomial(40, 0.05): P(X >= 8) < 1e-3.
    EXPECT_LT(rejections, 8);

    const StateBatch a = rng.normal_batch(200, 2);
    StateBatch b = rng.normal_batch(200, 2);
    for (double& x : b.values()) x += 1.0;
    const auto r = rfo::energy_test(a, b, 199, 0.01, rng);
    EXPECT_EQ(r.verdict, rfo::Verdict::fail);
    EXPECT_DOUBLE_EQ(r.details.at("p_value"), 1.0 / 200.0);
    EXPECT_THROW((void)rfo::energy_test(a, b, 10, 1.5, rng), rfo::DomainError);
}

TEST(Wasserstein, OneDimensionalShiftAndScale) {
    std::vector<double> a{0.0, 1.0, 2.0, 3.0};
    std::vector<double> b{3.5, 0.5, 2.5, 1.5};
    EXPECT_NEAR(rfo::wasserstein2_1d(a, b), 0.5, 1e-15);
    EXPECT_NEAR(rfo::wasserstein2_1d({0.0, 0.0}, {1.0, -1.0}), 1.0, 1e-15);
    // Unequal sizes: quantile coupling of {0} against {-1, 1} costs 1 per unit mass.
    EXPECT_NEAR(rfo::wasserstein2_1d({0.0}, {-1.0, 1.0}), 1.0, 1e-15);
    EXPECT_THROW((void)rfo::wasserstein2_1d({}, {1.0}), rfo::ShapeError);
}

TEST(Wasserstein, SlicedDistanceOfShiftMatchesProjectionAverage) {
    // Translating by delta gives W2 = |delta . u| per direction; E over uniform
    // directions in 2-D is 2 |delta| / pi.
    rfo::NoiseSource rng(3);
    const StateBatch a = rng.normal_batch(500, 2);
    StateBatch b = a;
    for (std::size_t i = 0; i < b.batch(); ++i) b(i, 0) += 2.0;
    const auto r = rfo::sliced_wasserstein(a, b, 4000, rng);
    ASSERT_TRUE(r.std_error.has_value());
    EXPECT_NEAR(r.value, 4.0 / std::numbers::pi, 5.0 * *r.std_error);
}

TEST(MomentTest, PassesOnLawSamplesFailsOnShift) {
    const auto gm = rfo::mixture_preset("two-modes");
    const auto law = rfo::marginal_at(gm, 0.6);
    rfo::NoiseSource rng(4);
    const StateBatch x = rfo::sample_target(law, 20000, rng);
    const auto ok = rfo::moment_test(x, law, 4.0);
    EXPECT_EQ(ok.verdict, rfo::Verdict::pass) << ok.value;
    EXPECT_TRUE(ok.details.contains("mean_z_0"));
    EXPECT_TRUE(ok.details.contains("cov_z_0_1"));

    StateBatch y = x;
    for (std::size_t i = 0; i < y.batch(); ++i) y(i, 1) += 0.1;
    EXPECT_EQ(rfo::moment_test(y, law, 4.0).verdict, rfo::Verdict::fail);
    EXPECT_EQ(rfo::moment_test(x.slice_rows(0, 1), law).verdict, rfo::Verdict::inconclusive);
}

TEST(Reports, JsonHasSortedStableKeys) {
    rfo::MetricReport r;
    r.metric = "energy_distance";
    r.value = 0.25;
    r.seed = 3;
    r.verdict = rfo::Verdict::pass;
    r.details["z"] = 1.0;
    const auto j = rfo::report_to_json(r);
    EXPECT_EQ(j.at("metric"), "energy_distance");
    EXPECT_EQ(j.at("verdict"), "pass");
    EXPECT_TRUE(j.at("std_error").is_null());
    EXPECT_EQ(j.dump(), rfo::report_to_json(r).dump());
    EXPECT_EQ(rfo::to_string(rfo::Verdict::inconclusive), "inconclusive");
}

}  // namespace
