// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "mvsde/error.hpp"
#include "mvsde/model.hpp"
#include "mvsde/stability.hpp"

namespace {

using namespace mvsde;

std::vector<double> dyadic(int from, int to) {
    std::vector<double> v;
    for (int j = from; j <= to; ++j) v.push_back(std::ldexp(1.0, -j));
    return v;
}

TEST(FitTailSlope, ExactPowerLaw) {
    const std::vector<double> axis{1.0, 0.5, 0.25, 0.125};
    std::vector<double> err;
    for (double a : axis) err.push_back(3.0 * a * a);
    EXPECT_NEAR(fit_tail_slope(axis, err), 2.0, 1e-12);
}

TEST(FitTailSlope, UsesOnlyTheTail) {
    // the first two points break the law; the last ceil(4/2) = 2 follow a^1
    const std::vector<double> axis{1.0, 0.5, 0.25, 0.125};
    const std::vector<double> err{100.0, 50.0, 0.25, 0.125};
    EXPECT_NEAR(fit_tail_slope(axis, err), 1.0, 1e-12);
}

TEST(FitTailSlope, SkipsZerosAndNeedsTwoPoints) {
    const std::vector<double> axis{1.0, 0.5, 0.0};
    const std::vector<double> err{1.0, 0.25, 0.0};
    EXPECT_TRUE(std::isnan(fit_tail_slope(axis, err)));
}

TEST(StabilityInitial, StaticModelGivesDeltaSquared) {
    const TimeGrid g(1.0, 10);
    const std::vector<double> x{0.0};
    const std::vector<double> deltas{0.5, 0.25, 0.125, 0.0};
    const auto r = stability_initial(make_zero_model(1), x, deltas, g, 16, 1);
    ASSERT_EQ(r.errors.size(), 4u);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(r.errors[j], deltas[j] * deltas[j]);
    EXPECT_EQ(r.errors[3], 0.0);
    EXPECT_EQ(r.mc_std[0], 0.0);
    EXPECT_NEAR(r.slope, 1.0, 1e-12);
    EXPECT_EQ(r.kind, "initial");
}

TEST(StabilityInitial, MeanFieldOuRateAndBoundForm) {
    const TimeGrid g(1.0, 100);
    const std::vector<double> x{1.0};
    const auto deltas = dyadic(1, 6);
    const auto r = stability_initial(make_mean_field_ou(1.0, 0.3), x, deltas, g, 2000, 5);
    EXPECT_GE(r.slope, 0.9);
    EXPECT_LE(r.slope, 1.1);
    std::vector<double> quotient;
    for (std::size_t j = 0; j < deltas.size(); ++j) quotient.push_back(r.errors[j] / (deltas[j] * deltas[j]));
    const auto [lo, hi] = std::minmax_element(quotient.begin(), quotient.end());
    EXPECT_LE(*hi / *lo, 3.0);
    for (std::size_t j = 1; j < r.errors.size(); ++j) EXPECT_LE(r.errors[j], r.errors[j - 1] + 2.0 * r.mc_std[j]);
}

TEST(StabilityInitial, RejectsBadSizes) {
    const TimeGrid g(1.0, 4);
    const std::vector<double> x{0.0};
    const auto model = make_mean_field_ou(1.0, 0.3);
    EXPECT_THROW(stability_initial(model, x, std::vector<double>{0.5, 0.25}, g, 4, 1), Error);
    EXPECT_THROW(stability_initial(model, x, std::vector<double>{0.5, 0.5, 0.25}, g, 4, 1), Error);
    EXPECT_THROW(stability_initial(model, x, std::vector<double>{0.5, 0.25, -0.1}, g, 4, 1), Error);
}

TEST(StabilityCoefficients, ConstantBumpGivesDeterministicGap) {
    const TimeGrid g(2.0, 8);
    const std::vector<double> x0{0.0};
    const std::vector<double> eps{0.5, 0.25, 0.125, 0.0};
    const auto r = stability_coefficients(make_zero_model(1), x0, eps, g, 4, 1, CoefficientBumps::constant_drift(1));
    for (std::size_t j = 0; j < eps.size(); ++j) {
        const double expected = (eps[j] * g.horizon()) * (eps[j] * g.horizon());
        EXPECT_NEAR(r.errors[j], expected, 1e-14 * std::max(1.0, expected));
    }
    EXPECT_EQ(r.errors.back(), 0.0);
}

TEST(StabilityCoefficients, MeanFieldOuWithTanhBumps) {
    const TimeGrid g(1.0, 100);
    const std::vector<double> x0{1.0};
    const auto r = stability_coefficients(make_mean_field_ou(1.0, 0.3), x0, dyadic(1, 6), g, 2000, 6,
                                          CoefficientBumps::tanh_bumps(1));
    EXPECT_NEAR(r.slope, 2.0, 0.3);
}

TEST(PerturbCoefficients, AddsScaledBumps) {
    const auto base = make_mean_field_ou(1.0, 0.3);
    const auto bumped = perturb_coefficients(base, CoefficientBumps::tanh_bumps(1), 0.1);
    const auto mu = EmpiricalMeasure::uniform({0.0, 1.0}, 1);
    const std::vector<double> x{0.7};
    EXPECT_DOUBLE_EQ(bumped.drift(0.0, x, mu)[0], base.drift(0.0, x, mu)[0] + 0.1 * std::tanh(0.7));
    EXPECT_DOUBLE_EQ(bumped.diffusion(0.0, x, mu)[0], 0.3 + 0.1 * std::tanh(0.7));
    EXPECT_DOUBLE_EQ(*bumped.lipschitz_L(), 1.1);
    EXPECT_TRUE(validate_hypotheses(bumped, make_probes(1, 4)).passed);
}

TEST(StabilityDrivers, ExactSentinelAndDeterministicGap) {
    const TimeGrid g(1.0, 10);
    const std::vector<double> x0{0.0};
    const std::vector<std::int64_t> n{2, 4, 8, kExactDriver};
    const auto r = stability_drivers(make_constant_model({1.0}, 0.0), x0, n, g, 3, 1);
    for (std::size_t j = 0; j < 3; ++j) {
        const double gap = g.horizon() / static_cast<double>(n[j]);
        EXPECT_NEAR(r.errors[j], gap * gap, 1e-14);
    }
    EXPECT_EQ(r.errors[3], 0.0);
    EXPECT_EQ(r.perturbation_sizes[3], 0.0);
    const auto echo = std::find_if(r.config.begin(), r.config.end(), [](const auto& kv) {
        return kv.first == "tv_gap[n=4]";
    });
    ASSERT_NE(echo, r.config.end());
    EXPECT_EQ(std::stod(echo->second), 0.25);
}

TEST(StabilityDrivers, MeanFieldOuRate) {
    const TimeGrid g(1.0, 100);
    const std::vector<double> x0{1.0};
    const std::vector<std::int64_t> n{2, 4, 8, 16, 32};
    const auto r = stability_drivers(make_mean_field_ou(1.0, 0.3), x0, n, g, 2000, 7);
    EXPECT_NEAR(r.slope, 2.0, 0.3);
    for (std::size_t j = 1; j < r.errors.size(); ++j) EXPECT_LT(r.errors[j], r.errors[j - 1]);
}

TEST(StabilityDrivers, RejectsBadLists) {
    const TimeGrid g(1.0, 4);
    const std::vector<double> x0{0.0};
    const auto model = make_mean_field_ou(1.0, 0.3);
    EXPECT_THROW(stability_drivers(model, x0, std::vector<std::int64_t>{4, 2, 8}, g, 2, 1), Error);
    EXPECT_THROW(stability_drivers(model, x0, std::vector<std::int64_t>{0, 2, 8}, g, 2, 1), Error);
    EXPECT_THROW(stability_drivers(model, x0, std::vector<std::int64_t>{2, 8}, g, 2, 1), Error);
}

TEST(Reports, EchoCarriesTheExperiment) {
    const TimeGrid g(1.0, 10);
    const std::vector<double> x{0.0};
    const auto r = stability_initial(make_mean_field_ou(1.0, 0.3), x, dyadic(1, 3), g, 8, 99);
    auto value = [&](const std::string& key) {
        for (const auto& [k, v] : r.config) {
            if (k == key) return v;
        }
        return std::string("<missing>");
    };
    EXPECT_EQ(value("model"), "mean_field_ou");
    EXPECT_EQ(value("seed"), "99");
    EXPECT_EQ(value("M"), "8");
    EXPECT_EQ(value("N"), "10");
}

}  // namespace
