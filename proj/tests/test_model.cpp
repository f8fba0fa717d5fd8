// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "mvsde/error.hpp"
#include "mvsde/model.hpp"

namespace {

using namespace mvsde;

EmpiricalMeasure line(std::vector<double> xs) { return EmpiricalMeasure::uniform(std::move(xs), 1); }

TEST(MeanFieldOu, DriftAndDiffusion) {
    const auto m = make_mean_field_ou(1.0, 0.3);
    const std::vector<double> x{1.0};
    EXPECT_DOUBLE_EQ(m.drift(0.0, x, line({1.0, 3.0}))[0], 1.0);
    EXPECT_EQ(m.drift(0.0, x, line({0.0, 2.0}))[0], 0.0);
    EXPECT_EQ(m.diffusion(0.5, x, line({5.0}))[0], 0.3);
    ASSERT_TRUE(m.lipschitz_L().has_value());
    EXPECT_EQ(*m.lipschitz_L(), 1.0);
}

TEST(MeanFieldOu, DiffusionIsScaledIdentity) {
    const auto m = make_mean_field_ou(2.0, 0.3, 2);
    const std::vector<double> x{1.0, -1.0};
    const auto s = m.diffusion(0.0, x, EmpiricalMeasure::uniform({0.0, 0.0}, 2));
    EXPECT_EQ(s, (std::vector<double>{0.3, 0.0, 0.0, 0.3}));
}

TEST(MeanFieldOu, NegativeParameters) {
    EXPECT_THROW(make_mean_field_ou(-1.0, 0.3), Error);
    try {
        make_mean_field_ou(1.0, -0.3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::NegativeParameter);
    }
}

LinearFunctionalSpec ou_like(double sigma0) {
    LinearFunctionalSpec spec;
    spec.drift_base = [](double, std::span<const double> x, double m, std::span<double> out) { out[0] = m - x[0]; };
    spec.drift_lipschitz = 1.0;
    spec.diffusion_base = [sigma0](double, std::span<const double>, double, std::span<double> out) {
        out[0] = sigma0;
    };
    spec.diffusion_lipschitz = 0.0;
    spec.phi = {[](std::span<const double> y) { return y[0]; }, 1.0};
    spec.psi = {[](std::span<const double>) { return 0.0; }, 0.0};
    spec.growth_C = 1.0 + sigma0;
    return spec;
}

TEST(LinearFunctional, IdentityPhiReproducesOu) {
    const auto lf = make_linear_functional(ou_like(0.3));
    const auto ou = make_mean_field_ou(1.0, 0.3);
    const auto probes = make_probes(1, 5);
    for (const auto& p : probes.points) {
        EXPECT_EQ(lf.drift(p.t, p.x, p.mu), ou.drift(p.t, p.x, p.mu));
        EXPECT_EQ(lf.diffusion(p.t, p.x, p.mu), ou.diffusion(p.t, p.x, p.mu));
    }
}

TEST(LinearFunctional, ConstantPhiIgnoresLaw) {
    auto spec = ou_like(0.3);
    spec.phi = {[](std::span<const double>) { return 0.0; }, 0.0};
    const auto m = make_linear_functional(spec);
    const std::vector<double> x{0.5};
    EXPECT_EQ(m.drift(0.0, x, line({1.0, 9.0})), m.drift(0.0, x, line({-4.0})));
}

TEST(LinearFunctional, SquarePhiSeesSecondMoment) {
    auto spec = ou_like(0.3);
    spec.phi = {[](std::span<const double> y) { return y[0] * y[0]; }, 4.0};
    const auto m = make_linear_functional(spec);
    const std::vector<double> x{0.0};
    EXPECT_DOUBLE_EQ(m.drift(0.0, x, line({0.0, 2.0}))[0], 2.0);
}

TEST(LinearFunctional, EqualsComposedEvaluatorOnProbes) {
    auto spec = ou_like(0.2);
    spec.drift_base = [](double t, std::span<const double> x, double m, std::span<double> out) {
        out[0] = std::sin(t) + std::tanh(m) - 0.5 * x[0];
    };
    spec.phi = {[](std::span<const double> y) { return std::tanh(y[0]); }, 1.0};
    const auto m = make_linear_functional(spec);
    const auto probes = make_probes(1, 9);
    for (const auto& p : probes.points) {
        const double phi_bar = integrate_scalar(p.mu, [](std::span<const double> y) { return std::tanh(y[0]); });
        const double expected = std::sin(p.t) + std::tanh(phi_bar) - 0.5 * p.x[0];
        EXPECT_NEAR(m.drift(p.t, p.x, p.mu)[0], expected, 1e-12);
    }
}

TEST(LinearFunctional, MissingConstants) {
    auto spec = ou_like(0.3);
    spec.phi.lipschitz.reset();
    try {
        make_linear_functional(spec);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::MissingConstants);
    }
    spec = ou_like(0.3);
    spec.growth_C.reset();
    EXPECT_THROW(make_linear_functional(spec), Error);
}

TEST(Osgood, DiffusionValues) {
    const auto m = make_osgood_example(2.0);
    const auto mu = line({0.0});
    EXPECT_EQ(m.diffusion(0.0, std::vector<double>{0.0}, mu)[0], 0.0);
    EXPECT_EQ(m.diffusion(0.0, std::vector<double>{0.25}, mu)[0], 0.5);
    EXPECT_EQ(m.diffusion(0.0, std::vector<double>{-0.25}, mu)[0], 0.5);
    EXPECT_EQ(m.diffusion(0.0, std::vector<double>{100.0}, mu)[0], 2.0);
    EXPECT_FALSE(m.lipschitz_L().has_value());
    EXPECT_EQ(m.family(), HypothesisFamily::Osgood);
    ASSERT_TRUE(m.modulus().has_value());
    EXPECT_EQ(m.modulus()->drift_w1_constant, 1.0);
}

TEST(Osgood, ModulusShape) {
    const auto m = make_osgood_example(2.0);
    const auto& mod = *m.modulus();
    EXPECT_EQ(mod.rho(0.0), 0.0);
    EXPECT_EQ(mod.kappa(0.0), 0.0);
    double prev_rho = 0.0;
    double prev_kappa = 0.0;
    for (int i = 1; i <= 50; ++i) {
        const double u = 0.02 * i;
        EXPECT_GT(mod.rho(u), prev_rho);
        EXPECT_GT(mod.kappa(u), prev_kappa);
        prev_rho = mod.rho(u);
        prev_kappa = mod.kappa(u);
    }
}

TEST(Osgood, DriftIsW1LipschitzInTheLaw) {
    const auto m = make_osgood_example(2.0);
    const std::vector<double> x{0.3};
    const auto a = line({0.0, 1.0, 2.0});
    const auto b = line({0.5, 1.0, 4.0});
    const double gap = std::abs(m.drift(0.0, x, a)[0] - m.drift(0.0, x, b)[0]);
    EXPECT_LE(gap, wasserstein(1.0, a, b) + 1e-15);
}

TEST(Validation, MeanFieldOuPasses) {
    const auto report = validate_hypotheses(make_mean_field_ou(1.0, 0.3), make_probes(1, 42));
    EXPECT_TRUE(report.passed);
    EXPECT_LE(report.lipschitz_ratio, 1.0 + 1e-8);
    EXPECT_LE(report.growth_ratio, 1.0 + 1e-8);
}

TEST(Validation, OsgoodFailsLipschitzButPassesItsFamily) {
    const auto report = validate_hypotheses(make_osgood_example(2.0), make_probes(1, 42));
    EXPECT_TRUE(report.passed);
    const auto* sigma = report.find("H2.sigma_state");
    ASSERT_NE(sigma, nullptr);
    EXPECT_FALSE(sigma->passed);
    EXPECT_FALSE(sigma->required);
    // probes (0, 1e-8): ratio sqrt(u)/u = 1e4
    EXPECT_GE(sigma->observed, 1e4 * (1.0 - 1e-9));
    for (const char* name : {"H4.drift_w1", "H5.sigma_modulus", "H6.drift_modulus", "H5H6.modulus_shape"}) {
        const auto* check = report.find(name);
        ASSERT_NE(check, nullptr) << name;
        EXPECT_TRUE(check->passed) << name;
    }
}

TEST(Validation, ZeroModelHasZeroRatios) {
    const auto report = validate_hypotheses(make_constant_model({0.0}, 0.0), make_probes(1, 3));
    EXPECT_TRUE(report.passed);
    EXPECT_EQ(report.growth_ratio, 0.0);
    EXPECT_EQ(report.lipschitz_ratio, 0.0);
}

TEST(Validation, EveryCatalogModelPassesItsFamily) {
    for (const auto& [label, defaults] : model_catalog()) {
        const auto model = make_model(label, {});
        const auto report = validate_hypotheses(model, make_probes(model.dim(), 17));
        EXPECT_TRUE(report.passed) << label;
    }
    for (std::size_t d : {2u, 3u}) {
        const auto model = make_mean_field_ou(0.7, 0.4, d);
        EXPECT_TRUE(validate_hypotheses(model, make_probes(d, 18)).passed);
    }
}

TEST(Validation, UnderDeclaredConstantFails) {
    // theta = 2 declared through a wrapper claiming L = 1
    const auto honest = make_mean_field_ou(2.0, 0.3);
    const CoefficientModel liar(
        "liar", 1, [honest](double t, const EmpiricalMeasure& mu) { return honest.freeze(t, mu); },
        {.growth_C = 10.0, .lipschitz_L = 1.0});
    EXPECT_FALSE(validate_hypotheses(liar, make_probes(1, 42)).passed);
}

TEST(Catalog, UnknownLabelAndParameter) {
    try {
        make_model("nope", {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("nope"), std::string::npos);
    }
    try {
        make_model("mean_field_ou", {{"thetta", 1.0}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("thetta"), std::string::npos);
    }
}

TEST(Catalog, ParametersReachTheModel) {
    const auto m = make_model("mean_field_ou", {{"theta", 2.0}, {"sigma0", 0.5}});
    EXPECT_DOUBLE_EQ(m.drift(0.0, std::vector<double>{0.0}, line({1.0}))[0], 2.0);
    EXPECT_EQ(m.params().at("theta"), 2.0);
}

TEST(CostSpecTest, PointwiseAndBound) {
    const auto cost = CostSpec::pointwise([](double, std::span<const double> x, double a) { return x[0] + a; },
                                          [](std::span<const double>) { return 1.0; }, 5.0, "x+a");
    const auto mu = line({0.0});
    EXPECT_EQ(cost.running(0.0, mu)(std::vector<double>{2.0}, 0.5), 2.5);
    EXPECT_EQ(cost.terminal(mu)(std::vector<double>{2.0}), 1.0);
    const std::vector<double> actions{-1.0, 1.0};
    EXPECT_GT(max_abs_cost(cost, make_probes(1, 1), actions), 0.0);
}

}  // namespace
