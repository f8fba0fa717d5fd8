// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "mvsde/control.hpp"
#include "mvsde/error.hpp"
#include "mvsde/measure.hpp"
#include "mvsde/rng.hpp"

namespace {

using namespace mvsde;

/// b = a, s = sigma: the simplest model that sees the action.
ControlledModel drift_is_action(double sigma) {
    ControlledModel cm;
    cm.label = "drift=a";
    cm.dim = 1;
    cm.freeze = [sigma](double, const EmpiricalMeasure&) {
        FrozenControlled fc;
        fc.drift = [](std::span<const double>, double a, std::span<double> out) { out[0] = a; };
        fc.diffusion = [sigma](std::span<const double>, double, std::span<double> out) { out[0] = sigma; };
        return fc;
    };
    cm.bound = 1.0 + sigma;
    cm.lipschitz = 0.0;
    return cm;
}

/// 2-d, action enters drift and diffusion and the law enters through the mean.
ControlledModel coupled_2d() {
    ControlledModel cm;
    cm.label = "coupled_2d";
    cm.dim = 2;
    cm.freeze = [](double, const EmpiricalMeasure& mu) {
        const auto m = mu.mean();
        FrozenControlled fc;
        fc.drift = [m](std::span<const double> x, double a, std::span<double> out) {
            out[0] = a * std::tanh(m[0] - x[0]);
            out[1] = std::sin(a + x[1]);
        };
        fc.diffusion = [](std::span<const double> x, double a, std::span<double> out) {
            out[0] = 0.2 + 0.1 * a;
            out[1] = 0.05 * std::tanh(x[0]);
            out[2] = 0.0;
            out[3] = 0.3;
        };
        return fc;
    };
    cm.bound = 4.0;
    cm.lipschitz = 2.0;
    return cm;
}

// The wrapper relabels the model, so compare states rather than whole systems.
bool same_states(const ParticleSystem& a, const ParticleSystem& b) { return std::ranges::equal(a.flat(), b.flat()); }

CostSpec pointwise(std::function<double(double, std::span<const double>, double)> h, double g_value) {
    return CostSpec::pointwise(std::move(h), [g_value](std::span<const double>) { return g_value; }, 10.0, "test");
}

TEST(ActionGridTest, Construction) {
    const auto g = ActionGrid::equispaced(5, -1.0, 1.0);
    ASSERT_EQ(g.size(), 5u);
    EXPECT_EQ(g[0], -1.0);
    EXPECT_EQ(g[2], 0.0);
    EXPECT_EQ(g[4], 1.0);
    EXPECT_EQ(ActionGrid::equispaced(1, 0.3, 2.0)[0], 0.3);
    EXPECT_THROW(ActionGrid({}), Error);
    EXPECT_THROW(ActionGrid({1.0, 0.0}), Error);
}

TEST(RelaxedControlTest, RowsMustSumToOne) {
    EXPECT_THROW(RelaxedControl(1, 2, {0.5, 0.6}), Error);
    EXPECT_THROW(RelaxedControl(1, 2, {-0.1, 1.1}), Error);
    EXPECT_THROW(RelaxedControl(2, 2, {0.5, 0.5}), Error);
    EXPECT_NO_THROW(RelaxedControl(1, 3, {0.1, 0.2, 0.7}));
}

TEST(SimulateStrict, IgnoringActionMatchesUncontrolledSolver) {
    const TimeGrid g(1.0, 40);
    const std::vector<double> x0{0.4};
    const auto model = make_mean_field_ou(1.0, 0.3);
    const auto cm = ControlledModel::ignoring_action(model, 10.0);
    const auto actions = ActionGrid::equispaced(3, -1.0, 1.0);
    const auto noise = generate_noise(5, 300, g, 1);
    const auto reference = euler_particles(model, x0, g, noise);
    std::vector<std::size_t> schedule(40);
    for (std::size_t k = 0; k < 40; ++k) schedule[k] = k % 3;
    EXPECT_TRUE(same_states(simulate_strict(cm, actions, StrictControl::open_loop(schedule), x0, g, noise), reference));
    const auto feedback = StrictControl::feedback([](double, std::span<const double> x) -> std::size_t {
        return x[0] > 0.4 ? 2 : 0;
    });
    EXPECT_TRUE(same_states(simulate_strict(cm, actions, feedback, x0, g, noise), reference));
}

TEST(SimulateStrict, ConstantControlIntegratesAction) {
    const TimeGrid g(2.0, 16);
    const std::vector<double> x0{1.0};
    const ActionGrid actions({-0.5, 0.75});
    const auto ps = simulate_strict(drift_is_action(0.0), actions, StrictControl::constant(16, 1), x0, g,
                                    generate_noise(1, 3, g, 1));
    for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(ps.state(i, 16)[0], 1.0 + 0.75 * 2.0);
}

TEST(SimulateStrict, EqualControlsGiveEqualSystems) {
    const TimeGrid g(1.0, 10);
    const std::vector<double> x0{0.0, 0.0};
    const auto actions = ActionGrid::equispaced(2, -1.0, 1.0);
    const auto noise = generate_noise(9, 50, g, 2);
    auto a = StrictControl::open_loop({0, 1, 1, 0, 0, 1, 0, 1, 1, 1});
    auto b = StrictControl::open_loop({0, 1, 1, 0, 0, 1, 0, 1, 1, 1});
    EXPECT_TRUE(simulate_strict(coupled_2d(), actions, a, x0, g, noise) ==
                simulate_strict(coupled_2d(), actions, b, x0, g, noise));
}

TEST(SimulateStrict, GridMismatch) {
    const TimeGrid g(1.0, 10);
    const std::vector<double> x0{0.0};
    const auto actions = ActionGrid::equispaced(2, -1.0, 1.0);
    try {
        simulate_strict(drift_is_action(0.1), actions, StrictControl::constant(5, 0), x0, g, generate_noise(1, 2, g, 1));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::GridMismatch);
    }
}

TEST(SimulateRelaxed, DiracRowsAreBitIdenticalToStrict) {
    const TimeGrid g(1.0, 24);
    const std::vector<double> x0{0.3, -0.2};
    const auto actions = ActionGrid::equispaced(3, -1.0, 1.0);
    rng::Stream s(71);
    std::vector<std::size_t> schedule(24);
    for (auto& a : schedule) a = s.below(3);
    const auto strict = StrictControl::open_loop(schedule);
    const auto relaxed = RelaxedControl::from_strict(strict, 3);
    const std::uint64_t seed = 314;
    const std::size_t M = 400;
    const auto a = simulate_strict(coupled_2d(), actions, strict, x0, g, generate_noise(seed, M, g, 2));
    const auto b = simulate_relaxed(coupled_2d(), actions, relaxed, x0, g, seed, M);
    EXPECT_TRUE(a == b);
}

TEST(SimulateRelaxed, HalfHalfKeepsStepVariance) {
    const TimeGrid g(1.0, 1);
    const std::vector<double> x0{0.0};
    const ActionGrid actions({0.0, 1.0});
    const double sigma = 0.7;
    // drift = a would add 0.5; subtract it to isolate the noise term
    const auto ps = simulate_relaxed(drift_is_action(sigma), actions, RelaxedControl::constant(1, {0.5, 0.5}), x0, g,
                                     8, 100000);
    double sq = 0.0;
    for (std::size_t i = 0; i < ps.particles(); ++i) {
        const double noise = ps.state(i, 1)[0] - 0.5;
        sq += noise * noise;
    }
    EXPECT_NEAR(sq / static_cast<double>(ps.particles()) / (sigma * sigma), 1.0, 0.02);
}

TEST(SimulateRelaxed, IgnoringActionMatchesInLaw) {
    const TimeGrid g(1.0, 50);
    const std::vector<double> x0{1.0};
    const auto model = make_mean_field_ou(1.0, 0.3);
    const auto cm = ControlledModel::ignoring_action(model, 10.0);
    const ActionGrid actions({0.0, 1.0});
    const std::size_t M = 4000;
    const auto relaxed = simulate_relaxed(cm, actions, RelaxedControl::constant(50, {0.4, 0.6}), x0, g, 11, M);
    const auto uncontrolled = euler_particles(model, x0, g, generate_noise(12, M, g, 1));
    EXPECT_LE(sup_w2(law_flow(relaxed), law_flow(uncontrolled)), 0.05);
}

TEST(Chattering, DiracRowsGiveConstantCells) {
    const auto r = RelaxedControl::dirac(std::vector<std::size_t>{1, 0, 2}, 3);
    for (std::size_t sub : {1u, 4u, 7u}) {
        const auto u = chattering(r, sub);
        ASSERT_EQ(u.cells(), 3 * sub);
        for (std::size_t k = 0; k < 3; ++k) {
            for (std::size_t j = 0; j < sub; ++j) EXPECT_EQ(u.cell_actions()[k * sub + j], r.row(k)[1] == 1.0 ? 1u : (r.row(k)[0] == 1.0 ? 0u : 2u));
        }
    }
}

std::vector<std::size_t> slot_counts(const StrictControl& u, std::size_t cell, std::size_t sub, std::size_t q) {
    std::vector<std::size_t> counts(q, 0);
    for (std::size_t j = 0; j < sub; ++j) ++counts[u.cell_actions()[cell * sub + j]];
    return counts;
}

TEST(Chattering, ExactApportionment) {
    const auto half = chattering(RelaxedControl::constant(1, {0.5, 0.5}), 10);
    EXPECT_EQ(slot_counts(half, 0, 10, 2), (std::vector<std::size_t>{5, 5}));
    const auto skew = chattering(RelaxedControl::constant(1, {0.3, 0.7}), 10);
    EXPECT_EQ(slot_counts(skew, 0, 10, 2), (std::vector<std::size_t>{3, 7}));
}

TEST(Chattering, TiesGoToLowerAction) {
    const auto u = chattering(RelaxedControl::constant(1, {0.5, 0.5}), 3);
    EXPECT_EQ(slot_counts(u, 0, 3, 2), (std::vector<std::size_t>{2, 1}));
}

TEST(Chattering, SlotsInterleave) {
    const auto u = chattering(RelaxedControl::constant(1, {0.5, 0.5}), 8);
    const std::vector<std::size_t> expected{0, 1, 0, 1, 0, 1, 0, 1};
    EXPECT_TRUE(std::equal(expected.begin(), expected.end(), u.cell_actions().begin()));
}

TEST(Chattering, OccupationWithinOneOverSub) {
    rng::Stream s(1234);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t q = 2 + s.below(4);
        const std::size_t cells = 1 + s.below(4);
        std::vector<double> w(cells * q);
        for (std::size_t k = 0; k < cells; ++k) {
            double total = 0.0;
            for (std::size_t a = 0; a < q; ++a) total += (w[k * q + a] = s.uniform());
            for (std::size_t a = 0; a < q; ++a) w[k * q + a] /= total;
            double sum = 0.0;
            for (std::size_t a = 0; a + 1 < q; ++a) sum += w[k * q + a];
            w[k * q + q - 1] = 1.0 - sum;
        }
        const RelaxedControl r(cells, q, w);
        const std::size_t sub = 1 + s.below(40);
        const auto u = chattering(r, sub);
        for (std::size_t k = 0; k < cells; ++k) {
            const auto counts = slot_counts(u, k, sub, q);
            for (std::size_t a = 0; a < q; ++a) {
                const double occupation = static_cast<double>(counts[a]) / static_cast<double>(sub);
                EXPECT_LE(std::abs(occupation - r.weight(k, a)), 1.0 / static_cast<double>(sub) + 1e-12);
            }
        }
    }
}

TEST(Chattering, DivisibleWeightsAreExact) {
    const RelaxedControl r(2, 3, {0.25, 0.5, 0.25, 0.125, 0.375, 0.5});
    for (std::size_t sub : {8u, 16u, 32u}) {
        const auto u = chattering(r, sub);
        for (std::size_t k = 0; k < 2; ++k) {
            const auto counts = slot_counts(u, k, sub, 3);
            for (std::size_t a = 0; a < 3; ++a) {
                EXPECT_EQ(static_cast<double>(counts[a]) / static_cast<double>(sub), r.weight(k, a));
            }
        }
    }
}

TEST(Cost, TerminalOnly) {
    const TimeGrid g(1.0, 5);
    const std::vector<double> x0{0.0};
    const auto actions = ActionGrid::equispaced(2, 0.0, 1.0);
    const auto u = StrictControl::constant(5, 0);
    const auto ps = simulate_strict(drift_is_action(0.5), actions, u, x0, g, generate_noise(1, 30, g, 1));
    const auto j = cost(pointwise([](double, std::span<const double>, double) { return 0.0; }, 1.0), actions, ps, u);
    EXPECT_EQ(j.value, 1.0);
    EXPECT_EQ(j.std_error, 0.0);
}

TEST(Cost, UnitRunningCostIntegratesToHorizon) {
    const TimeGrid g(1.5, 7);
    const std::vector<double> x0{0.0};
    const auto actions = ActionGrid::equispaced(2, 0.0, 1.0);
    const auto u = StrictControl::constant(7, 1);
    const auto ps = simulate_strict(drift_is_action(0.5), actions, u, x0, g, generate_noise(1, 30, g, 1));
    const auto j = cost(pointwise([](double, std::span<const double>, double) { return 1.0; }, 0.0), actions, ps, u);
    EXPECT_NEAR(j.value, 1.5, 1e-15);
}

TEST(Cost, RelaxedIntegratesAgainstRow) {
    const TimeGrid g(2.0, 10);
    const std::vector<double> x0{0.0};
    const ActionGrid actions({0.0, 1.0});
    const auto r = RelaxedControl::constant(10, {0.5, 0.5});
    const auto ps = simulate_relaxed(drift_is_action(0.1), actions, r, x0, g, 2, 20);
    const auto j = cost(pointwise([](double, std::span<const double>, double a) { return a * a; }, 0.0), actions, ps, r);
    EXPECT_NEAR(j.value, 1.0, 1e-15);
    EXPECT_EQ(j.std_error, 0.0);
}

TEST(Cost, GridMismatch) {
    const TimeGrid g(1.0, 4);
    const std::vector<double> x0{0.0};
    const auto actions = ActionGrid::equispaced(2, 0.0, 1.0);
    const auto ps = simulate_strict(drift_is_action(0.1), actions, StrictControl::constant(4, 0), x0, g,
                                    generate_noise(1, 3, g, 1));
    const auto h = pointwise([](double, std::span<const double>, double) { return 1.0; }, 0.0);
    try {
        cost(h, actions, ps, StrictControl::constant(8, 0));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::GridMismatch);
    }
    EXPECT_THROW(cost(h, actions, ps, RelaxedControl::constant(3, {1.0, 0.0})), Error);
}

TEST(Cost, AffineInWeightsWhenDynamicsIgnoreAction) {
    const TimeGrid g(1.0, 20);
    const std::vector<double> x0{0.5};
    const auto cm = ControlledModel::ignoring_action(make_mean_field_ou(1.0, 0.3), 10.0);
    const ActionGrid actions({0.0, 1.0});
    const auto h = pointwise([](double, std::span<const double> x, double a) { return x[0] * x[0] + 3.0 * a; }, 0.0);
    auto j = [&](double w1, std::uint64_t seed) {
        const auto r = RelaxedControl::constant(20, {1.0 - w1, w1});
        return cost(h, actions, simulate_relaxed(cm, actions, r, x0, g, seed, 4000), r);
    };
    rng::Stream s(5);
    for (int trial = 0; trial < 3; ++trial) {
        const double lambda = s.uniform();
        const auto lo = j(0.0, 100 + trial);
        const auto hi = j(1.0, 200 + trial);
        const auto mid = j(lambda, 300 + trial);
        const double interpolated = (1.0 - lambda) * lo.value + lambda * hi.value;
        const double std = std::sqrt(mid.std_error * mid.std_error +
                                     std::pow((1.0 - lambda) * lo.std_error, 2) + std::pow(lambda * hi.std_error, 2));
        // independent estimates: a 3-sigma band keeps the false alarm rate near 0.3% per trial
        EXPECT_LE(std::abs(mid.value - interpolated), 3.0 * std) << lambda;
    }
}

TEST(CompareValues, DiracFamilyMatchesStrictExactly) {
    const TimeGrid g(1.0, 4);
    const std::vector<double> x0{0.0};
    const ActionGrid actions({-1.0, 1.0});
    const auto h = pointwise([](double, std::span<const double> x, double) { return x[0] * x[0]; }, 0.0);
    const std::vector<StrictControl> strict{StrictControl::open_loop({0, 1, 1, 0})};
    const std::vector<RelaxedControl> relaxed{RelaxedControl::from_strict(strict[0], 2)};
    const std::vector<std::size_t> subs{2, 4};
    const auto report = compare_values(drift_is_action(0.3), actions, h, strict, relaxed, subs, x0, g, 9, 500);
    EXPECT_EQ(report.value_gap, 0.0);
    EXPECT_EQ(report.simulation_steps, 16u);
    for (const auto& level : report.chattered[0]) EXPECT_EQ(level.gap, 0.0);
}

TEST(CompareValues, ActionFreeProblemHasEqualValues) {
    const TimeGrid g(1.0, 5);
    const std::vector<double> x0{1.0};
    const auto cm = ControlledModel::ignoring_action(make_mean_field_ou(1.0, 0.3), 10.0);
    const ActionGrid actions({-1.0, 1.0});
    const auto h = pointwise([](double, std::span<const double> x, double) { return x[0] * x[0]; }, 0.0);
    const std::vector<StrictControl> strict{StrictControl::constant(5, 0), StrictControl::constant(5, 1)};
    const std::vector<RelaxedControl> relaxed{RelaxedControl::constant(5, {0.5, 0.5}),
                                              RelaxedControl::constant(5, {0.2, 0.8})};
    const std::vector<std::size_t> subs{2};
    const auto report = compare_values(cm, actions, h, strict, relaxed, subs, x0, g, 3, 3000);
    EXPECT_EQ(report.strict_costs[0].value, report.strict_costs[1].value);
    EXPECT_LE(report.value_gap, 2.0 * report.value_gap_std);
}

TEST(CompareValues, RejectsEmptyFamiliesAndMisalignedControls) {
    const TimeGrid g(1.0, 4);
    const std::vector<double> x0{0.0};
    const ActionGrid actions({-1.0, 1.0});
    const auto h = pointwise([](double, std::span<const double>, double) { return 0.0; }, 0.0);
    const std::vector<StrictControl> strict{StrictControl::constant(3, 0)};
    const std::vector<RelaxedControl> relaxed{RelaxedControl::constant(4, {0.5, 0.5})};
    const std::vector<std::size_t> subs{2};
    EXPECT_THROW(compare_values(drift_is_action(0.1), actions, h, {}, relaxed, subs, x0, g, 1, 4), Error);
    EXPECT_THROW(compare_values(drift_is_action(0.1), actions, h, strict, relaxed, subs, x0, g, 1, 4), Error);
}

TEST(BangBang, ModelSatisfiesControlHypotheses) {
    const auto ex = make_bang_bang_example();
    const auto check = validate_controlled(ex.model, ex.actions, make_probes(1, 8));
    EXPECT_TRUE(check.passed) << check.bound_ratio << " " << check.lipschitz_ratio;
    EXPECT_EQ(ex.grid.steps(), 10u);
    EXPECT_EQ(ex.strict_family.size(), 4u);
    EXPECT_EQ(ex.relaxed_family.size(), 4u);
}

}  // namespace
