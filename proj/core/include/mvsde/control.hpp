// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mvsde/model.hpp"
#include "mvsde/sde.hpp"

namespace mvsde {

/// Finite, sorted subset of a compact action interval.
class ActionGrid {
public:
    explicit ActionGrid(std::vector<double> actions);

    /// q equispaced points in [lo, hi] (q = 1 gives lo).
    static ActionGrid equispaced(std::size_t q, double lo, double hi);

    [[nodiscard]] std::size_t size() const noexcept { return actions_.size(); }
    [[nodiscard]] double operator[](std::size_t i) const noexcept { return actions_[i]; }
    [[nodiscard]] std::span<const double> values() const noexcept { return actions_; }

private:
    std::vector<double> actions_;
};

/// Piecewise-constant strict control: either one action index per time cell
/// (open loop) or a feedback rule evaluated at each cell start.
class StrictControl {
public:
    using Feedback = std::function<std::size_t(double t, std::span<const double> x)>;

    static StrictControl open_loop(std::vector<std::size_t> cell_actions);
    static StrictControl feedback(Feedback rule, std::string label = "feedback");
    static StrictControl constant(std::size_t cells, std::size_t action);

    [[nodiscard]] bool is_open_loop() const noexcept { return !rule_; }
    [[nodiscard]] std::size_t cells() const noexcept { return cell_actions_.size(); }
    [[nodiscard]] std::span<const std::size_t> cell_actions() const noexcept { return cell_actions_; }
    [[nodiscard]] const std::string& label() const noexcept { return label_; }

    /// Action index on cell k for a particle at x at the cell start.
    [[nodiscard]] std::size_t action(std::size_t cell, double t, std::span<const double> x) const;

    /// Open-loop controls repeat each cell `factor` times; feedback is unchanged.
    [[nodiscard]] StrictControl refine(std::size_t factor) const;

    /// Throws GridMismatch / InvalidArgument if unusable on `steps` cells with q actions.
    void check(std::size_t steps, std::size_t q) const;

    StrictControl with_label(std::string label) &&;

private:
    std::vector<std::size_t> cell_actions_;
    Feedback rule_;
    std::string label_;
};

/// Deterministic relaxed control: one probability row over the actions per
/// time cell; rows sum to one within 1e-12.
class RelaxedControl {
public:
    RelaxedControl(std::size_t cells, std::size_t actions, std::vector<double> weights, std::string label = "");

    static RelaxedControl dirac(std::span<const std::size_t> cell_actions, std::size_t actions);
    static RelaxedControl constant(std::size_t cells, std::vector<double> row, std::string label = "");
    static RelaxedControl from_strict(const StrictControl& u, std::size_t actions);

    [[nodiscard]] std::size_t cells() const noexcept { return cells_; }
    [[nodiscard]] std::size_t actions() const noexcept { return actions_; }
    [[nodiscard]] double weight(std::size_t cell, std::size_t action) const noexcept {
        return weights_[cell * actions_ + action];
    }
    [[nodiscard]] std::span<const double> row(std::size_t cell) const noexcept {
        return {weights_.data() + cell * actions_, actions_};
    }
    [[nodiscard]] const std::string& label() const noexcept { return label_; }

    [[nodiscard]] RelaxedControl refine(std::size_t factor) const;

private:
    std::size_t cells_;
    std::size_t actions_;
    std::vector<double> weights_;
    std::string label_;
};

/// Controlled coefficients frozen at one (t, mu).
struct FrozenControlled {
    std::function<void(std::span<const double> x, double a, std::span<double> out)> drift;
    std::function<void(std::span<const double> x, double a, std::span<double> out)> diffusion;
};

/// b(t,x,mu,a), s(t,x,mu,a): continuous and bounded, Lipschitz in (x, mu)
/// uniformly in (t, a).
struct ControlledModel {
    std::string label;
    std::size_t dim = 1;
    std::function<FrozenControlled(double t, const EmpiricalMeasure& mu)> freeze;
    double bound = 0.0;      ///< sup |b| + |s|
    double lipschitz = 0.0;  ///< in (x, W2), uniform in (t, a)
    bool action_free = false;

    /// Lifts an uncontrolled model: b(t,x,mu,a) = b(t,x,mu).
    static ControlledModel ignoring_action(const CoefficientModel& model, double bound);
};

struct ControlledCheck {
    double bound_ratio = 0.0;      ///< max (|b|+|s|) / bound
    double lipschitz_ratio = 0.0;  ///< max |delta b, delta s| / (|dx| + W2), per action
    bool passed = false;
};

/// Boundedness and (x, mu)-Lipschitz spot checks for every action.
ControlledCheck validate_controlled(const ControlledModel& cm, const ActionGrid& actions, const ProbeSet& probes);

ParticleSystem simulate_strict(const ControlledModel& cm, const ActionGrid& actions, const StrictControl& u,
                               std::span<const double> x0, const TimeGrid& grid, const NoiseBundle& noise);

/// Relaxed dynamics with q independent Brownian motions, one per action:
///   dX = sum_a w_a b(.., a) dt + sum_a sqrt(w_a) s(.., a) dW^a.
/// On each cell the heaviest action (lowest index on ties) is driven by
/// stream 0 and the others by streams 1..q-1 in action order, so a Dirac row
/// reproduces the strict dynamics on stream 0 bit for bit.
ParticleSystem simulate_relaxed(const ControlledModel& cm, const ActionGrid& actions, const RelaxedControl& r,
                                std::span<const double> x0, const TimeGrid& grid, std::uint64_t seed,
                                std::size_t particles);

/// Splits every cell into `sub` micro-cells. Slot counts per action come from
/// largest-remainder apportionment of w * sub (ties to the lower action);
/// slots are laid out by always playing the action furthest behind its
/// target occupation, so partial occupations track the weights.
StrictControl chattering(const RelaxedControl& r, std::size_t sub);

using AnyControl = std::variant<StrictControl, RelaxedControl>;

struct CostEstimate {
    double value = 0.0;      ///< J: mean over particles
    double std_error = 0.0;  ///< sample standard error of the mean
};

/// J = E[ sum_k h(t_k, X_k, mu_k, a_k) dt_k + g(X_N, mu_N) ] with mu_k the
/// particle law at node k; relaxed controls integrate h against the row.
CostEstimate cost(const CostSpec& cost_spec, const ActionGrid& actions, const ParticleSystem& ps,
                  const AnyControl& control);

struct ChatterLevel {
    std::size_t sub = 0;
    CostEstimate estimate;
    double gap = 0.0;      ///< |J(chattering(r, sub)) - J(r)|
    double gap_std = 0.0;  ///< sqrt(std_chatter^2 + std_relaxed^2)
};

struct ValueReport {
    std::vector<CostEstimate> strict_costs;
    std::vector<CostEstimate> relaxed_costs;
    std::vector<std::vector<ChatterLevel>> chattered;  ///< [relaxed control][sub level]
    std::size_t best_strict = 0;
    std::size_t best_relaxed = 0;
    double min_strict = 0.0;
    double min_relaxed = 0.0;
    double value_gap = 0.0;      ///< |min_strict - min_relaxed|
    double value_gap_std = 0.0;  ///< combined standard error of the two minima
    std::size_t simulation_steps = 0;
    std::vector<std::string> strict_labels;
    std::vector<std::string> relaxed_labels;
};

/// Evaluates every control on one common grid: the base grid refined by the
/// lcm of the chattering levels. Relaxed controls live on the base grid;
/// open-loop strict controls on any cell count dividing the common grid.
ValueReport compare_values(const ControlledModel& cm, const ActionGrid& actions, const CostSpec& cost_spec,
                           std::span<const StrictControl> strict_family, std::span<const RelaxedControl> relaxed_family,
                           std::span<const std::size_t> chatter_subs, std::span<const double> x0, const TimeGrid& grid,
                           std::uint64_t seed, std::size_t particles);

/// Two-action bang-bang problem: actions {-1, +1},
///   b = a + theta tanh(mean(mu) - x),  s = sigma0,
///   h = min(x^2, 4) + (1 - a^2)^2 (a double well in a),  g = 0.
/// With x0 = 0 the optimal relaxed control mixes both actions equally, which
/// no strict control attains exactly.
struct BangBangExample {
    ControlledModel model;
    ActionGrid actions;
    CostSpec cost;
    std::vector<StrictControl> strict_family;
    std::vector<RelaxedControl> relaxed_family;
    std::vector<std::size_t> chatter_subs;
    std::vector<double> x0;
    TimeGrid grid;
};

/// The strict family is open loop, like the relaxed one: both constants,
/// switching every base cell and switching every cell of the common grid.
BangBangExample make_bang_bang_example(double theta = 1.0, double sigma0 = 0.05, std::size_t cells = 10,
                                       double horizon = 1.0, std::vector<std::size_t> chatter_subs = {2, 8, 32});

}  // namespace mvsde
