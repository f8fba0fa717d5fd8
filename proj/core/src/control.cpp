// SPDX-License-Identifier: Apache-2.0
#include "mvsde/control.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mvsde/error.hpp"
#include "mvsde/format.hpp"
#include "mvsde/parallel.hpp"
#include "scheme.hpp"

namespace mvsde {
namespace {

constexpr double kRowSumTol = 1e-12;
constexpr double kStateCap = 4.0;

CostEstimate estimate(std::span<const double> per_particle) {
    const auto n = static_cast<double>(per_particle.size());
    double mean = 0.0;
    for (double v : per_particle) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : per_particle) ss += (v - mean) * (v - mean);
    const double std_error = per_particle.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    return {mean, std_error};
}

}  // namespace

// ---------------------------------------------------------------------------

ActionGrid::ActionGrid(std::vector<double> actions) : actions_(std::move(actions)) {
    if (actions_.empty()) throw Error(Errc::InvalidArgument, "action grid must be nonempty");
    for (double a : actions_) {
        if (!std::isfinite(a)) throw Error(Errc::InvalidArgument, "actions must be finite");
    }
    if (!std::is_sorted(actions_.begin(), actions_.end())) {
        throw Error(Errc::InvalidArgument, "actions must be sorted");
    }
}

ActionGrid ActionGrid::equispaced(std::size_t q, double lo, double hi) {
    if (q == 0 || !(lo <= hi)) throw Error(Errc::InvalidArgument, "need q >= 1 and lo <= hi");
    std::vector<double> a(q, lo);
    for (std::size_t i = 1; i < q; ++i) {
        a[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(q - 1);
    }
    if (q > 1) a.back() = hi;
    return ActionGrid(std::move(a));
}

// ---------------------------------------------------------------------------

StrictControl StrictControl::open_loop(std::vector<std::size_t> cell_actions) {
    if (cell_actions.empty()) throw Error(Errc::InvalidArgument, "open-loop control needs at least one cell");
    StrictControl u;
    u.cell_actions_ = std::move(cell_actions);
    u.label_ = "open_loop";
    return u;
}

StrictControl StrictControl::feedback(Feedback rule, std::string label) {
    if (!rule) throw Error(Errc::InvalidArgument, "feedback control needs a rule");
    StrictControl u;
    u.rule_ = std::move(rule);
    u.label_ = std::move(label);
    return u;
}

StrictControl StrictControl::constant(std::size_t cells, std::size_t action) {
    return open_loop(std::vector<std::size_t>(cells, action)).with_label("constant[" + std::to_string(action) + "]");
}

std::size_t StrictControl::action(std::size_t cell, double t, std::span<const double> x) const {
    if (rule_) return rule_(t, x);
    return cell_actions_[cell];
}

StrictControl StrictControl::refine(std::size_t factor) const {
    if (factor == 0) throw Error(Errc::InvalidArgument, "refinement factor must be >= 1");
    if (rule_ || factor == 1) return *this;
    StrictControl u = *this;
    u.cell_actions_.clear();
    u.cell_actions_.reserve(cell_actions_.size() * factor);
    for (std::size_t a : cell_actions_) u.cell_actions_.insert(u.cell_actions_.end(), factor, a);
    return u;
}

void StrictControl::check(std::size_t steps, std::size_t q) const {
    if (rule_) return;
    if (cell_actions_.size() != steps) {
        throw Error(Errc::GridMismatch, "control has " + std::to_string(cell_actions_.size()) +
                                            " cells, grid has " + std::to_string(steps));
    }
    for (std::size_t a : cell_actions_) {
        if (a >= q) throw Error(Errc::InvalidArgument, "action index out of range");
    }
}

StrictControl StrictControl::with_label(std::string label) && {
    label_ = std::move(label);
    return std::move(*this);
}

// ---------------------------------------------------------------------------

RelaxedControl::RelaxedControl(std::size_t cells, std::size_t actions, std::vector<double> weights,
                               std::string label)
    : cells_(cells), actions_(actions), weights_(std::move(weights)), label_(std::move(label)) {
    if (cells_ == 0 || actions_ == 0) throw Error(Errc::InvalidArgument, "relaxed control needs cells and actions");
    if (weights_.size() != cells_ * actions_) throw Error(Errc::SizeMismatch, "weight matrix shape mismatch");
    for (std::size_t k = 0; k < cells_; ++k) {
        double sum = 0.0;
        for (double w : row(k)) {
            if (!(w >= 0.0) || !std::isfinite(w)) {
                throw Error(Errc::InvalidMeasure, "relaxed weights must be finite and nonnegative");
            }
            sum += w;
        }
        if (std::abs(sum - 1.0) > kRowSumTol) {
            throw Error(Errc::InvalidMeasure, "relaxed row " + std::to_string(k) + " does not sum to 1");
        }
    }
}

RelaxedControl RelaxedControl::dirac(std::span<const std::size_t> cell_actions, std::size_t actions) {
    std::vector<double> w(cell_actions.size() * actions, 0.0);
    for (std::size_t k = 0; k < cell_actions.size(); ++k) {
        if (cell_actions[k] >= actions) throw Error(Errc::InvalidArgument, "action index out of range");
        w[k * actions + cell_actions[k]] = 1.0;
    }
    return {cell_actions.size(), actions, std::move(w), "dirac"};
}

RelaxedControl RelaxedControl::constant(std::size_t cells, std::vector<double> row, std::string label) {
    std::vector<double> w;
    w.reserve(cells * row.size());
    for (std::size_t k = 0; k < cells; ++k) w.insert(w.end(), row.begin(), row.end());
    return {cells, row.size(), std::move(w), std::move(label)};
}

RelaxedControl RelaxedControl::from_strict(const StrictControl& u, std::size_t actions) {
    if (!u.is_open_loop()) throw Error(Errc::InvalidArgument, "only open-loop controls embed as Dirac rows");
    auto r = dirac(u.cell_actions(), actions);
    r.label_ = "dirac(" + u.label() + ")";
    return r;
}

RelaxedControl RelaxedControl::refine(std::size_t factor) const {
    if (factor == 0) throw Error(Errc::InvalidArgument, "refinement factor must be >= 1");
    std::vector<double> w;
    w.reserve(weights_.size() * factor);
    for (std::size_t k = 0; k < cells_; ++k) {
        for (std::size_t f = 0; f < factor; ++f) w.insert(w.end(), row(k).begin(), row(k).end());
    }
    return {cells_ * factor, actions_, std::move(w), label_};
}

// ---------------------------------------------------------------------------

ControlledModel ControlledModel::ignoring_action(const CoefficientModel& model, double bound) {
    ControlledModel cm;
    cm.label = model.label() + "(action-free)";
    cm.dim = model.dim();
    cm.freeze = [model](double t, const EmpiricalMeasure& mu) {
        const FrozenCoefficients fc = model.freeze(t, mu);
        FrozenControlled out;
        out.drift = [drift = fc.drift](std::span<const double> x, double, std::span<double> o) { drift(x, o); };
        out.diffusion = [diffusion = fc.diffusion](std::span<const double> x, double, std::span<double> o) {
            diffusion(x, o);
        };
        return out;
    };
    cm.bound = bound;
    cm.lipschitz = model.lipschitz_L().value_or(0.0);
    cm.action_free = true;
    return cm;
}

ControlledCheck validate_controlled(const ControlledModel& cm, const ActionGrid& actions, const ProbeSet& probes) {
    const std::size_t d = cm.dim;
    std::vector<double> b(d), b2(d), s(d * d), s2(d * d);
    auto norm = [](std::span<const double> v) {
        double sq = 0.0;
        for (double x : v) sq += x * x;
        return std::sqrt(sq);
    };
    auto dist = [](std::span<const double> u, std::span<const double> v) {
        double sq = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) sq += (u[i] - v[i]) * (u[i] - v[i]);
        return std::sqrt(sq);
    };
    ControlledCheck check;
    double worst_bound = 0.0;
    for (const auto& p : probes.points) {
        const auto fc = cm.freeze(p.t, p.mu);
        for (double a : actions.values()) {
            fc.drift(p.x, a, b);
            fc.diffusion(p.x, a, s);
            worst_bound = std::max(worst_bound, norm(b) + norm(s));
        }
    }
    double worst_lip = 0.0;
    for (const auto& pair : probes.pairs) {
        const auto fa = cm.freeze(pair.a.t, pair.a.mu);
        const auto fb = cm.freeze(pair.b.t, pair.b.mu);
        const double denom = dist(pair.a.x, pair.b.x) + wasserstein(2.0, pair.a.mu, pair.b.mu);
        if (denom == 0.0) continue;
        for (double a : actions.values()) {
            fa.drift(pair.a.x, a, b);
            fb.drift(pair.b.x, a, b2);
            fa.diffusion(pair.a.x, a, s);
            fb.diffusion(pair.b.x, a, s2);
            worst_lip = std::max(worst_lip, std::max(dist(b, b2), dist(s, s2)) / denom);
        }
    }
    check.bound_ratio = cm.bound > 0.0 ? worst_bound / cm.bound : (worst_bound == 0.0 ? 0.0 : INFINITY);
    check.lipschitz_ratio = cm.lipschitz > 0.0 ? worst_lip / cm.lipschitz : (worst_lip == 0.0 ? 0.0 : INFINITY);
    check.passed = check.bound_ratio <= 1.0 + 1e-8 && check.lipschitz_ratio <= 1.0 + 1e-8;
    return check;
}

// ---------------------------------------------------------------------------

namespace {

void check_dims(const ControlledModel& cm, std::span<const double> x0) {
    if (!cm.freeze) throw Error(Errc::InvalidArgument, "controlled model has no evaluator");
    if (x0.size() != cm.dim) throw Error(Errc::DimensionMismatch, "initial condition dimension mismatch");
}

}  // namespace

ParticleSystem simulate_strict(const ControlledModel& cm, const ActionGrid& actions, const StrictControl& u,
                               std::span<const double> x0, const TimeGrid& grid, const NoiseBundle& noise) {
    check_dims(cm, x0);
    u.check(grid.steps(), actions.size());
    const std::size_t d = cm.dim;
    detail::check_noise(noise, d, grid);
    ParticleSystem ps(noise.particles(), grid, d, cm.label, noise.seed());
    detail::init_states(ps, x0);
    std::vector<std::size_t> chosen(ps.particles());

    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const double t = grid.node(k);
        const double dt = grid.step_length(k);
        const FrozenControlled fc = cm.freeze(t, ps.cross_section(k));
        parallel_for(ps.particles(), [&](std::size_t i) {
            auto& scratch = detail::thread_scratch(d);
            const auto x = ps.state(i, k);
            chosen[i] = u.action(k, t, x);
            if (chosen[i] >= actions.size()) return;
            const double a = actions[chosen[i]];
            fc.drift(x, a, scratch.drift);
            fc.diffusion(x, a, scratch.diffusion);
            detail::accumulate_drift(scratch.drift, 1.0, scratch.drift_acc);
            detail::accumulate_noise(scratch.diffusion, noise.increment(i, k), 1.0, scratch.noise_acc);
            detail::euler_combine(x, scratch.drift_acc, dt, scratch.noise_acc, ps.state(i, k + 1));
        });
        for (std::size_t i = 0; i < ps.particles(); ++i) {
            if (chosen[i] >= actions.size()) throw Error(Errc::InvalidArgument, "feedback returned a bad action");
        }
        detail::check_finite(ps, k);
    }
    return ps;
}

namespace {

/// Stream index for each action on one cell: the heaviest action gets 0.
std::vector<std::uint32_t> stream_routing(std::span<const double> row) {
    const auto heaviest = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    std::vector<std::uint32_t> route(row.size());
    std::uint32_t next = 1;
    for (std::size_t a = 0; a < row.size(); ++a) route[a] = a == heaviest ? 0u : next++;
    return route;
}

}  // namespace

ParticleSystem simulate_relaxed(const ControlledModel& cm, const ActionGrid& actions, const RelaxedControl& r,
                                std::span<const double> x0, const TimeGrid& grid, std::uint64_t seed,
                                std::size_t particles) {
    check_dims(cm, x0);
    if (r.cells() != grid.steps()) throw Error(Errc::GridMismatch, "relaxed control cells do not match grid");
    if (r.actions() != actions.size()) throw Error(Errc::SizeMismatch, "relaxed control action count mismatch");
    const std::size_t d = cm.dim;
    const std::size_t q = actions.size();

    // Only streams some cell actually uses are generated.
    std::vector<std::vector<std::uint32_t>> routes(grid.steps());
    std::uint32_t streams = 1;
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        routes[k] = stream_routing(r.row(k));
        for (std::size_t a = 0; a < q; ++a) {
            if (r.weight(k, a) > 0.0) streams = std::max(streams, routes[k][a] + 1);
        }
    }
    std::vector<NoiseBundle> noise;
    noise.reserve(streams);
    for (std::uint32_t s = 0; s < streams; ++s) noise.push_back(generate_noise(seed, particles, grid, d, s));

    ParticleSystem ps(particles, grid, d, cm.label, seed);
    detail::init_states(ps, x0);
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const double t = grid.node(k);
        const double dt = grid.step_length(k);
        const FrozenControlled fc = cm.freeze(t, ps.cross_section(k));
        const auto row = r.row(k);
        const auto& route = routes[k];
        parallel_for(particles, [&](std::size_t i) {
            auto& scratch = detail::thread_scratch(d);
            const auto x = ps.state(i, k);
            for (std::size_t a = 0; a < q; ++a) {
                const double w = row[a];
                if (w == 0.0) continue;
                fc.drift(x, actions[a], scratch.drift);
                fc.diffusion(x, actions[a], scratch.diffusion);
                detail::accumulate_drift(scratch.drift, w, scratch.drift_acc);
                detail::accumulate_noise(scratch.diffusion, noise[route[a]].increment(i, k), std::sqrt(w),
                                         scratch.noise_acc);
            }
            detail::euler_combine(x, scratch.drift_acc, dt, scratch.noise_acc, ps.state(i, k + 1));
        });
        detail::check_finite(ps, k);
    }
    return ps;
}

StrictControl chattering(const RelaxedControl& r, std::size_t sub) {
    if (sub == 0) throw Error(Errc::InvalidArgument, "chattering needs sub >= 1");
    const std::size_t q = r.actions();
    std::vector<std::size_t> slots;
    slots.reserve(r.cells() * sub);
    std::vector<std::size_t> counts(q);
    std::vector<double> remainder(q);
    std::vector<std::size_t> order(q);
    std::vector<std::size_t> used(q);
    for (std::size_t k = 0; k < r.cells(); ++k) {
        std::size_t assigned = 0;
        for (std::size_t a = 0; a < q; ++a) {
            const double target = r.weight(k, a) * static_cast<double>(sub);
            const double whole = std::floor(target);
            counts[a] = static_cast<std::size_t>(whole);
            remainder[a] = target - whole;
            assigned += counts[a];
        }
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t x, std::size_t y) { return remainder[x] > remainder[y]; });
        for (std::size_t j = 0; assigned < sub && j < q; ++j, ++assigned) ++counts[order[j]];

        // Interleave: each micro-slot goes to the action furthest behind
        // its pro-rata share of the slots played so far.
        std::fill(used.begin(), used.end(), 0);
        for (std::size_t j = 0; j < sub; ++j) {
            std::size_t pick = q;
            double best = -INFINITY;
            for (std::size_t a = 0; a < q; ++a) {
                if (used[a] >= counts[a]) continue;
                const double deficit = static_cast<double>(counts[a]) * static_cast<double>(j + 1) /
                                           static_cast<double>(sub) -
                                       static_cast<double>(used[a]);
                if (deficit > best) {
                    best = deficit;
                    pick = a;
                }
            }
            ++used[pick];
            slots.push_back(pick);
        }
    }
    return StrictControl::open_loop(std::move(slots))
        .with_label("chatter(" + (r.label().empty() ? std::string("relaxed") : r.label()) + "," +
                    std::to_string(sub) + ")");
}

CostEstimate cost(const CostSpec& cost_spec, const ActionGrid& actions, const ParticleSystem& ps,
                  const AnyControl& control) {
    const TimeGrid& grid = ps.grid();
    const std::size_t n_particles = ps.particles();
    if (const auto* u = std::get_if<StrictControl>(&control)) {
        u->check(grid.steps(), actions.size());
    } else {
        const auto& r = std::get<RelaxedControl>(control);
        if (r.cells() != grid.steps()) throw Error(Errc::GridMismatch, "relaxed control cells do not match grid");
        if (r.actions() != actions.size()) throw Error(Errc::SizeMismatch, "relaxed control action count mismatch");
    }

    std::vector<double> per_particle(n_particles, 0.0);
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const double t = grid.node(k);
        const double dt = grid.step_length(k);
        const auto h = cost_spec.running(t, ps.cross_section(k));
        parallel_for(n_particles, [&](std::size_t i) {
            const auto x = ps.state(i, k);
            double running = 0.0;
            if (const auto* u = std::get_if<StrictControl>(&control)) {
                running = h(x, actions[u->action(k, t, x)]);
            } else {
                const auto& r = std::get<RelaxedControl>(control);
                for (std::size_t a = 0; a < actions.size(); ++a) {
                    const double w = r.weight(k, a);
                    if (w != 0.0) running += w * h(x, actions[a]);
                }
            }
            per_particle[i] += running * dt;
        });
    }
    const auto g = cost_spec.terminal(ps.cross_section(grid.steps()));
    for (std::size_t i = 0; i < n_particles; ++i) per_particle[i] += g(ps.state(i, grid.steps()));
    return estimate(per_particle);
}

ValueReport compare_values(const ControlledModel& cm, const ActionGrid& actions, const CostSpec& cost_spec,
                           std::span<const StrictControl> strict_family, std::span<const RelaxedControl> relaxed_family,
                           std::span<const std::size_t> chatter_subs, std::span<const double> x0, const TimeGrid& grid,
                           std::uint64_t seed, std::size_t particles) {
    if (strict_family.empty() || relaxed_family.empty()) {
        throw Error(Errc::InvalidArgument, "control families must be nonempty");
    }
    std::size_t factor = 1;
    for (std::size_t sub : chatter_subs) {
        if (sub == 0) throw Error(Errc::InvalidArgument, "chattering levels must be >= 1");
        factor = std::lcm(factor, sub);
    }
    const TimeGrid fine = grid.refine(factor);
    const auto noise = generate_noise(seed, particles, fine, cm.dim, 0);

    auto run_strict = [&](const StrictControl& u) {
        StrictControl on_fine = u;
        if (u.is_open_loop()) {
            if (u.cells() == 0 || fine.steps() % u.cells() != 0) {
                throw Error(Errc::GridMismatch, "strict control cells do not divide the common grid");
            }
            on_fine = u.refine(fine.steps() / u.cells());
        }
        const auto ps = simulate_strict(cm, actions, on_fine, x0, fine, noise);
        return cost(cost_spec, actions, ps, on_fine);
    };

    ValueReport report;
    report.simulation_steps = fine.steps();
    for (const auto& u : strict_family) {
        report.strict_costs.push_back(run_strict(u));
        report.strict_labels.push_back(u.label());
    }
    for (const auto& r : relaxed_family) {
        if (r.cells() != grid.steps()) throw Error(Errc::GridMismatch, "relaxed control cells do not match grid");
        const auto on_fine = r.refine(factor);
        const auto ps = simulate_relaxed(cm, actions, on_fine, x0, fine, seed, particles);
        const auto relaxed_cost = cost(cost_spec, actions, ps, on_fine);
        report.relaxed_costs.push_back(relaxed_cost);
        report.relaxed_labels.push_back(r.label());

        std::vector<ChatterLevel> levels;
        for (std::size_t sub : chatter_subs) {
            ChatterLevel level;
            level.sub = sub;
            level.estimate = run_strict(chattering(r, sub));
            level.gap = std::abs(level.estimate.value - relaxed_cost.value);
            level.gap_std = std::hypot(level.estimate.std_error, relaxed_cost.std_error);
            levels.push_back(level);
        }
        report.chattered.push_back(std::move(levels));
    }

    auto argmin = [](const std::vector<CostEstimate>& costs) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < costs.size(); ++i) {
            if (costs[i].value < costs[best].value) best = i;
        }
        return best;
    };
    report.best_strict = argmin(report.strict_costs);
    report.best_relaxed = argmin(report.relaxed_costs);
    report.min_strict = report.strict_costs[report.best_strict].value;
    report.min_relaxed = report.relaxed_costs[report.best_relaxed].value;
    report.value_gap = std::abs(report.min_strict - report.min_relaxed);
    report.value_gap_std = std::hypot(report.strict_costs[report.best_strict].std_error,
                                      report.relaxed_costs[report.best_relaxed].std_error);
    return report;
}

BangBangExample make_bang_bang_example(double theta, double sigma0, std::size_t cells, double horizon,
                                       std::vector<std::size_t> chatter_subs) {
    if (!(theta >= 0.0) || !(sigma0 >= 0.0)) throw Error(Errc::NegativeParameter, "theta, sigma0 must be >= 0");
    ControlledModel cm;
    cm.label = "bang_bang";
    cm.dim = 1;
    cm.freeze = [theta, sigma0](double, const EmpiricalMeasure& mu) {
        FrozenControlled fc;
        fc.drift = [theta, m = mu.mean()[0]](std::span<const double> x, double a, std::span<double> out) {
            out[0] = a + theta * std::tanh(m - x[0]);
        };
        fc.diffusion = [sigma0](std::span<const double>, double, std::span<double> out) { out[0] = sigma0; };
        return fc;
    };
    cm.bound = 1.0 + theta + sigma0;
    cm.lipschitz = theta;

    auto h = [](double, std::span<const double> x, double a) {
        const double well = 1.0 - a * a;
        return std::min(x[0] * x[0], kStateCap) + well * well;
    };
    auto g = [](std::span<const double>) { return 0.0; };
    CostSpec cost_spec = CostSpec::pointwise(h, g, kStateCap + 1.0, "min(x^2,4) + (1-a^2)^2");

    if (cells == 0) throw Error(Errc::InvalidArgument, "need at least one cell");
    std::size_t factor = 1;
    for (std::size_t sub : chatter_subs) {
        if (sub == 0) throw Error(Errc::InvalidArgument, "chattering levels must be >= 1");
        factor = std::lcm(factor, sub);
    }
    const std::size_t fast = cells * factor;
    std::vector<std::size_t> alternate_coarse(cells);
    std::vector<std::size_t> alternate_fast(fast);
    for (std::size_t k = 0; k < cells; ++k) alternate_coarse[k] = k % 2;
    for (std::size_t k = 0; k < fast; ++k) alternate_fast[k] = k % 2;

    std::vector<StrictControl> strict{
        StrictControl::constant(cells, 0).with_label("constant(-1)"),
        StrictControl::constant(cells, 1).with_label("constant(+1)"),
        StrictControl::open_loop(alternate_coarse).with_label("alternate(every cell)"),
        StrictControl::open_loop(alternate_fast).with_label("alternate(every fine cell)"),
    };
    std::vector<RelaxedControl> relaxed{
        RelaxedControl::constant(cells, {0.5, 0.5}, "mix(0.5,0.5)"),
        RelaxedControl::constant(cells, {0.3, 0.7}, "mix(0.3,0.7)"),
        RelaxedControl::constant(cells, {1.0, 0.0}, "dirac(-1)"),
        RelaxedControl::constant(cells, {0.0, 1.0}, "dirac(+1)"),
    };
    return {cm, ActionGrid({-1.0, 1.0}), cost_spec, strict, relaxed, std::move(chatter_subs),
            {0.0}, TimeGrid(horizon, cells)};
}

}  // namespace mvsde
