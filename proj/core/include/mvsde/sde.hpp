// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mvsde/measure.hpp"
#include "mvsde/model.hpp"

namespace mvsde {

/// Uniform grid on [0, T] with nodes t_i = i*T/N.
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t steps);

    [[nodiscard]] double horizon() const noexcept { return horizon_; }
    [[nodiscard]] std::size_t steps() const noexcept { return steps_; }
    [[nodiscard]] double dt() const noexcept { return horizon_ / static_cast<double>(steps_); }
    [[nodiscard]] double node(std::size_t i) const noexcept {
        return static_cast<double>(i) * horizon_ / static_cast<double>(steps_);
    }
    /// node(k+1) - node(k); the solvers advance by this, not by dt().
    [[nodiscard]] double step_length(std::size_t k) const noexcept { return node(k + 1) - node(k); }

    /// Same horizon, steps * factor steps.
    [[nodiscard]] TimeGrid refine(std::size_t factor) const;

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

private:
    double horizon_;
    std::size_t steps_;
};

/// Brownian increments for M particles over a grid, each N(0, step_length*I).
/// Increment (particle, step, component) of stream s is the Philox output at
/// counter (particle, step, component, s) under the 64-bit seed, so bundles
/// regenerate bit-identically and distinct particles or streams never share
/// draws.
class NoiseBundle {
public:
    NoiseBundle(std::uint64_t seed, std::size_t particles, const TimeGrid& grid, std::size_t dim,
                std::uint32_t stream = 0);

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] std::uint32_t stream() const noexcept { return stream_; }
    [[nodiscard]] std::size_t particles() const noexcept { return particles_; }
    [[nodiscard]] std::size_t steps() const noexcept { return steps_; }
    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] std::span<const double> increment(std::size_t particle, std::size_t step) const noexcept {
        return {increments_.data() + (particle * steps_ + step) * dim_, dim_};
    }
    [[nodiscard]] std::span<const double> flat() const noexcept { return increments_; }

private:
    std::uint64_t seed_;
    std::uint32_t stream_;
    std::size_t particles_;
    std::size_t steps_;
    std::size_t dim_;
    std::vector<double> increments_;
};

NoiseBundle generate_noise(std::uint64_t seed, std::size_t particles, const TimeGrid& grid, std::size_t dim,
                           std::uint32_t stream = 0);

/// Semimartingale driver: a bounded-variation path A(t) and a martingale
/// M = scale * B built from the noise bundle, so dM = scale * dB.
struct DriverPath {
    std::function<double(double)> bounded_variation;
    double martingale_scale = 1.0;
    std::string label;

    /// A(t) = t, M = B
    static DriverPath brownian();
    /// A(t) = factor * t, M = factor * B
    static DriverPath scaled(double factor);
};

/// sum_k |dA1_k - dA2_k| over the grid: total variation of A1 - A2.
double total_variation_gap(const DriverPath& a, const DriverPath& b, const TimeGrid& grid);

/// Particle paths: M particles x (N+1) nodes x d components.
class ParticleSystem {
public:
    ParticleSystem(std::size_t particles, const TimeGrid& grid, std::size_t dim, std::string model_label,
                   std::uint64_t seed);

    [[nodiscard]] std::size_t particles() const noexcept { return particles_; }
    [[nodiscard]] std::size_t nodes() const noexcept { return grid_.steps() + 1; }
    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] const TimeGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] const std::string& model_label() const noexcept { return model_label_; }
    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

    [[nodiscard]] std::span<const double> state(std::size_t particle, std::size_t node) const noexcept {
        return {states_.data() + (particle * nodes() + node) * dim_, dim_};
    }
    [[nodiscard]] std::span<double> state(std::size_t particle, std::size_t node) noexcept {
        return {states_.data() + (particle * nodes() + node) * dim_, dim_};
    }
    [[nodiscard]] std::span<const double> flat() const noexcept { return states_; }

    /// Uniform empirical law of the particles at one node.
    [[nodiscard]] EmpiricalMeasure cross_section(std::size_t node) const;

    /// max over particles and nodes of |X|
    [[nodiscard]] double max_norm() const;

    friend bool operator==(const ParticleSystem&, const ParticleSystem&) = default;

private:
    std::size_t particles_;
    TimeGrid grid_;
    std::size_t dim_;
    std::string model_label_;
    std::uint64_t seed_;
    std::vector<double> states_;
};

struct MeasureFlow {
    std::vector<EmpiricalMeasure> laws;  ///< one per grid node
};

/// Interacting-particle Euler scheme: the law argument at step k is the
/// empirical measure of all particles at the step start.
ParticleSystem euler_particles(const CoefficientModel& model, std::span<const double> x0, const TimeGrid& grid,
                               const NoiseBundle& noise);

/// Same scheme driven by dA and dM of a semimartingale driver.
ParticleSystem euler_particles_driven(const CoefficientModel& model, std::span<const double> x0,
                                      const TimeGrid& grid, const NoiseBundle& noise, const DriverPath& driver);

/// Classical SDE with the law argument replaced by a given flow: at step k
/// the coefficients are frozen at frozen.laws[k].
ParticleSystem euler_frozen_law(const CoefficientModel& model, std::span<const double> x0, const TimeGrid& grid,
                                const NoiseBundle& noise, const MeasureFlow& frozen);

MeasureFlow law_flow(const ParticleSystem& ps);

/// Dirac flow at x0 held with `copies` atoms per node.
MeasureFlow constant_flow(std::span<const double> x0, const TimeGrid& grid, std::size_t copies);

inline constexpr std::size_t kFlowSubsample = 512;

/// sup over grid nodes of W2 between two flows on the same grid. d = 1 uses
/// the quantile route; d > 1 evaluates both flows on one seeded subsample of
/// at most kFlowSubsample atom indices.
double sup_w2(const MeasureFlow& a, const MeasureFlow& b, std::uint64_t subsample_seed = 0);

struct PicardResult {
    std::vector<MeasureFlow> flows;  ///< flows[0] is the Dirac start, flows[k+1] = Psi(flows[k])
    std::vector<double> dists;       ///< dists[k] = sup_t W2(flows[k+1]_t, flows[k]_t)
};

/// Fixed-point iteration on the flow of laws, all iterates sharing one noise
/// bundle. Stops after max_iterations or once dists[k] < tol.
PicardResult picard_solve(const CoefficientModel& model, std::span<const double> x0, const TimeGrid& grid,
                          const NoiseBundle& noise, std::size_t max_iterations, double tol);

/// CSV: header "particle,node,t,x1..xd", one row per (particle, node).
void write_csv(std::ostream& out, const ParticleSystem& ps);

/// Binary dump: "MVS1", then little-endian uint64 particles, nodes, dim, then
/// particles*nodes*dim little-endian IEEE-754 doubles in row-major order.
void write_binary(std::ostream& out, const ParticleSystem& ps);

struct BinaryDump {
    std::size_t particles = 0;
    std::size_t nodes = 0;
    std::size_t dim = 0;
    std::vector<double> values;
};

BinaryDump read_binary(std::istream& in);

}  // namespace mvsde
