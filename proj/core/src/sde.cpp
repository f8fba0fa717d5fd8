// SPDX-License-Identifier: Apache-2.0
#include "mvsde/sde.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>

#include "mvsde/error.hpp"
#include "mvsde/format.hpp"
#include "mvsde/parallel.hpp"
#include "mvsde/rng.hpp"
#include "scheme.hpp"

namespace mvsde {

TimeGrid::TimeGrid(double horizon, std::size_t steps) : horizon_(horizon), steps_(steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw Error(Errc::InvalidArgument, "horizon T must be > 0");
    if (steps == 0) throw Error(Errc::InvalidArgument, "step count N must be >= 1");
}

TimeGrid TimeGrid::refine(std::size_t factor) const {
    if (factor == 0) throw Error(Errc::InvalidArgument, "refinement factor must be >= 1");
    return {horizon_, steps_ * factor};
}

NoiseBundle::NoiseBundle(std::uint64_t seed, std::size_t particles, const TimeGrid& grid, std::size_t dim,
                         std::uint32_t stream)
    : seed_(seed), stream_(stream), particles_(particles), steps_(grid.steps()), dim_(dim) {
    if (particles == 0) throw Error(Errc::InvalidArgument, "particle count M must be >= 1");
    if (dim == 0) throw Error(Errc::DimensionMismatch, "noise dimension must be positive");
    if (stream == 0xFFFFFFFFu) throw Error(Errc::InvalidArgument, "stream id reserved");
    increments_.resize(particles_ * steps_ * dim_);
    std::vector<double> scale(steps_);
    for (std::size_t k = 0; k < steps_; ++k) scale[k] = std::sqrt(grid.step_length(k));
    const rng::Philox4x32 gen(seed);
    parallel_for(particles_, [&](std::size_t i) {
        for (std::size_t k = 0; k < steps_; ++k) {
            double* out = increments_.data() + (i * steps_ + k) * dim_;
            for (std::size_t c = 0; c < dim_; ++c) {
                const rng::Philox4x32::Counter ctr{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(k),
                                                   static_cast<std::uint32_t>(c), stream};
                out[c] = scale[k] * rng::standard_normal(gen, ctr);
            }
        }
    });
}

NoiseBundle generate_noise(std::uint64_t seed, std::size_t particles, const TimeGrid& grid, std::size_t dim,
                           std::uint32_t stream) {
    return {seed, particles, grid, dim, stream};
}

DriverPath DriverPath::brownian() {
    return {[](double t) { return t; }, 1.0, "A(t)=t, M=B"};
}

DriverPath DriverPath::scaled(double factor) {
    return {[factor](double t) { return factor * t; }, factor,
            "A(t)=" + format_double(factor) + "t, M=" + format_double(factor) + "B"};
}

double total_variation_gap(const DriverPath& a, const DriverPath& b, const TimeGrid& grid) {
    double tv = 0.0;
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const double t0 = grid.node(k);
        const double t1 = grid.node(k + 1);
        const double da = a.bounded_variation(t1) - a.bounded_variation(t0);
        const double db = b.bounded_variation(t1) - b.bounded_variation(t0);
        tv += std::abs(da - db);
    }
    return tv;
}

ParticleSystem::ParticleSystem(std::size_t particles, const TimeGrid& grid, std::size_t dim,
                               std::string model_label, std::uint64_t seed)
    : particles_(particles), grid_(grid), dim_(dim), model_label_(std::move(model_label)), seed_(seed) {
    if (particles == 0) throw Error(Errc::InvalidArgument, "particle count M must be >= 1");
    states_.assign(particles_ * nodes() * dim_, 0.0);
}

EmpiricalMeasure ParticleSystem::cross_section(std::size_t node) const {
    std::vector<double> flat(particles_ * dim_);
    for (std::size_t i = 0; i < particles_; ++i) {
        const auto s = state(i, node);
        std::copy(s.begin(), s.end(), flat.begin() + static_cast<std::ptrdiff_t>(i * dim_));
    }
    return EmpiricalMeasure::uniform(std::move(flat), dim_);
}

double ParticleSystem::max_norm() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < particles_; ++i) {
        for (std::size_t k = 0; k < nodes(); ++k) {
            double sq = 0.0;
            for (double v : state(i, k)) sq += v * v;
            worst = std::max(worst, std::sqrt(sq));
        }
    }
    return worst;
}

namespace {

/// Shared Euler loop. law_at(ps, k) yields the measure the coefficients are
/// frozen at for step k.
template <typename LawAt>
ParticleSystem run_euler(const CoefficientModel& model, std::span<const double> x0, const TimeGrid& grid,
                         const NoiseBundle& noise, const DriverPath& driver, LawAt&& law_at) {
    const std::size_t d = model.dim();
    detail::check_noise(noise, d, grid);
    ParticleSystem ps(noise.particles(), grid, d, model.label(), noise.seed());
    detail::init_states(ps, x0);
    const double scale = driver.martingale_scale;

    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const double t = grid.node(k);
        const double da = driver.bounded_variation(grid.node(k + 1)) - driver.bounded_variation(t);
        const FrozenCoefficients fc = model.freeze(t, law_at(ps, k));
        parallel_for(ps.particles(), [&](std::size_t i) {
            auto& scratch = detail::thread_scratch(d);
            const auto x = ps.state(i, k);
            const auto db = noise.increment(i, k);
            for (std::size_t c = 0; c < d; ++c) scratch.scaled_noise[c] = scale * db[c];
            fc.drift(x, scratch.drift);
            fc.diffusion(x, scratch.diffusion);
            detail::accumulate_drift(scratch.drift, 1.0, scratch.drift_acc);
            detail::accumulate_noise(scratch.diffusion, scratch.scaled_noise, 1.0, scratch.noise_acc);
            detail::euler_combine(x, scratch.drift_acc, da, scratch.noise_acc, ps.state(i, k + 1));
        });
        detail::check_finite(ps, k);
    }
    return ps;
}

}  // namespace

ParticleSystem euler_particles(const CoefficientModel& model, std::span<const double> x0, const TimeGrid& grid,
                               const NoiseBundle& noise) {
    return euler_particles_driven(model, x0, grid, noise, DriverPath::brownian());
}

ParticleSystem euler_particles_driven(const CoefficientModel& model, std::span<const double> x0,
                                      const TimeGrid& grid, const NoiseBundle& noise, const DriverPath& driver) {
    if (!driver.bounded_variation) throw Error(Errc::InvalidArgument, "driver has no bounded-variation part");
    return run_euler(model, x0, grid, noise, driver,
                     [](const ParticleSystem& ps, std::size_t k) { return ps.cross_section(k); });
}

ParticleSystem euler_frozen_law(const CoefficientModel& model, std::span<const double> x0, const TimeGrid& grid,
                                const NoiseBundle& noise, const MeasureFlow& frozen) {
    if (frozen.laws.size() != grid.steps() + 1) throw Error(Errc::GridMismatch, "frozen flow has wrong length");
    return run_euler(model, x0, grid, noise, DriverPath::brownian(),
                     [&](const ParticleSystem&, std::size_t k) -> const EmpiricalMeasure& { return frozen.laws[k]; });
}

MeasureFlow law_flow(const ParticleSystem& ps) {
    MeasureFlow flow;
    flow.laws.reserve(ps.nodes());
    for (std::size_t k = 0; k < ps.nodes(); ++k) flow.laws.push_back(ps.cross_section(k));
    return flow;
}

MeasureFlow constant_flow(std::span<const double> x0, const TimeGrid& grid, std::size_t copies) {
    MeasureFlow flow;
    const auto atom = EmpiricalMeasure::dirac(x0, copies);
    flow.laws.assign(grid.steps() + 1, atom);
    return flow;
}

namespace {

EmpiricalMeasure restrict_to(const EmpiricalMeasure& mu, std::span<const std::size_t> idx) {
    std::vector<double> flat;
    flat.reserve(idx.size() * mu.dim());
    for (std::size_t i : idx) {
        const auto p = mu.point(i);
        flat.insert(flat.end(), p.begin(), p.end());
    }
    return EmpiricalMeasure::uniform(std::move(flat), mu.dim());
}

}  // namespace

double sup_w2(const MeasureFlow& a, const MeasureFlow& b, std::uint64_t subsample_seed) {
    if (a.laws.size() != b.laws.size()) throw Error(Errc::GridMismatch, "flows have different lengths");
    if (a.laws.empty()) return 0.0;
    const std::size_t d = a.laws.front().dim();
    const std::size_t n = a.laws.front().size();

    std::vector<std::size_t> subset;
    const bool subsample = d > 1 && n > kFlowSubsample &&
                           std::all_of(b.laws.begin(), b.laws.end(), [&](const auto& m) { return m.size() == n; });
    if (subsample) {
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        rng::Stream stream(subsample_seed, 0x53554253u);
        for (std::size_t i = 0; i < kFlowSubsample; ++i) std::swap(perm[i], perm[i + stream.below(n - i)]);
        subset.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(kFlowSubsample));
        std::sort(subset.begin(), subset.end());
    }

    std::vector<double> per_node(a.laws.size());
    parallel_for(a.laws.size(), [&](std::size_t k) {
        if (subsample) {
            per_node[k] = wasserstein(2.0, restrict_to(a.laws[k], subset), restrict_to(b.laws[k], subset));
        } else {
            per_node[k] = wasserstein(2.0, a.laws[k], b.laws[k]);
        }
    });
    return *std::max_element(per_node.begin(), per_node.end());
}

PicardResult picard_solve(const CoefficientModel& model, std::span<const double> x0, const TimeGrid& grid,
                          const NoiseBundle& noise, std::size_t max_iterations, double tol) {
    if (max_iterations == 0) throw Error(Errc::InvalidArgument, "Picard needs at least one iteration");
    if (!model.lipschitz_L()) {
        throw Error(Errc::InvalidArgument, "Picard iteration needs a Lipschitz-family model");
    }
    PicardResult result;
    result.flows.push_back(constant_flow(x0, grid, noise.particles()));
    for (std::size_t k = 0; k < max_iterations; ++k) {
        const auto ps = euler_frozen_law(model, x0, grid, noise, result.flows.back());
        result.flows.push_back(law_flow(ps));
        const auto& flows = result.flows;
        result.dists.push_back(sup_w2(flows[flows.size() - 1], flows[flows.size() - 2], noise.seed()));
        if (result.dists.back() < tol) break;
    }
    return result;
}

void write_csv(std::ostream& out, const ParticleSystem& ps) {
    out << "particle,node,t";
    for (std::size_t c = 0; c < ps.dim(); ++c) out << ",x" << (c + 1);
    out << '\n';
    for (std::size_t i = 0; i < ps.particles(); ++i) {
        for (std::size_t k = 0; k < ps.nodes(); ++k) {
            out << i << ',' << k << ',' << format_double(ps.grid().node(k));
            for (double v : ps.state(i, k)) out << ',' << format_double(v);
            out << '\n';
        }
    }
}

namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
    static_assert(sizeof(T) == 8);
    auto bits = std::bit_cast<std::uint64_t>(value);
    char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
    out.write(bytes, 8);
}

template <typename T>
T get_le(std::istream& in) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw Error(Errc::IoError, "truncated MVS1 dump");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    return std::bit_cast<T>(bits);
}

constexpr char kMagic[4] = {'M', 'V', 'S', '1'};

}  // namespace

void write_binary(std::ostream& out, const ParticleSystem& ps) {
    out.write(kMagic, 4);
    put_le<std::uint64_t>(out, ps.particles());
    put_le<std::uint64_t>(out, ps.nodes());
    put_le<std::uint64_t>(out, ps.dim());
    for (double v : ps.flat()) put_le<double>(out, v);
}

BinaryDump read_binary(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw Error(Errc::IoError, "not an MVS1 dump");
    BinaryDump dump;
    dump.particles = get_le<std::uint64_t>(in);
    dump.nodes = get_le<std::uint64_t>(in);
    dump.dim = get_le<std::uint64_t>(in);
    const std::size_t count = dump.particles * dump.nodes * dump.dim;
    dump.values.resize(count);
    for (auto& v : dump.values) v = get_le<double>(in);
    return dump;
}

}  // namespace mvsde
