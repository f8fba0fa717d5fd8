// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "mvsde/error.hpp"
#include "mvsde/parallel.hpp"
#include "mvsde/sde.hpp"

namespace mvsde::detail {

/// Per-thread scratch for one particle update.
struct Scratch {
    std::vector<double> drift;
    std::vector<double> diffusion;
    std::vector<double> drift_acc;
    std::vector<double> noise_acc;
    std::vector<double> scaled_noise;

    void reset(std::size_t dim) {
        drift.resize(dim);
        diffusion.resize(dim * dim);
        drift_acc.assign(dim, 0.0);
        noise_acc.assign(dim, 0.0);
        scaled_noise.resize(dim);
    }
};

inline Scratch& thread_scratch(std::size_t dim) {
    thread_local Scratch scratch;
    scratch.reset(dim);
    return scratch;
}

/// acc += weight_sqrt * (S * dW), with S row-major d x d.
inline void accumulate_noise(std::span<const double> diffusion, std::span<const double> dw, double weight_sqrt,
                             std::span<double> acc) {
    const std::size_t d = acc.size();
    for (std::size_t r = 0; r < d; ++r) {
        double row = 0.0;
        for (std::size_t c = 0; c < d; ++c) row += diffusion[r * d + c] * dw[c];
        acc[r] += weight_sqrt * row;
    }
}

/// acc += weight * b
inline void accumulate_drift(std::span<const double> drift, double weight, std::span<double> acc) {
    for (std::size_t r = 0; r < acc.size(); ++r) acc[r] += weight * drift[r];
}

/// out = x + drift_acc * da + noise_acc
inline void euler_combine(std::span<const double> x, std::span<const double> drift_acc, double da,
                          std::span<const double> noise_acc, std::span<double> out) {
    for (std::size_t r = 0; r < x.size(); ++r) out[r] = x[r] + drift_acc[r] * da + noise_acc[r];
}

inline void init_states(ParticleSystem& ps, std::span<const double> x0) {
    if (x0.size() != ps.dim()) throw Error(Errc::DimensionMismatch, "initial condition dimension mismatch");
    for (std::size_t i = 0; i < ps.particles(); ++i) {
        auto s = ps.state(i, 0);
        std::copy(x0.begin(), x0.end(), s.begin());
    }
    for (double v : x0) {
        if (!std::isfinite(v)) throw NonFiniteStateError(0, 0);
    }
}

/// Scans node k+1 in particle order; the first offender is reported.
inline void check_finite(const ParticleSystem& ps, std::size_t step) {
    for (std::size_t i = 0; i < ps.particles(); ++i) {
        for (double v : ps.state(i, step + 1)) {
            if (!std::isfinite(v)) throw NonFiniteStateError(step, i);
        }
    }
}

inline void check_noise(const NoiseBundle& noise, std::size_t dim, const TimeGrid& grid) {
    if (noise.dim() != dim) throw Error(Errc::DimensionMismatch, "noise dimension does not match model");
    if (noise.steps() != grid.steps()) throw Error(Errc::GridMismatch, "noise bundle built for another grid");
}

}  // namespace mvsde::detail
