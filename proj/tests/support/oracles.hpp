// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "mvsde/measure.hpp"
#include "mvsde/rng.hpp"

namespace mvsde::testing {

/// W_p between equal-size uniform clouds by enumerating every permutation.
inline double brute_force_wasserstein(double p, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    const std::size_t n = mu.size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::vector<double> cost(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double sq = 0.0;
            for (std::size_t c = 0; c < mu.dim(); ++c) {
                const double diff = mu.point(i)[c] - nu.point(j)[c];
                sq += diff * diff;
            }
            cost[i * n + j] = std::pow(std::sqrt(sq), p);
        }
    }
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += cost[i * n + perm[i]];
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return std::pow(best / static_cast<double>(n), 1.0 / p);
}

/// n Gaussian points in R^d, scaled and shifted.
inline EmpiricalMeasure gaussian_cloud(rng::Stream& stream, std::size_t n, std::size_t d, double scale = 1.0,
                                       double shift = 0.0) {
    std::vector<double> flat(n * d);
    for (double& v : flat) v = shift + scale * stream.normal();
    return EmpiricalMeasure::uniform(std::move(flat), d);
}

inline std::vector<Point> gaussian_points(rng::Stream& stream, std::size_t n, std::size_t d) {
    std::vector<Point> pts(n, Point(d));
    for (auto& p : pts) {
        for (double& v : p) v = stream.normal();
    }
    return pts;
}

/// Seeded pool of 4-point clouds in R^d with slowly growing spread.
inline std::vector<EmpiricalMeasure> measure_pool(std::uint64_t seed, std::size_t count, std::size_t d) {
    rng::Stream stream(seed, static_cast<std::uint32_t>(d));
    std::vector<EmpiricalMeasure> pool;
    for (std::size_t i = 0; i < count; ++i) pool.push_back(gaussian_cloud(stream, 4, d, 1.0 + 0.1 * i));
    return pool;
}

}  // namespace mvsde::testing
