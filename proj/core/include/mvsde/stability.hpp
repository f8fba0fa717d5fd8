// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mvsde/model.hpp"
#include "mvsde/sde.hpp"

namespace mvsde {

/// Monte-Carlo estimates of E[sup_t |X^n_t - X_t|^2] for a sequence of
/// perturbations, each pair of systems coupled through one noise bundle.
struct StabilityReport {
    std::string kind;  ///< "initial", "coefficients" or "drivers"
    std::vector<double> perturbation_sizes;
    std::vector<double> errors;
    std::vector<double> mc_std;
    double slope = std::numeric_limits<double>::quiet_NaN();
    std::string slope_axis;  ///< abscissa of the log-log fit
    /// echo of the experiment: model, grid, M, seed, perturbation family
    std::vector<std::pair<std::string, std::string>> config;
};

/// Least-squares slope of log(errors) against log(axis) over the last
/// ceil(half) of the points with positive axis and error. NaN if fewer than
/// two such points remain.
double fit_tail_slope(std::span<const double> axis, std::span<const double> errors);

/// Per-particle sup over nodes of |X - Y|^2. Both systems must share shape.
std::vector<double> pathwise_sup_sq(const ParticleSystem& x, const ParticleSystem& y);

/// X^{x + delta e1} against X^x. Each delta >= 0, strictly decreasing, at least
/// three of them. Slope is fitted against delta^2.
StabilityReport stability_initial(const CoefficientModel& model, std::span<const double> x,
                                  std::span<const double> deltas, const TimeGrid& grid, std::size_t particles,
                                  std::uint64_t seed);

/// Bounded Lipschitz bumps g_b, g_s, giving b_n = b + eps g_b, s_n = s + eps g_s.
struct CoefficientBumps {
    std::function<void(std::span<const double> x, std::span<double> out)> drift_bump;      ///< d entries
    std::function<void(std::span<const double> x, std::span<double> out)> diffusion_bump;  ///< d*d entries
    double lipschitz = 1.0;
    double bound = 1.0;
    std::string label;

    /// g_b(x) = tanh(x) componentwise, g_s(x) = diag(tanh(x)).
    static CoefficientBumps tanh_bumps(std::size_t dim);
    /// g_b = value * ones, g_s = 0.
    static CoefficientBumps constant_drift(std::size_t dim, double value = 1.0);
};

/// b + eps * g_b, s + eps * g_s; law dependence is inherited unchanged.
CoefficientModel perturb_coefficients(const CoefficientModel& model, const CoefficientBumps& bumps, double eps);

/// Each eps >= 0, strictly decreasing, at least three. Slope against eps.
StabilityReport stability_coefficients(const CoefficientModel& model, std::span<const double> x0,
                                       std::span<const double> epsilons, const TimeGrid& grid,
                                       std::size_t particles, std::uint64_t seed,
                                       const CoefficientBumps& bumps);

/// n = kExactDriver stands for n = infinity (the unperturbed drivers).
inline constexpr std::int64_t kExactDriver = std::numeric_limits<std::int64_t>::max();

/// A^n(t) = (1 + 1/n) t, M^n = (1 + 1/n) B; exact drivers for kExactDriver.
DriverPath driver_family(std::int64_t n);

/// Each n >= 1, strictly increasing, at least three. Slope against 1/n.
StabilityReport stability_drivers(const CoefficientModel& model, std::span<const double> x0,
                                  std::span<const std::int64_t> n_list, const TimeGrid& grid,
                                  std::size_t particles, std::uint64_t seed);

}  // namespace mvsde
