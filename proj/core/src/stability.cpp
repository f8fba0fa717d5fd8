// SPDX-License-Identifier: Apache-2.0
#include "mvsde/stability.hpp"

#include <algorithm>
#include <cmath>

#include "mvsde/error.hpp"
#include "mvsde/format.hpp"

namespace mvsde {
namespace {

struct MeanStd {
    double mean = 0.0;
    double std_error = 0.0;
};

MeanStd mean_and_error(std::span<const double> values) {
    const auto n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    if (values.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

std::vector<std::pair<std::string, std::string>> base_echo(const CoefficientModel& model, const TimeGrid& grid,
                                                           std::size_t particles, std::uint64_t seed) {
    std::vector<std::pair<std::string, std::string>> echo{
        {"model", model.label()},
        {"T", format_double(grid.horizon())},
        {"N", std::to_string(grid.steps())},
        {"M", std::to_string(particles)},
        {"seed", std::to_string(seed)},
    };
    for (const auto& [key, value] : model.params()) echo.emplace_back("model." + key, format_double(value));
    return echo;
}

void fill_point(StabilityReport& report, double size, const ParticleSystem& base, const ParticleSystem& other) {
    const auto sups = pathwise_sup_sq(base, other);
    const auto stats = mean_and_error(sups);
    report.perturbation_sizes.push_back(size);
    report.errors.push_back(stats.mean);
    report.mc_std.push_back(stats.std_error);
}

}  // namespace

double fit_tail_slope(std::span<const double> axis, std::span<const double> errors) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < std::min(axis.size(), errors.size()); ++i) {
        if (axis[i] > 0.0 && errors[i] > 0.0 && std::isfinite(axis[i])) {
            pts.emplace_back(std::log(axis[i]), std::log(errors[i]));
        }
    }
    const std::size_t keep = (pts.size() + 1) / 2;
    if (keep < 2) return std::numeric_limits<double>::quiet_NaN();
    const std::span<const std::pair<double, double>> tail(pts.data() + (pts.size() - keep), keep);
    double mx = 0.0;
    double my = 0.0;
    for (const auto& [lx, ly] : tail) {
        mx += lx;
        my += ly;
    }
    mx /= static_cast<double>(keep);
    my /= static_cast<double>(keep);
    double sxy = 0.0;
    double sxx = 0.0;
    for (const auto& [lx, ly] : tail) {
        sxy += (lx - mx) * (ly - my);
        sxx += (lx - mx) * (lx - mx);
    }
    return sxx > 0.0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

std::vector<double> pathwise_sup_sq(const ParticleSystem& x, const ParticleSystem& y) {
    if (x.particles() != y.particles() || x.nodes() != y.nodes() || x.dim() != y.dim()) {
        throw Error(Errc::SizeMismatch, "coupled systems differ in shape");
    }
    std::vector<double> sups(x.particles(), 0.0);
    for (std::size_t i = 0; i < x.particles(); ++i) {
        double worst = 0.0;
        for (std::size_t k = 0; k < x.nodes(); ++k) {
            const auto a = x.state(i, k);
            const auto b = y.state(i, k);
            double sq = 0.0;
            for (std::size_t c = 0; c < a.size(); ++c) sq += (a[c] - b[c]) * (a[c] - b[c]);
            worst = std::max(worst, sq);
        }
        sups[i] = worst;
    }
    return sups;
}

namespace {

void require_decreasing_sizes(std::span<const double> sizes, const char* what) {
    if (sizes.size() < 3) throw Error(Errc::InvalidArgument, std::string(what) + " needs at least three sizes");
    for (std::size_t j = 0; j < sizes.size(); ++j) {
        if (!(sizes[j] >= 0.0) || !std::isfinite(sizes[j])) {
            throw Error(Errc::InvalidArgument, std::string(what) + " sizes must be finite and >= 0");
        }
        if (j > 0 && !(sizes[j] < sizes[j - 1])) {
            throw Error(Errc::InvalidArgument, std::string(what) + " sizes must be strictly decreasing");
        }
    }
}

}  // namespace

StabilityReport stability_initial(const CoefficientModel& model, std::span<const double> x,
                                  std::span<const double> deltas, const TimeGrid& grid, std::size_t particles,
                                  std::uint64_t seed) {
    require_decreasing_sizes(deltas, "stability_initial");
    const auto noise = generate_noise(seed, particles, grid, model.dim());
    const auto base = euler_particles(model, x, grid, noise);

    StabilityReport report;
    report.kind = "initial";
    report.slope_axis = "delta^2";
    report.config = base_echo(model, grid, particles, seed);
    report.config.emplace_back("perturbation", "x0 + delta e1");
    for (double delta : deltas) {
        std::vector<double> shifted(x.begin(), x.end());
        shifted[0] += delta;
        fill_point(report, delta, base, euler_particles(model, shifted, grid, noise));
    }
    std::vector<double> axis;
    for (double delta : deltas) axis.push_back(delta * delta);
    report.slope = fit_tail_slope(axis, report.errors);
    return report;
}

CoefficientBumps CoefficientBumps::tanh_bumps(std::size_t dim) {
    CoefficientBumps bumps;
    bumps.drift_bump = [](std::span<const double> x, std::span<double> out) {
        for (std::size_t c = 0; c < x.size(); ++c) out[c] = std::tanh(x[c]);
    };
    bumps.diffusion_bump = [dim](std::span<const double> x, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t c = 0; c < dim; ++c) out[c * dim + c] = std::tanh(x[c]);
    };
    bumps.lipschitz = 1.0;
    bumps.bound = std::sqrt(static_cast<double>(dim));
    bumps.label = "g_b=tanh(x), g_s=diag(tanh(x))";
    return bumps;
}

CoefficientBumps CoefficientBumps::constant_drift(std::size_t dim, double value) {
    CoefficientBumps bumps;
    bumps.drift_bump = [value](std::span<const double>, std::span<double> out) {
        std::fill(out.begin(), out.end(), value);
    };
    bumps.diffusion_bump = [](std::span<const double>, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
    };
    bumps.lipschitz = 0.0;
    bumps.bound = std::abs(value) * std::sqrt(static_cast<double>(dim));
    bumps.label = "g_b=" + format_double(value) + ", g_s=0";
    return bumps;
}

CoefficientModel perturb_coefficients(const CoefficientModel& model, const CoefficientBumps& bumps, double eps) {
    const std::size_t d = model.dim();
    auto freezer = [model, bumps, eps, d](double t, const EmpiricalMeasure& mu) {
        const FrozenCoefficients base = model.freeze(t, mu);
        FrozenCoefficients fc;
        fc.drift = [base, bump = bumps.drift_bump, eps, d](std::span<const double> x, std::span<double> out) {
            thread_local std::vector<double> g;
            g.resize(d);
            base.drift(x, out);
            bump(x, g);
            for (std::size_t c = 0; c < d; ++c) out[c] += eps * g[c];
        };
        fc.diffusion = [base, bump = bumps.diffusion_bump, eps, d](std::span<const double> x,
                                                                  std::span<double> out) {
            thread_local std::vector<double> g;
            g.resize(d * d);
            base.diffusion(x, out);
            bump(x, g);
            for (std::size_t c = 0; c < d * d; ++c) out[c] += eps * g[c];
        };
        return fc;
    };
    CoefficientModel::Declared declared{
        .growth_C = model.growth_C() + eps * bumps.bound,
        .lipschitz_L = model.lipschitz_L() ? std::optional<double>(*model.lipschitz_L() + eps * bumps.lipschitz)
                                           : std::nullopt,
        .family = model.family(),
        .modulus = model.modulus(),
        .cap = model.cap(),
    };
    auto params = model.params();
    params["eps"] = eps;
    return CoefficientModel(model.label() + "+bump", d, freezer, declared, params);
}

StabilityReport stability_coefficients(const CoefficientModel& model, std::span<const double> x0,
                                       std::span<const double> epsilons, const TimeGrid& grid,
                                       std::size_t particles, std::uint64_t seed,
                                       const CoefficientBumps& bumps) {
    require_decreasing_sizes(epsilons, "stability_coefficients");
    const auto noise = generate_noise(seed, particles, grid, model.dim());
    const auto base = euler_particles(model, x0, grid, noise);

    StabilityReport report;
    report.kind = "coefficients";
    report.slope_axis = "eps";
    report.config = base_echo(model, grid, particles, seed);
    report.config.emplace_back("bumps", bumps.label);
    for (double eps : epsilons) {
        fill_point(report, eps, base, euler_particles(perturb_coefficients(model, bumps, eps), x0, grid, noise));
    }
    report.slope = fit_tail_slope(epsilons, report.errors);
    return report;
}

DriverPath driver_family(std::int64_t n) {
    if (n == kExactDriver) return DriverPath::brownian();
    if (n < 1) throw Error(Errc::InvalidArgument, "driver index n must be >= 1");
    return DriverPath::scaled(1.0 + 1.0 / static_cast<double>(n));
}

StabilityReport stability_drivers(const CoefficientModel& model, std::span<const double> x0,
                                  std::span<const std::int64_t> n_list, const TimeGrid& grid,
                                  std::size_t particles, std::uint64_t seed) {
    if (n_list.size() < 3) throw Error(Errc::InvalidArgument, "stability_drivers needs at least three n");
    for (std::size_t j = 0; j < n_list.size(); ++j) {
        if (n_list[j] < 1) throw Error(Errc::InvalidArgument, "driver index n must be >= 1");
        if (j > 0 && !(n_list[j] > n_list[j - 1])) {
            throw Error(Errc::InvalidArgument, "driver indices must be strictly increasing");
        }
    }
    const auto noise = generate_noise(seed, particles, grid, model.dim());
    const auto exact = DriverPath::brownian();
    const auto base = euler_particles_driven(model, x0, grid, noise, exact);

    StabilityReport report;
    report.kind = "drivers";
    report.slope_axis = "1/n";
    report.config = base_echo(model, grid, particles, seed);
    report.config.emplace_back("drivers", "A^n(t)=(1+1/n)t, M^n=(1+1/n)B");
    std::vector<double> axis;
    for (std::int64_t n : n_list) {
        const auto driver = driver_family(n);
        const double inv_n = n == kExactDriver ? 0.0 : 1.0 / static_cast<double>(n);
        fill_point(report, inv_n, base, euler_particles_driven(model, x0, grid, noise, driver));
        report.config.emplace_back("tv_gap[n=" + (n == kExactDriver ? std::string("inf") : std::to_string(n)) + "]",
                                   format_double(total_variation_gap(driver, exact, grid)));
        axis.push_back(inv_n);
    }
    report.slope = fit_tail_slope(axis, report.errors);
    return report;
}

}  // namespace mvsde
