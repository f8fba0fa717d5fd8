// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <concepts>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <type_traits>
#include <vector>

namespace mvsde {

using Point = std::vector<double>;

/// Finite weighted point cloud on R^d standing in for a law.
///
/// Points are stored flat, point i occupying [i*d, (i+1)*d). Weights are
/// nonnegative and sum to one within 1e-12; construction rejects anything
/// else.
class EmpiricalMeasure {
public:
    EmpiricalMeasure(std::vector<double> flat_points, std::size_t dim, std::vector<double> weights);

    /// Uniform weights 1/n over n = flat_points.size() / dim points.
    static EmpiricalMeasure uniform(std::vector<double> flat_points, std::size_t dim);

    /// n copies of a single point (a Dirac law held with n atoms).
    static EmpiricalMeasure dirac(std::span<const double> point, std::size_t copies = 1);

    [[nodiscard]] std::size_t size() const noexcept { return weights_.size(); }
    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] std::span<const double> point(std::size_t i) const noexcept {
        return {points_.data() + i * dim_, dim_};
    }
    [[nodiscard]] std::span<const double> flat() const noexcept { return points_; }
    [[nodiscard]] std::span<const double> weights() const noexcept { return weights_; }
    [[nodiscard]] bool is_uniform() const noexcept { return uniform_; }

    [[nodiscard]] Point mean() const;
    /// sqrt(sum_i w_i |x_i|^2), i.e. W2(mu, delta_0).
    [[nodiscard]] double second_moment_root() const;

private:
    std::vector<double> points_;
    std::vector<double> weights_;
    std::size_t dim_;
    bool uniform_;
};

/// Joint plan between two measures with the stated marginals.
class Coupling {
public:
    /// plan is row_measure.size() x col_measure.size(), row-major; marginals
    /// are checked to 1e-10.
    Coupling(EmpiricalMeasure row_measure, EmpiricalMeasure col_measure, std::vector<double> plan);

    [[nodiscard]] const EmpiricalMeasure& row_measure() const noexcept { return row_; }
    [[nodiscard]] const EmpiricalMeasure& col_measure() const noexcept { return col_; }
    [[nodiscard]] std::span<const double> plan() const noexcept { return plan_; }

    /// sum_ij plan_ij |x_i - y_j|^p
    [[nodiscard]] double transport_cost(double p) const;

private:
    EmpiricalMeasure row_;
    EmpiricalMeasure col_;
    std::vector<double> plan_;
};

inline constexpr std::size_t kMaxAssignmentSize = 1024;

EmpiricalMeasure empirical_from_samples(std::span<const Point> samples);

/// W_p on the line via the monotone (quantile) coupling. Handles arbitrary
/// weights by merging the two quantile functions.
double wasserstein_1d(double p, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

/// Exact W_p for equal-size uniform clouds in any dimension, solving the
/// assignment problem. n is capped at kMaxAssignmentSize.
double wasserstein_assignment(double p, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

/// Optimal coupling for equal-size uniform clouds (a permutation plan).
Coupling optimal_coupling(double p, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

/// Dispatch: 1-D goes through the quantile route, a single-atom side has a
/// closed form, otherwise the assignment solver.
double wasserstein(double p, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

struct CouplingBound {
    double w = 0.0;  ///< W_p(emp(X), emp(Y))^p
    double m = 0.0;  ///< mean |X_i - Y_i|^p
};

/// Compares optimal transport cost against the cost of the given pairing.
CouplingBound coupling_bound_check(std::span<const Point> xs, std::span<const Point> ys, double p);

/// sum_i w_i f(x_i) for a scalar or vector-valued test function.
template <typename F>
    requires std::invocable<F&, std::span<const double>>
std::vector<double> integrate(const EmpiricalMeasure& mu, F&& f) {
    using R = std::remove_cvref_t<std::invoke_result_t<F&, std::span<const double>>>;
    std::vector<double> acc;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double w = mu.weights()[i];
        if constexpr (std::is_arithmetic_v<R>) {
            if (acc.empty()) acc.assign(1, 0.0);
            acc[0] += w * static_cast<double>(f(mu.point(i)));
        } else {
            const R value = f(mu.point(i));
            if (acc.empty()) acc.assign(value.size(), 0.0);
            for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += w * value[c];
        }
    }
    return acc;
}

template <typename F>
double integrate_scalar(const EmpiricalMeasure& mu, F&& f) {
    return integrate(mu, std::forward<F>(f)).at(0);
}

/// One row per point: weight, x_1..x_d.
void write_csv(std::ostream& out, const EmpiricalMeasure& mu);
EmpiricalMeasure read_csv(std::istream& in);

}  // namespace mvsde
