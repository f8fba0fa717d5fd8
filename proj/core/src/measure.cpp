// SPDX-License-Identifier: Apache-2.0
#include "mvsde/measure.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "mvsde/assignment.hpp"
#include "mvsde/error.hpp"
#include "mvsde/format.hpp"

namespace mvsde {
namespace {

constexpr double kWeightSumTol = 1e-12;
constexpr double kMarginalTol = 1e-10;

void require_order(double p) {
    if (!(p >= 1.0) || !std::isfinite(p)) {
        throw Error(Errc::InvalidArgument, "Wasserstein order must be finite and >= 1");
    }
}

double distance_pow(std::span<const double> x, std::span<const double> y, double p) {
    double sq = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) {
        const double diff = x[c] - y[c];
        sq += diff * diff;
    }
    if (p == 2.0) return sq;
    return std::pow(std::sqrt(sq), p);
}

double abs_pow(double diff, double p) {
    diff = std::abs(diff);
    if (p == 1.0) return diff;
    if (p == 2.0) return diff * diff;
    return std::pow(diff, p);
}

std::vector<std::size_t> sorted_order(const EmpiricalMeasure& mu) {
    const auto pts = mu.flat();
    for (double v : pts) {
        if (std::isnan(v)) throw Error(Errc::UnsortableNaN, "measure contains NaN");
    }
    std::vector<std::size_t> order(mu.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return pts[a] < pts[b]; });
    return order;
}

void require_same_dim(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    if (mu.dim() != nu.dim()) throw Error(Errc::DimensionMismatch, "measures differ in dimension");
}

}  // namespace

EmpiricalMeasure::EmpiricalMeasure(std::vector<double> flat_points, std::size_t dim,
                                   std::vector<double> weights)
    : points_(std::move(flat_points)), weights_(std::move(weights)), dim_(dim), uniform_(true) {
    if (dim_ == 0) throw Error(Errc::DimensionMismatch, "dimension must be positive");
    if (weights_.empty()) throw Error(Errc::EmptySamples, "measure has no points");
    if (points_.size() != weights_.size() * dim_) {
        throw Error(Errc::SizeMismatch, "point storage does not match weights * dim");
    }
    // Neumaier summation keeps 1/n weights summing to 1 for large n.
    double total = 0.0;
    double compensation = 0.0;
    for (double w : weights_) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw Error(Errc::InvalidMeasure, "weights must be finite and nonnegative");
        }
        const double t = total + w;
        compensation += std::abs(total) >= w ? (total - t) + w : (w - t) + total;
        total = t;
    }
    if (std::abs(total + compensation - 1.0) > kWeightSumTol) {
        throw Error(Errc::InvalidMeasure, "weights must sum to 1");
    }
    const double w0 = weights_.front();
    uniform_ = std::all_of(weights_.begin(), weights_.end(),
                           [&](double w) { return std::abs(w - w0) <= kWeightSumTol; });
}

EmpiricalMeasure EmpiricalMeasure::uniform(std::vector<double> flat_points, std::size_t dim) {
    if (dim == 0) throw Error(Errc::DimensionMismatch, "dimension must be positive");
    if (flat_points.empty()) throw Error(Errc::EmptySamples, "measure has no points");
    if (flat_points.size() % dim != 0) {
        throw Error(Errc::DimensionMismatch, "point storage is not a multiple of dim");
    }
    const std::size_t n = flat_points.size() / dim;
    std::vector<double> weights(n, 1.0 / static_cast<double>(n));
    EmpiricalMeasure mu(std::move(flat_points), dim, std::move(weights));
    mu.uniform_ = true;
    return mu;
}

EmpiricalMeasure EmpiricalMeasure::dirac(std::span<const double> point, std::size_t copies) {
    if (copies == 0) throw Error(Errc::EmptySamples, "Dirac cloud needs at least one atom");
    std::vector<double> flat;
    flat.reserve(point.size() * copies);
    for (std::size_t i = 0; i < copies; ++i) flat.insert(flat.end(), point.begin(), point.end());
    return uniform(std::move(flat), point.size());
}

Point EmpiricalMeasure::mean() const {
    Point m(dim_, 0.0);
    for (std::size_t i = 0; i < size(); ++i) {
        const auto x = point(i);
        for (std::size_t c = 0; c < dim_; ++c) m[c] += weights_[i] * x[c];
    }
    return m;
}

double EmpiricalMeasure::second_moment_root() const {
    double acc = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
        double sq = 0.0;
        for (double v : point(i)) sq += v * v;
        acc += weights_[i] * sq;
    }
    return std::sqrt(acc);
}

Coupling::Coupling(EmpiricalMeasure row_measure, EmpiricalMeasure col_measure, std::vector<double> plan)
    : row_(std::move(row_measure)), col_(std::move(col_measure)), plan_(std::move(plan)) {
    const std::size_t rows = row_.size();
    const std::size_t cols = col_.size();
    if (plan_.size() != rows * cols) throw Error(Errc::SizeMismatch, "plan shape mismatch");
    std::vector<double> col_sum(cols, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            const double v = plan_[i * cols + j];
            if (!(v >= 0.0)) throw Error(Errc::InvalidMeasure, "plan entries must be nonnegative");
            row_sum += v;
            col_sum[j] += v;
        }
        if (std::abs(row_sum - row_.weights()[i]) > kMarginalTol) {
            throw Error(Errc::InvalidMeasure, "plan row marginal mismatch");
        }
    }
    for (std::size_t j = 0; j < cols; ++j) {
        if (std::abs(col_sum[j] - col_.weights()[j]) > kMarginalTol) {
            throw Error(Errc::InvalidMeasure, "plan column marginal mismatch");
        }
    }
}

double Coupling::transport_cost(double p) const {
    require_order(p);
    double acc = 0.0;
    const std::size_t cols = col_.size();
    for (std::size_t i = 0; i < row_.size(); ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            const double v = plan_[i * cols + j];
            if (v > 0.0) acc += v * distance_pow(row_.point(i), col_.point(j), p);
        }
    }
    return acc;
}

EmpiricalMeasure empirical_from_samples(std::span<const Point> samples) {
    if (samples.empty()) throw Error(Errc::EmptySamples, "no samples");
    const std::size_t dim = samples.front().size();
    std::vector<double> flat;
    flat.reserve(samples.size() * dim);
    for (const auto& s : samples) {
        if (s.size() != dim) throw Error(Errc::DimensionMismatch, "samples differ in dimension");
        flat.insert(flat.end(), s.begin(), s.end());
    }
    return EmpiricalMeasure::uniform(std::move(flat), dim);
}

double wasserstein_1d(double p, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    require_order(p);
    if (mu.dim() != 1 || nu.dim() != 1) throw Error(Errc::DimensionNotOne, "wasserstein_1d needs d = 1");
    const auto order_mu = sorted_order(mu);
    const auto order_nu = sorted_order(nu);
    const auto x = mu.flat();
    const auto y = nu.flat();

    if (mu.is_uniform() && nu.is_uniform() && mu.size() == nu.size()) {
        double acc = 0.0;
        for (std::size_t i = 0; i < order_mu.size(); ++i) {
            acc += abs_pow(x[order_mu[i]] - y[order_nu[i]], p);
        }
        return std::pow(acc / static_cast<double>(mu.size()), 1.0 / p);
    }

    // Walk both quantile functions; each step consumes the smaller
    // remaining mass among the two current atoms.
    const auto wx = mu.weights();
    const auto wy = nu.weights();
    std::size_t i = 0;
    std::size_t j = 0;
    double rem_x = wx[order_mu[0]];
    double rem_y = wy[order_nu[0]];
    double acc = 0.0;
    while (i < order_mu.size() && j < order_nu.size()) {
        const double mass = std::min(rem_x, rem_y);
        acc += mass * abs_pow(x[order_mu[i]] - y[order_nu[j]], p);
        rem_x -= mass;
        rem_y -= mass;
        if (rem_x <= 0.0) {
            if (++i < order_mu.size()) rem_x = wx[order_mu[i]];
        }
        if (rem_y <= 0.0) {
            if (++j < order_nu.size()) rem_y = wy[order_nu[j]];
        }
    }
    return std::pow(acc, 1.0 / p);
}

namespace {

std::vector<double> assignment_costs(double p, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    require_order(p);
    require_same_dim(mu, nu);
    if (mu.size() != nu.size()) throw Error(Errc::SizeMismatch, "assignment needs equal sample counts");
    if (mu.size() > kMaxAssignmentSize) {
        throw Error(Errc::TooLarge, "assignment capped at " + std::to_string(kMaxAssignmentSize) + " points");
    }
    if (!mu.is_uniform() || !nu.is_uniform()) {
        throw Error(Errc::InvalidArgument, "assignment needs uniform weights");
    }
    const std::size_t n = mu.size();
    std::vector<double> cost(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double c = distance_pow(mu.point(i), nu.point(j), p);
            if (std::isnan(c)) throw Error(Errc::UnsortableNaN, "measure contains NaN");
            cost[i * n + j] = c;
        }
    }
    return cost;
}

}  // namespace

double wasserstein_assignment(double p, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    const auto cost = assignment_costs(p, mu, nu);
    const auto match = solve_assignment(cost, mu.size());
    return std::pow(std::max(0.0, match.total_cost) / static_cast<double>(mu.size()), 1.0 / p);
}

Coupling optimal_coupling(double p, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    const auto cost = assignment_costs(p, mu, nu);
    const std::size_t n = mu.size();
    const auto match = solve_assignment(cost, n);
    std::vector<double> plan(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) plan[i * n + match.row_to_col[i]] = mu.weights()[i];
    return Coupling(mu, nu, std::move(plan));
}

double wasserstein(double p, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    require_order(p);
    require_same_dim(mu, nu);
    if (mu.dim() == 1) return wasserstein_1d(p, mu, nu);
    if (mu.size() == 1 || nu.size() == 1) {
        const EmpiricalMeasure& atom = mu.size() == 1 ? mu : nu;
        const EmpiricalMeasure& cloud = mu.size() == 1 ? nu : mu;
        double acc = 0.0;
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            acc += cloud.weights()[i] * distance_pow(cloud.point(i), atom.point(0), p);
        }
        return std::pow(acc, 1.0 / p);
    }
    return wasserstein_assignment(p, mu, nu);
}

CouplingBound coupling_bound_check(std::span<const Point> xs, std::span<const Point> ys, double p) {
    if (xs.size() != ys.size()) throw Error(Errc::SizeMismatch, "paired samples differ in length");
    const auto mu = empirical_from_samples(xs);
    const auto nu = empirical_from_samples(ys);
    require_same_dim(mu, nu);
    double m = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) m += distance_pow(xs[i], ys[i], p);
    m /= static_cast<double>(xs.size());
    const double w = std::pow(wasserstein_assignment(p, mu, nu), p);
    return {w, m};
}

void write_csv(std::ostream& out, const EmpiricalMeasure& mu) {
    out << "weight";
    for (std::size_t c = 0; c < mu.dim(); ++c) out << ",x" << (c + 1);
    out << '\n';
    for (std::size_t i = 0; i < mu.size(); ++i) {
        out << format_double(mu.weights()[i]);
        for (double v : mu.point(i)) out << ',' << format_double(v);
        out << '\n';
    }
}

EmpiricalMeasure read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error(Errc::IoError, "empty measure CSV");
    const auto dim = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
    std::vector<double> flat;
    std::vector<double> weights;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string cell;
        std::vector<double> values;
        while (std::getline(row, cell, ',')) {
            try {
                values.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw Error(Errc::IoError, "bad number in measure CSV: " + cell);
            }
        }
        if (values.size() != dim + 1) throw Error(Errc::IoError, "ragged measure CSV row");
        weights.push_back(values[0]);
        flat.insert(flat.end(), values.begin() + 1, values.end());
    }
    return EmpiricalMeasure(std::move(flat), dim, std::move(weights));
}

}  // namespace mvsde
