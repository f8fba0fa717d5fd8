// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvsde/measure.hpp"

namespace mvsde {

/// Coefficients with the law argument frozen at one (t, mu). Any statistic
/// of mu the model needs is computed once in CoefficientModel::freeze, so
/// evaluating a particle costs O(d^2) instead of O(M).
struct FrozenCoefficients {
    /// out has d entries
    std::function<void(std::span<const double> x, std::span<double> out)> drift;
    /// out has d*d entries, row-major
    std::function<void(std::span<const double> x, std::span<double> out)> diffusion;
};

enum class HypothesisFamily {
    Lipschitz,  ///< growth + Lipschitz in (x, W2)
    Osgood,     ///< growth + W1-Lipschitz drift in the law, moduli rho/kappa in x
};

std::string to_string(HypothesisFamily family);

/// Moduli of continuity in the state variable for the non-Lipschitz family.
struct ModulusSpec {
    std::function<double(double)> rho;    ///< diffusion: |s(x)-s(y)| <= rho(|x-y|), rho^2 convex
    std::function<double(double)> kappa;  ///< drift: |b(x,m)-b(y,m)| <= kappa(|x-y|), kappa concave
    double drift_w1_constant = 1.0;       ///< |b(x,m)-b(x,n)| <= c W1(m,n)
    std::string rho_label;
    std::string kappa_label;
};

/// Drift b(t,x,mu) and diffusion s(t,x,mu) on R^d together with their
/// declared regularity constants. Immutable once built; evaluators are pure.
class CoefficientModel {
public:
    using Freezer = std::function<FrozenCoefficients(double t, const EmpiricalMeasure& mu)>;

    struct Declared {
        double growth_C = 0.0;
        std::optional<double> lipschitz_L;
        HypothesisFamily family = HypothesisFamily::Lipschitz;
        std::optional<ModulusSpec> modulus;
        /// bound applied to the diffusion, when the model caps it
        std::optional<double> cap;
    };

    CoefficientModel(std::string label, std::size_t dim, Freezer freezer, Declared declared,
                     std::map<std::string, double> params = {});

    [[nodiscard]] const std::string& label() const noexcept { return label_; }
    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] double growth_C() const noexcept { return declared_.growth_C; }
    [[nodiscard]] const std::optional<double>& lipschitz_L() const noexcept { return declared_.lipschitz_L; }
    [[nodiscard]] HypothesisFamily family() const noexcept { return declared_.family; }
    [[nodiscard]] const std::optional<ModulusSpec>& modulus() const noexcept { return declared_.modulus; }
    [[nodiscard]] const std::optional<double>& cap() const noexcept { return declared_.cap; }
    [[nodiscard]] const std::map<std::string, double>& params() const noexcept { return params_; }

    /// The returned object owns everything it needs; mu may go away.
    [[nodiscard]] FrozenCoefficients freeze(double t, const EmpiricalMeasure& mu) const;

    [[nodiscard]] std::vector<double> drift(double t, std::span<const double> x, const EmpiricalMeasure& mu) const;
    [[nodiscard]] std::vector<double> diffusion(double t, std::span<const double> x,
                                                const EmpiricalMeasure& mu) const;

private:
    std::string label_;
    std::size_t dim_;
    Freezer freezer_;
    Declared declared_;
    std::map<std::string, double> params_;
};

// ---------------------------------------------------------------------------
// Model zoo

/// b = 0, s = 0.
CoefficientModel make_zero_model(std::size_t dim = 1);

/// b = drift (constant vector), s = sigma * I.
CoefficientModel make_constant_model(std::vector<double> drift, double sigma);

/// b = rate * x, s = sigma * I (no interaction).
CoefficientModel make_linear_model(std::size_t dim, double rate, double sigma);

/// b(t,x,mu) = theta (mean(mu) - x), s = sigma0 * I.
CoefficientModel make_mean_field_ou(double theta, double sigma0, std::size_t dim = 1);

/// Scalar test map with its declared Lipschitz constant.
struct ScalarFunctional {
    std::function<double(std::span<const double>)> f;
    std::optional<double> lipschitz;
};

/// Coefficients that see the law only through m_b = \int phi dmu and
/// m_s = \int psi dmu:
///   b(t,x,mu) = drift_base(t, x, m_b),  s(t,x,mu) = diffusion_base(t, x, m_s).
/// Every constant is required; the overall Lipschitz constant is the base
/// constant times max(1, functional constant), maximised over b and s.
struct LinearFunctionalSpec {
    std::string label = "linear_functional";
    std::size_t dim = 1;
    std::function<void(double t, std::span<const double> x, double m, std::span<double> out)> drift_base;
    std::optional<double> drift_lipschitz;
    std::function<void(double t, std::span<const double> x, double m, std::span<double> out)> diffusion_base;
    std::optional<double> diffusion_lipschitz;
    ScalarFunctional phi;
    ScalarFunctional psi;
    std::optional<double> growth_C;
};

CoefficientModel make_linear_functional(LinearFunctionalSpec spec);

/// Bounded linear-functional model used by the CLI:
///   b = theta (\int tanh dmu - x),  s = sigma0 + sigma1 \int tanh dmu  (d = 1).
CoefficientModel make_tanh_functional_model(double theta, double sigma0, double sigma1);

/// d = 1, s(x) = min(sqrt|x|, cap), b(t,x,mu) = -x + mean(mu).
/// Moduli rho(u) = sqrt(u), kappa(u) = u; drift is 1-Lipschitz in W1.
CoefficientModel make_osgood_example(double cap);

/// Builds a zoo model from its label and a parameter map; unknown labels or
/// parameters raise InvalidArgument naming the offender.
CoefficientModel make_model(const std::string& label, const std::map<std::string, double>& params);

/// Labels make_model accepts, with the default value of each parameter.
const std::map<std::string, std::map<std::string, double>>& model_catalog();

// ---------------------------------------------------------------------------
// Hypothesis spot checks

struct Probe {
    double t = 0.0;
    Point x;
    EmpiricalMeasure mu;
};

struct ProbePair {
    Probe a;
    Probe b;
};

struct ProbeSet {
    std::vector<Probe> points;
    std::vector<ProbePair> pairs;
};

/// Seeded probes: random (t, x, mu) with mu a 4-point cloud, random pairs,
/// state-only pairs, law-only pairs and state pairs approaching the origin.
ProbeSet make_probes(std::size_t dim, std::uint64_t seed, std::size_t count = 64, double horizon = 1.0);

struct HypothesisCheck {
    std::string name;
    double observed = 0.0;
    double bound = 0.0;
    bool passed = false;
    bool required = false;  ///< part of the model's declared family
};

struct ValidationReport {
    std::string model_label;
    HypothesisFamily family = HypothesisFamily::Lipschitz;
    std::vector<HypothesisCheck> checks;
    double growth_ratio = 0.0;
    double lipschitz_ratio = 0.0;
    bool passed = false;  ///< every required check passed

    [[nodiscard]] const HypothesisCheck* find(const std::string& name) const;
};

ValidationReport validate_hypotheses(const CoefficientModel& model, const ProbeSet& probes);

// ---------------------------------------------------------------------------
// Control cost

/// Running cost h(t,x,mu,a) and terminal cost g(x,mu), frozen in the law the
/// same way coefficients are.
struct CostSpec {
    using Running = std::function<double(std::span<const double> x, double action)>;
    using Terminal = std::function<double(std::span<const double> x)>;

    std::function<Running(double t, const EmpiricalMeasure& mu)> running;
    std::function<Terminal(const EmpiricalMeasure& mu)> terminal;
    double bound = 0.0;  ///< declared bound on |h| and |g| over the probe domain
    std::string label;

    /// Law-independent h(t,x,a) and g(x).
    static CostSpec pointwise(std::function<double(double, std::span<const double>, double)> h,
                              std::function<double(std::span<const double>)> g, double bound,
                              std::string label);
};

/// Largest |h| or |g| seen on the probes for the given actions.
double max_abs_cost(const CostSpec& cost, const ProbeSet& probes, std::span<const double> actions);

}  // namespace mvsde
