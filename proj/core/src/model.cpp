// SPDX-License-Identifier: Apache-2.0
#include "mvsde/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mvsde/error.hpp"
#include "mvsde/rng.hpp"

namespace mvsde {
namespace {

constexpr double kCheckRelTol = 1e-8;
constexpr double kCheckAbsTol = 1e-12;

double norm(std::span<const double> v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    return std::sqrt(sq);
}

double distance(std::span<const double> a, std::span<const double> b) {
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(sq);
}

void set_identity(std::span<double> out, std::size_t dim, double scale) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t c = 0; c < dim; ++c) out[c * dim + c] = scale;
}

void require_nonnegative(double value, const char* name) {
    if (!(value >= 0.0)) throw Error(Errc::NegativeParameter, std::string(name) + " must be >= 0");
}

bool within(double observed, double bound) {
    return observed <= bound * (1.0 + kCheckRelTol) + kCheckAbsTol;
}

}  // namespace

std::string to_string(HypothesisFamily family) {
    return family == HypothesisFamily::Lipschitz ? "H1+H2" : "H1+H4-H6";
}

CoefficientModel::CoefficientModel(std::string label, std::size_t dim, Freezer freezer, Declared declared,
                                   std::map<std::string, double> params)
    : label_(std::move(label)),
      dim_(dim),
      freezer_(std::move(freezer)),
      declared_(std::move(declared)),
      params_(std::move(params)) {
    if (dim_ == 0) throw Error(Errc::DimensionMismatch, "model dimension must be positive");
    if (!freezer_) throw Error(Errc::MissingConstants, "model has no evaluator");
    if (declared_.family == HypothesisFamily::Osgood && !declared_.modulus) {
        throw Error(Errc::MissingConstants, "Osgood-family model needs a ModulusSpec");
    }
}

FrozenCoefficients CoefficientModel::freeze(double t, const EmpiricalMeasure& mu) const {
    if (mu.dim() != dim_) throw Error(Errc::DimensionMismatch, "law dimension does not match model");
    return freezer_(t, mu);
}

std::vector<double> CoefficientModel::drift(double t, std::span<const double> x, const EmpiricalMeasure& mu) const {
    std::vector<double> out(dim_);
    freeze(t, mu).drift(x, out);
    return out;
}

std::vector<double> CoefficientModel::diffusion(double t, std::span<const double> x,
                                                const EmpiricalMeasure& mu) const {
    std::vector<double> out(dim_ * dim_);
    freeze(t, mu).diffusion(x, out);
    return out;
}

// ---------------------------------------------------------------------------

CoefficientModel make_zero_model(std::size_t dim) {
    auto freezer = [dim](double, const EmpiricalMeasure&) {
        FrozenCoefficients fc;
        fc.drift = [](std::span<const double>, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); };
        fc.diffusion = [](std::span<const double>, std::span<double> out) {
            std::fill(out.begin(), out.end(), 0.0);
        };
        (void)dim;
        return fc;
    };
    return CoefficientModel("zero", dim, freezer, {.growth_C = 0.0, .lipschitz_L = 0.0});
}

CoefficientModel make_constant_model(std::vector<double> drift, double sigma) {
    const std::size_t dim = drift.size();
    if (dim == 0) throw Error(Errc::DimensionMismatch, "constant model needs a drift vector");
    require_nonnegative(sigma, "sigma");
    const double growth = norm(drift) + sigma * std::sqrt(static_cast<double>(dim));
    auto freezer = [drift, sigma, dim](double, const EmpiricalMeasure&) {
        FrozenCoefficients fc;
        fc.drift = [drift](std::span<const double>, std::span<double> out) {
            std::copy(drift.begin(), drift.end(), out.begin());
        };
        fc.diffusion = [sigma, dim](std::span<const double>, std::span<double> out) {
            set_identity(out, dim, sigma);
        };
        return fc;
    };
    std::map<std::string, double> params{{"sigma", sigma}};
    for (std::size_t c = 0; c < dim; ++c) params["b" + std::to_string(c)] = drift[c];
    return CoefficientModel("constant", dim, freezer, {.growth_C = growth, .lipschitz_L = 0.0}, params);
}

CoefficientModel make_linear_model(std::size_t dim, double rate, double sigma) {
    require_nonnegative(sigma, "sigma");
    auto freezer = [rate, sigma, dim](double, const EmpiricalMeasure&) {
        FrozenCoefficients fc;
        fc.drift = [rate](std::span<const double> x, std::span<double> out) {
            for (std::size_t c = 0; c < x.size(); ++c) out[c] = rate * x[c];
        };
        fc.diffusion = [sigma, dim](std::span<const double>, std::span<double> out) {
            set_identity(out, dim, sigma);
        };
        return fc;
    };
    const double growth = std::abs(rate) + sigma * std::sqrt(static_cast<double>(dim));
    return CoefficientModel("linear", dim, freezer, {.growth_C = growth, .lipschitz_L = std::abs(rate)},
                            {{"rate", rate}, {"sigma", sigma}});
}

CoefficientModel make_mean_field_ou(double theta, double sigma0, std::size_t dim) {
    require_nonnegative(theta, "theta");
    require_nonnegative(sigma0, "sigma0");
    auto freezer = [theta, sigma0, dim](double, const EmpiricalMeasure& mu) {
        FrozenCoefficients fc;
        fc.drift = [theta, m = mu.mean()](std::span<const double> x, std::span<double> out) {
            for (std::size_t c = 0; c < x.size(); ++c) out[c] = theta * (m[c] - x[c]);
        };
        fc.diffusion = [sigma0, dim](std::span<const double>, std::span<double> out) {
            set_identity(out, dim, sigma0);
        };
        return fc;
    };
    // |mean(mu) - mean(nu)| <= W1 <= W2, so theta bounds both slots.
    const double lipschitz = std::max(theta, theta);
    const double growth = theta + sigma0 * std::sqrt(static_cast<double>(dim));
    return CoefficientModel("mean_field_ou", dim, freezer, {.growth_C = growth, .lipschitz_L = lipschitz},
                            {{"theta", theta}, {"sigma0", sigma0}});
}

CoefficientModel make_linear_functional(LinearFunctionalSpec spec) {
    if (!spec.drift_base || !spec.diffusion_base || !spec.phi.f || !spec.psi.f) {
        throw Error(Errc::MissingConstants, "linear-functional model needs b0, s0, phi and psi");
    }
    if (!spec.drift_lipschitz || !spec.diffusion_lipschitz || !spec.phi.lipschitz || !spec.psi.lipschitz ||
        !spec.growth_C) {
        throw Error(Errc::MissingConstants, "linear-functional model needs every declared constant");
    }
    const double lipschitz = std::max(*spec.drift_lipschitz * std::max(1.0, *spec.phi.lipschitz),
                                      *spec.diffusion_lipschitz * std::max(1.0, *spec.psi.lipschitz));
    auto freezer = [drift = spec.drift_base, diffusion = spec.diffusion_base, phi = spec.phi.f,
                    psi = spec.psi.f](double t, const EmpiricalMeasure& mu) {
        const double m_drift = integrate_scalar(mu, phi);
        const double m_diffusion = integrate_scalar(mu, psi);
        FrozenCoefficients fc;
        fc.drift = [drift, t, m_drift](std::span<const double> x, std::span<double> out) {
            drift(t, x, m_drift, out);
        };
        fc.diffusion = [diffusion, t, m_diffusion](std::span<const double> x, std::span<double> out) {
            diffusion(t, x, m_diffusion, out);
        };
        return fc;
    };
    return CoefficientModel(spec.label, spec.dim, freezer,
                            {.growth_C = *spec.growth_C, .lipschitz_L = lipschitz});
}

CoefficientModel make_tanh_functional_model(double theta, double sigma0, double sigma1) {
    require_nonnegative(theta, "theta");
    require_nonnegative(sigma0, "sigma0");
    LinearFunctionalSpec spec;
    spec.label = "tanh_functional";
    spec.dim = 1;
    spec.drift_base = [theta](double, std::span<const double> x, double m, std::span<double> out) {
        out[0] = theta * (m - x[0]);
    };
    spec.drift_lipschitz = theta;
    spec.diffusion_base = [sigma0, sigma1](double, std::span<const double>, double m, std::span<double> out) {
        out[0] = sigma0 + sigma1 * m;
    };
    spec.diffusion_lipschitz = std::abs(sigma1);
    spec.phi = {[](std::span<const double> y) { return std::tanh(y[0]); }, 1.0};
    spec.psi = {[](std::span<const double> y) { return std::tanh(y[0]); }, 1.0};
    // |m| <= 1, so |b| <= theta (1 + |x|) and |s| <= sigma0 + |sigma1|.
    spec.growth_C = theta + sigma0 + std::abs(sigma1);
    auto model = make_linear_functional(std::move(spec));
    return CoefficientModel(model.label(), 1,
                            [model](double t, const EmpiricalMeasure& mu) { return model.freeze(t, mu); },
                            {.growth_C = model.growth_C(), .lipschitz_L = model.lipschitz_L()},
                            {{"theta", theta}, {"sigma0", sigma0}, {"sigma1", sigma1}});
}

CoefficientModel make_osgood_example(double cap) {
    if (!(cap > 0.0)) throw Error(Errc::NegativeParameter, "Osgood cap K must be > 0");
    auto freezer = [cap](double, const EmpiricalMeasure& mu) {
        FrozenCoefficients fc;
        fc.drift = [m = mu.mean()[0]](std::span<const double> x, std::span<double> out) { out[0] = -x[0] + m; };
        fc.diffusion = [cap](std::span<const double> x, std::span<double> out) {
            out[0] = std::min(std::sqrt(std::abs(x[0])), cap);
        };
        return fc;
    };
    ModulusSpec modulus;
    modulus.rho = [](double u) { return std::sqrt(u); };
    modulus.kappa = [](double u) { return u; };
    modulus.drift_w1_constant = 1.0;
    modulus.rho_label = "sqrt(u)";
    modulus.kappa_label = "u";
    CoefficientModel::Declared declared{.growth_C = 1.0 + cap,
                                        .lipschitz_L = std::nullopt,
                                        .family = HypothesisFamily::Osgood,
                                        .modulus = modulus,
                                        .cap = cap};
    return CoefficientModel("osgood", 1, freezer, declared, {{"cap", cap}});
}

const std::map<std::string, std::map<std::string, double>>& model_catalog() {
    static const std::map<std::string, std::map<std::string, double>> catalog{
        {"zero", {{"dim", 1.0}}},
        {"constant", {{"b", 0.0}, {"sigma", 0.0}}},
        {"linear", {{"dim", 1.0}, {"rate", -1.0}, {"sigma", 0.0}}},
        {"mean_field_ou", {{"dim", 1.0}, {"theta", 1.0}, {"sigma0", 0.3}}},
        {"tanh_functional", {{"theta", 1.0}, {"sigma0", 0.3}, {"sigma1", 0.1}}},
        {"osgood", {{"cap", 2.0}}},
    };
    return catalog;
}

CoefficientModel make_model(const std::string& label, const std::map<std::string, double>& params) {
    const auto& catalog = model_catalog();
    const auto entry = catalog.find(label);
    if (entry == catalog.end()) throw Error(Errc::InvalidArgument, "unknown model label '" + label + "'");
    std::map<std::string, double> p = entry->second;
    for (const auto& [key, value] : params) {
        if (!p.contains(key)) {
            throw Error(Errc::InvalidArgument, "model '" + label + "' has no parameter '" + key + "'");
        }
        p[key] = value;
    }
    auto dim_of = [&]() {
        const double d = p.at("dim");
        if (!(d >= 1.0) || d != std::floor(d)) throw Error(Errc::InvalidArgument, "dim must be a positive integer");
        return static_cast<std::size_t>(d);
    };
    if (label == "zero") return make_zero_model(dim_of());
    if (label == "constant") return make_constant_model({p.at("b")}, p.at("sigma"));
    if (label == "linear") return make_linear_model(dim_of(), p.at("rate"), p.at("sigma"));
    if (label == "mean_field_ou") return make_mean_field_ou(p.at("theta"), p.at("sigma0"), dim_of());
    if (label == "tanh_functional") {
        return make_tanh_functional_model(p.at("theta"), p.at("sigma0"), p.at("sigma1"));
    }
    return make_osgood_example(p.at("cap"));
}

// ---------------------------------------------------------------------------

namespace {

EmpiricalMeasure random_cloud(rng::Stream& stream, std::size_t dim, std::size_t size, double spread) {
    std::vector<double> flat(dim * size);
    for (double& v : flat) v = spread * stream.normal();
    return EmpiricalMeasure::uniform(std::move(flat), dim);
}

Point random_point(rng::Stream& stream, std::size_t dim, double half_width) {
    Point x(dim);
    for (double& v : x) v = stream.uniform(-half_width, half_width);
    return x;
}

}  // namespace

ProbeSet make_probes(std::size_t dim, std::uint64_t seed, std::size_t count, double horizon) {
    if (dim == 0 || count == 0) throw Error(Errc::InvalidArgument, "probe set must be nonempty");
    constexpr std::size_t kCloud = 4;
    constexpr double kHalfWidth = 3.0;
    rng::Stream stream(seed, 0x50524F42u);
    ProbeSet probes;
    for (std::size_t i = 0; i < count; ++i) {
        const double t = stream.uniform(0.0, horizon);
        probes.points.push_back({t, random_point(stream, dim, kHalfWidth), random_cloud(stream, dim, kCloud, 1.5)});
    }
    for (std::size_t i = 0; i < count; ++i) {
        const double t = stream.uniform(0.0, horizon);
        auto mu = random_cloud(stream, dim, kCloud, 1.5);
        auto nu = random_cloud(stream, dim, kCloud, 1.5);
        // fully random pair
        probes.pairs.push_back({{t, random_point(stream, dim, kHalfWidth), mu},
                                {t, random_point(stream, dim, kHalfWidth), nu}});
        // state-only pair
        auto x = random_point(stream, dim, kHalfWidth);
        probes.pairs.push_back({{t, x, mu}, {t, random_point(stream, dim, kHalfWidth), mu}});
        // law-only pair
        probes.pairs.push_back({{t, x, mu}, {t, x, nu}});
    }
    // state pairs (0, u e1) squeezing towards the origin
    const auto mu0 = random_cloud(stream, dim, kCloud, 1.5);
    for (int k = 1; k <= 8; ++k) {
        Point origin(dim, 0.0);
        Point near = origin;
        near[0] = std::pow(10.0, -k);
        probes.pairs.push_back({{0.0, origin, mu0}, {0.0, near, mu0}});
    }
    return probes;
}

const HypothesisCheck* ValidationReport::find(const std::string& name) const {
    for (const auto& c : checks) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

ValidationReport validate_hypotheses(const CoefficientModel& model, const ProbeSet& probes) {
    if (probes.points.empty()) throw Error(Errc::InvalidArgument, "probe set must be nonempty");
    const std::size_t d = model.dim();
    std::vector<double> b(d), b2(d), s(d * d), s2(d * d);

    auto eval = [&](const Probe& p, std::span<double> drift, std::span<double> diffusion) {
        const auto fc = model.freeze(p.t, p.mu);
        fc.drift(p.x, drift);
        fc.diffusion(p.x, diffusion);
    };
    auto gap = [](std::span<const double> u, std::span<const double> v) { return distance(u, v); };

    ValidationReport report;
    report.model_label = model.label();
    report.family = model.family();

    // Growth, normalised by 1 + |x| + W2(mu, delta_0).
    double growth = 0.0;
    for (const auto& p : probes.points) {
        eval(p, b, s);
        growth = std::max(growth, (norm(b) + norm(s)) / (1.0 + norm(p.x) + p.mu.second_moment_root()));
    }
    report.growth_ratio = growth;
    report.checks.push_back({"H1.growth", growth, model.growth_C(), within(growth, model.growth_C()), true});

    // Lipschitz in (x, W2) and the state-only slice for the diffusion.
    double lipschitz = 0.0;
    double sigma_state = 0.0;
    double drift_w1 = 0.0;
    double sigma_modulus = 0.0;
    double drift_modulus = 0.0;
    double sigma_law = 0.0;
    const auto& modulus = model.modulus();
    for (const auto& pair : probes.pairs) {
        eval(pair.a, b, s);
        eval(pair.b, b2, s2);
        const double dx = distance(pair.a.x, pair.b.x);
        const double w2 = wasserstein(2.0, pair.a.mu, pair.b.mu);
        const double db = gap(b, b2);
        const double ds = gap(s, s2);
        if (dx + w2 > 0.0) lipschitz = std::max(lipschitz, std::max(db, ds) / (dx + w2));
        if (w2 == 0.0 && dx > 0.0) {
            sigma_state = std::max(sigma_state, ds / dx);
            if (modulus) {
                sigma_modulus = std::max(sigma_modulus, ds / modulus->rho(dx));
                drift_modulus = std::max(drift_modulus, db / modulus->kappa(dx));
            }
        }
        if (dx == 0.0 && w2 > 0.0) {
            drift_w1 = std::max(drift_w1, db / wasserstein(1.0, pair.a.mu, pair.b.mu));
            sigma_law = std::max(sigma_law, ds);
        }
    }
    report.lipschitz_ratio = lipschitz;

    const bool lipschitz_family = model.family() == HypothesisFamily::Lipschitz;
    const auto& declared_L = model.lipschitz_L();
    const double bound_L = declared_L.value_or(std::numeric_limits<double>::infinity());
    report.checks.push_back(
        {"H2.lipschitz", lipschitz, bound_L, declared_L.has_value() && within(lipschitz, bound_L), lipschitz_family});
    report.checks.push_back({"H2.sigma_state", sigma_state, bound_L,
                             declared_L.has_value() && within(sigma_state, bound_L), lipschitz_family});

    if (modulus) {
        const bool osgood = model.family() == HypothesisFamily::Osgood;
        report.checks.push_back({"H4.drift_w1", drift_w1, modulus->drift_w1_constant,
                                 within(drift_w1, modulus->drift_w1_constant), osgood});
        report.checks.push_back({"H5.sigma_modulus", sigma_modulus, 1.0, within(sigma_modulus, 1.0), osgood});
        report.checks.push_back({"H5.sigma_law_free", sigma_law, 0.0, sigma_law == 0.0, osgood});
        report.checks.push_back({"H6.drift_modulus", drift_modulus, 1.0, within(drift_modulus, 1.0), osgood});

        // rho(0) = kappa(0) = 0, strictly increasing, rho^2 convex, kappa concave on a grid.
        bool shape = modulus->rho(0.0) == 0.0 && modulus->kappa(0.0) == 0.0;
        constexpr int kGrid = 64;
        double prev_rho = 0.0;
        double prev_kappa = 0.0;
        for (int i = 1; i <= kGrid; ++i) {
            const double u = 4.0 * i / kGrid;
            const double r = modulus->rho(u);
            const double k = modulus->kappa(u);
            shape = shape && r > prev_rho && k > prev_kappa;
            if (i >= 2) {
                const double um = 4.0 * (i - 1) / kGrid;
                const double ul = 4.0 * (i - 2) / kGrid;
                const double r2 = r * r - 2.0 * modulus->rho(um) * modulus->rho(um) +
                                  modulus->rho(ul) * modulus->rho(ul);
                const double k2 = k - 2.0 * modulus->kappa(um) + modulus->kappa(ul);
                shape = shape && r2 >= -1e-12 && k2 <= 1e-12;
            }
            prev_rho = r;
            prev_kappa = k;
        }
        report.checks.push_back({"H5H6.modulus_shape", shape ? 0.0 : 1.0, 0.0, shape, osgood});
    }

    report.passed = std::all_of(report.checks.begin(), report.checks.end(),
                                [](const HypothesisCheck& c) { return !c.required || c.passed; });
    return report;
}

// ---------------------------------------------------------------------------

CostSpec CostSpec::pointwise(std::function<double(double, std::span<const double>, double)> h,
                             std::function<double(std::span<const double>)> g, double bound, std::string label) {
    CostSpec spec;
    spec.running = [h](double t, const EmpiricalMeasure&) -> Running {
        return [h, t](std::span<const double> x, double a) { return h(t, x, a); };
    };
    spec.terminal = [g](const EmpiricalMeasure&) -> Terminal { return g; };
    spec.bound = bound;
    spec.label = std::move(label);
    return spec;
}

double max_abs_cost(const CostSpec& cost, const ProbeSet& probes, std::span<const double> actions) {
    double worst = 0.0;
    for (const auto& p : probes.points) {
        const auto h = cost.running(p.t, p.mu);
        for (double a : actions) worst = std::max(worst, std::abs(h(p.x, a)));
        worst = std::max(worst, std::abs(cost.terminal(p.mu)(p.x)));
    }
    return worst;
}

}  // namespace mvsde
