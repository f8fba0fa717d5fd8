// SPDX-License-Identifier: Apache-2.0
#include "mvsde_lab/run.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>

#include "mvsde/control.hpp"
#include "mvsde/error.hpp"
#include "mvsde/format.hpp"
#include "mvsde/model.hpp"
#include "mvsde/parallel.hpp"
#include "mvsde/sde.hpp"
#include "mvsde/stability.hpp"

#ifndef MVSDE_VERSION
#define MVSDE_VERSION "0.0.0"
#endif

namespace mvsde::lab {
namespace fs = std::filesystem;

namespace {

struct IoFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Collects emitted files so the manifest can list every one of them.
class Outputs {
public:
    explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

    void write(const std::string& name, const std::string& bytes) {
        const fs::path path = dir_ / name;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.close();
        if (!out) throw IoFailure("cannot write " + path.string());
        files_.push_back({{"name", name}, {"bytes", bytes.size()}});
    }

    void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

    [[nodiscard]] const json& files() const noexcept { return files_; }
    [[nodiscard]] const fs::path& dir() const noexcept { return dir_; }

private:
    fs::path dir_;
    json files_ = json::array();
};

struct Context {
    const json& config;
    Outputs& outputs;
    json metrics = json::object();

    [[nodiscard]] const json& block() const { return config.at(config.at("command").get<std::string>()); }
    [[nodiscard]] TimeGrid grid() const {
        return {config.at("grid").at("T").get<double>(), config.at("grid").at("N").get<std::size_t>()};
    }
    [[nodiscard]] std::size_t particles() const { return config.at("mc").at("M").get<std::size_t>(); }
    [[nodiscard]] std::uint64_t seed() const { return config.at("mc").at("seed").get<std::uint64_t>(); }
    [[nodiscard]] CoefficientModel model() const {
        const json& m = config.at("model");
        return make_model(m.at("label").get<std::string>(), m.at("params").get<std::map<std::string, double>>());
    }
    [[nodiscard]] std::vector<double> x0() const { return block().at("x0").get<std::vector<double>>(); }
};

json report_json(const StabilityReport& r) {
    json config = json::object();
    for (const auto& [key, value] : r.config) config[key] = value;
    return {
        {"kind", r.kind},
        {"perturbation_sizes", r.perturbation_sizes},
        {"errors", r.errors},
        {"mc_std", r.mc_std},
        {"slope", std::isfinite(r.slope) ? json(r.slope) : json(nullptr)},
        {"slope_axis", r.slope_axis},
        {"config", config},
    };
}

std::string stability_csv(const StabilityReport& r) {
    std::ostringstream out;
    out << "size,error,std\n";
    for (std::size_t j = 0; j < r.errors.size(); ++j) {
        out << format_double(r.perturbation_sizes[j]) << ',' << format_double(r.errors[j]) << ','
            << format_double(r.mc_std[j]) << '\n';
    }
    return out.str();
}

void emit_stability(Context& ctx, const StabilityReport& r) {
    ctx.outputs.write("stability.csv", stability_csv(r));
    ctx.outputs.write_json("report.json", report_json(r));
    ctx.metrics["slope"] = std::isfinite(r.slope) ? json(r.slope) : json(nullptr);
    ctx.metrics["slope_axis"] = r.slope_axis;
}

std::string law_summary_csv(const ParticleSystem& ps) {
    std::ostringstream out;
    out << "node,t";
    for (std::size_t c = 0; c < ps.dim(); ++c) out << ",mean" << c + 1;
    out << ",rms\n";
    for (std::size_t k = 0; k < ps.nodes(); ++k) {
        const auto mu = ps.cross_section(k);
        out << k << ',' << format_double(ps.grid().node(k));
        for (double m : mu.mean()) out << ',' << format_double(m);
        out << ',' << format_double(mu.second_moment_root()) << '\n';
    }
    return out.str();
}

void run_simulate(Context& ctx) {
    const auto model = ctx.model();
    const auto grid = ctx.grid();
    const auto noise = generate_noise(ctx.seed(), ctx.particles(), grid, model.dim());
    const auto ps = euler_particles(model, ctx.x0(), grid, noise);
    if (ctx.block().at("paths_csv").get<bool>()) {
        std::ostringstream csv;
        write_csv(csv, ps);
        ctx.outputs.write("paths.csv", csv.str());
    }
    if (ctx.block().at("binary").get<bool>()) {
        std::ostringstream bin(std::ios::binary);
        write_binary(bin, ps);
        ctx.outputs.write("paths.bin", bin.str());
    }
    ctx.outputs.write("laws.csv", law_summary_csv(ps));
    const auto final_law = ps.cross_section(grid.steps());
    json report = {
        {"model", model.label()},
        {"max_norm", ps.max_norm()},
        {"final_mean", final_law.mean()},
        {"final_rms", final_law.second_moment_root()},
    };
    ctx.outputs.write_json("report.json", report);
    ctx.metrics["max_norm"] = ps.max_norm();
    ctx.metrics["final_mean"] = final_law.mean();
}

void run_picard(Context& ctx) {
    const auto model = ctx.model();
    const auto grid = ctx.grid();
    const auto noise = generate_noise(ctx.seed(), ctx.particles(), grid, model.dim());
    const auto& block = ctx.block();
    const auto result = picard_solve(model, ctx.x0(), grid, noise, block.at("iterations").get<std::size_t>(),
                                     block.at("tol").get<double>());
    std::ostringstream csv;
    csv << "iteration,sup_w2\n";
    for (std::size_t k = 0; k < result.dists.size(); ++k) csv << k << ',' << format_double(result.dists[k]) << '\n';
    ctx.outputs.write("dists.csv", csv.str());

    json report = {{"model", model.label()}, {"dists", result.dists}, {"iterations", result.dists.size()}};
    ctx.metrics["final_dist"] = result.dists.back();
    ctx.metrics["iterations"] = result.dists.size();
    if (block.at("compare_particles").get<bool>()) {
        const auto ps = euler_particles(model, ctx.x0(), grid, noise);
        const double gap = sup_w2(result.flows.back(), law_flow(ps), ctx.seed());
        report["sup_w2_vs_particles"] = gap;
        ctx.metrics["sup_w2_vs_particles"] = gap;
    }
    ctx.outputs.write_json("report.json", report);
}

void run_stability_init(Context& ctx) {
    const auto deltas = ctx.block().at("deltas").get<std::vector<double>>();
    emit_stability(ctx, stability_initial(ctx.model(), ctx.x0(), deltas, ctx.grid(), ctx.particles(), ctx.seed()));
}

CoefficientBumps scaled(CoefficientBumps bumps, double scale) {
    if (scale == 1.0) return bumps;
    auto scale_into = [scale](auto f) {
        return [f, scale](std::span<const double> x, std::span<double> out) {
            f(x, out);
            for (double& v : out) v *= scale;
        };
    };
    bumps.drift_bump = scale_into(bumps.drift_bump);
    bumps.diffusion_bump = scale_into(bumps.diffusion_bump);
    bumps.lipschitz *= scale;
    bumps.bound *= scale;
    bumps.label += " scaled by " + format_double(scale);
    return bumps;
}

void run_stability_coeff(Context& ctx) {
    const auto model = ctx.model();
    const auto& block = ctx.block();
    const auto epsilons = block.at("epsilons").get<std::vector<double>>();
    const double scale = block.at("scale").get<double>();
    const auto bumps = block.at("bump").get<std::string>() == "tanh"
                           ? scaled(CoefficientBumps::tanh_bumps(model.dim()), scale)
                           : CoefficientBumps::constant_drift(model.dim(), scale);
    emit_stability(ctx, stability_coefficients(model, ctx.x0(), epsilons, ctx.grid(), ctx.particles(), ctx.seed(),
                                               bumps));
}

void run_stability_driver(Context& ctx) {
    std::vector<std::int64_t> n_list;
    for (const auto& n : ctx.block().at("n")) {
        n_list.push_back(n.is_string() ? kExactDriver : n.get<std::int64_t>());
    }
    emit_stability(ctx, stability_drivers(ctx.model(), ctx.x0(), n_list, ctx.grid(), ctx.particles(), ctx.seed()));
}

json estimate_json(const CostEstimate& e) { return {{"value", e.value}, {"std_error", e.std_error}}; }

void run_control_compare(Context& ctx) {
    const auto& block = ctx.block();
    const auto grid = ctx.grid();
    const auto ex = make_bang_bang_example(block.at("theta").get<double>(), block.at("sigma0").get<double>(),
                                           grid.steps(), grid.horizon(),
                                           block.at("subs").get<std::vector<std::size_t>>());
    const auto report = compare_values(ex.model, ex.actions, ex.cost, ex.strict_family, ex.relaxed_family,
                                       ex.chatter_subs, ex.x0, ex.grid, ctx.seed(), ctx.particles());

    std::ostringstream values;
    values << "family,label,value,std_error\n";
    json strict = json::array();
    json relaxed = json::array();
    for (std::size_t i = 0; i < report.strict_costs.size(); ++i) {
        values << "strict," << report.strict_labels[i] << ',' << format_double(report.strict_costs[i].value) << ','
               << format_double(report.strict_costs[i].std_error) << '\n';
        json e = estimate_json(report.strict_costs[i]);
        e["label"] = report.strict_labels[i];
        strict.push_back(e);
    }
    std::ostringstream chatter;
    chatter << "relaxed,sub,value,std_error,gap,gap_std\n";
    for (std::size_t i = 0; i < report.relaxed_costs.size(); ++i) {
        values << "relaxed," << report.relaxed_labels[i] << ',' << format_double(report.relaxed_costs[i].value)
               << ',' << format_double(report.relaxed_costs[i].std_error) << '\n';
        json e = estimate_json(report.relaxed_costs[i]);
        e["label"] = report.relaxed_labels[i];
        json levels = json::array();
        for (const auto& level : report.chattered[i]) {
            chatter << report.relaxed_labels[i] << ',' << level.sub << ',' << format_double(level.estimate.value)
                    << ',' << format_double(level.estimate.std_error) << ',' << format_double(level.gap) << ','
                    << format_double(level.gap_std) << '\n';
            json l = estimate_json(level.estimate);
            l["sub"] = level.sub;
            l["gap"] = level.gap;
            l["gap_std"] = level.gap_std;
            levels.push_back(l);
        }
        e["chattering"] = levels;
        relaxed.push_back(e);
    }
    ctx.outputs.write("values.csv", values.str());
    ctx.outputs.write("chattering.csv", chatter.str());
    ctx.outputs.write_json("report.json", {
                                              {"example", "bang_bang"},
                                              {"simulation_steps", report.simulation_steps},
                                              {"strict", strict},
                                              {"relaxed", relaxed},
                                              {"best_strict", report.strict_labels[report.best_strict]},
                                              {"best_relaxed", report.relaxed_labels[report.best_relaxed]},
                                              {"min_strict", report.min_strict},
                                              {"min_relaxed", report.min_relaxed},
                                              {"value_gap", report.value_gap},
                                              {"value_gap_std", report.value_gap_std},
                                          });
    ctx.metrics["value_gap"] = report.value_gap;
    ctx.metrics["value_gap_std"] = report.value_gap_std;
    ctx.metrics["min_strict"] = report.min_strict;
    ctx.metrics["min_relaxed"] = report.min_relaxed;
}

void run_osgood_demo(Context& ctx) {
    const auto grid = ctx.grid();
    const auto x0 = ctx.x0();
    const double gap = ctx.block().at("gap").get<double>();
    const auto noise = generate_noise(ctx.seed(), ctx.particles(), grid, 1);
    const auto first = euler_particles(ctx.model(), x0, grid, noise);
    // A second, independently built model instance on the same noise.
    const auto again = euler_particles(ctx.model(), x0, grid, noise);
    auto shifted = x0;
    shifted[0] += gap;
    const auto perturbed = euler_particles(ctx.model(), shifted, grid, noise);

    std::ostringstream csv;
    csv << "node,t,mean_abs_gap,max_abs_gap\n";
    std::vector<double> sup_gap(first.particles(), 0.0);
    for (std::size_t k = 0; k < first.nodes(); ++k) {
        double sum = 0.0;
        double worst = 0.0;
        for (std::size_t i = 0; i < first.particles(); ++i) {
            const double g = std::abs(perturbed.state(i, k)[0] - first.state(i, k)[0]);
            sum += g;
            worst = std::max(worst, g);
            sup_gap[i] = std::max(sup_gap[i], g);
        }
        csv << k << ',' << format_double(grid.node(k)) << ',' << format_double(sum / static_cast<double>(first.particles()))
            << ',' << format_double(worst) << '\n';
    }
    double mean_sup = 0.0;
    for (double g : sup_gap) mean_sup += g;
    mean_sup /= static_cast<double>(sup_gap.size());
    const bool coalesced = first == again;

    ctx.outputs.write("gap.csv", csv.str());
    ctx.outputs.write_json("report.json", {
                                              {"model", first.model_label()},
                                              {"x0_gap", gap},
                                              {"mean_sup_abs_gap", mean_sup},
                                              {"identical_start_coincides", coalesced},
                                          });
    ctx.metrics["mean_sup_abs_gap"] = mean_sup;
    ctx.metrics["identical_start_coincides"] = coalesced;
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

std::string_view toolkit_version() noexcept { return MVSDE_VERSION; }

int run_config(const json& normalized, const fs::path& output_dir, std::ostream& err) {
    const std::string command = normalized.at("command").get<std::string>();
    const auto started = std::chrono::steady_clock::now();
    const std::string started_utc = utc_now();
    try {
        fs::create_directories(output_dir);
        // A stale manifest would vouch for outputs this run may not finish.
        fs::remove(output_dir / "manifest.json");
        Outputs outputs(output_dir);
        Context ctx{normalized, outputs};
        if (command == "simulate") {
            run_simulate(ctx);
        } else if (command == "picard") {
            run_picard(ctx);
        } else if (command == "stability-init") {
            run_stability_init(ctx);
        } else if (command == "stability-coeff") {
            run_stability_coeff(ctx);
        } else if (command == "stability-driver") {
            run_stability_driver(ctx);
        } else if (command == "control-compare") {
            run_control_compare(ctx);
        } else if (command == "osgood-demo") {
            run_osgood_demo(ctx);
        } else {
            err << "ConfigInvalid: $.command: unknown command '" << command << "'\n";
            return kConfigInvalid;
        }
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
        json manifest = {
            {"toolkit", "mvsde"},
            {"version", std::string(toolkit_version())},
            {"command", command},
            {"config", normalized},
            {"seed", normalized.at("mc").at("seed")},
            {"started_utc", started_utc},
            {"wall_clock_seconds", elapsed.count()},
            {"worker_count", worker_count()},
            {"files", outputs.files()},
            {"metrics", ctx.metrics},
        };
        const fs::path path = output_dir / "manifest.json";
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << manifest.dump(2) << '\n';
        out.close();
        if (!out) throw IoFailure("cannot write " + path.string());
        return kOk;
    } catch (const IoFailure& e) {
        err << "IoError: " << e.what() << '\n';
        return kIoError;
    } catch (const fs::filesystem_error& e) {
        err << "IoError: " << e.what() << '\n';
        return kIoError;
    } catch (const NonFiniteStateError& e) {
        err << "SolverFailure: " << e.what() << '\n';
        return kSolverFailure;
    } catch (const Error& e) {
        if (e.code() == Errc::IoError) {
            err << "IoError: " << e.what() << '\n';
            return kIoError;
        }
        err << "SolverFailure: " << e.what() << '\n';
        return kSolverFailure;
    }
}

int run(const fs::path& config_path, const std::optional<fs::path>& output_dir, std::ostream& err) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) {
        err << "IoError: cannot read config " << config_path.string() << '\n';
        return kIoError;
    }
    std::ostringstream text;
    text << in.rdbuf();
    const auto parsed = parse_config_text(text.str());
    if (!parsed.diagnostics.empty()) {
        for (const auto& d : parsed.diagnostics) err << "ConfigInvalid: " << to_string(d) << '\n';
        return kConfigInvalid;
    }
    const auto checked = check_config(parsed.document);
    if (!checked.ok()) {
        for (const auto& d : checked.diagnostics) err << "ConfigInvalid: " << to_string(d) << '\n';
        return kConfigInvalid;
    }
    json normalized = checked.normalized;
    const fs::path dir = output_dir ? *output_dir : fs::path(normalized.at("output_dir").get<std::string>());
    normalized["output_dir"] = dir.string();
    return run_config(normalized, dir, err);
}

}  // namespace mvsde::lab
