// SPDX-License-Identifier: Apache-2.0
#include "mvsde_lab/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>

#include "mvsde/error.hpp"
#include "mvsde/model.hpp"

namespace mvsde::lab {
namespace {

using Diags = std::vector<Diagnostic>;

std::string type_name(const json& j) {
    if (j.is_number()) return "number";
    return j.type_name();
}

/// Reads typed fields out of one JSON object, recording diagnostics and the
/// normalized (defaults filled) copy; finish() flags whatever was not read.
class Block {
public:
    Block(const json* node, std::string path, Diags& diags) : path_(std::move(path)), diags_(diags) {
        if (node && !node->is_object()) {
            diags_.push_back({path_, "expected an object, got " + type_name(*node)});
        } else if (node) {
            node_ = node;
        }
        normalized = json::object();
    }

    [[nodiscard]] std::string at(const std::string& key) const { return path_ + "." + key; }
    [[nodiscard]] const std::string& path() const noexcept { return path_; }
    [[nodiscard]] bool has(const std::string& key) const { return node_ && node_->contains(key); }

    void error(const std::string& key, std::string message) { diags_.push_back({at(key), std::move(message)}); }

    const json* raw(const std::string& key) {
        seen_.push_back(key);
        if (!has(key)) return nullptr;
        return &node_->at(key);
    }

    std::optional<double> real(const std::string& key, std::optional<double> fallback) {
        const json* v = raw(key);
        if (!v) return missing(key, fallback);
        if (!v->is_number()) {
            error(key, "expected a number, got " + type_name(*v));
            return std::nullopt;
        }
        const double x = v->get<double>();
        if (!std::isfinite(x)) {
            error(key, "must be finite");
            return std::nullopt;
        }
        normalized[key] = x;
        return x;
    }

    std::optional<std::uint64_t> integer(const std::string& key, std::optional<std::uint64_t> fallback,
                                         std::uint64_t minimum) {
        const json* v = raw(key);
        if (!v) return missing(key, fallback);
        const auto value = as_integer(*v);
        if (!value) {
            error(key, "expected a nonnegative integer, got " + v->dump());
            return std::nullopt;
        }
        if (*value < minimum) {
            error(key, "must be >= " + std::to_string(minimum));
            return std::nullopt;
        }
        normalized[key] = *value;
        return value;
    }

    std::optional<std::string> text(const std::string& key, std::optional<std::string> fallback) {
        const json* v = raw(key);
        if (!v) return missing(key, fallback);
        if (!v->is_string()) {
            error(key, "expected a string, got " + type_name(*v));
            return std::nullopt;
        }
        normalized[key] = v->get<std::string>();
        return v->get<std::string>();
    }

    std::optional<bool> flag(const std::string& key, bool fallback) {
        const json* v = raw(key);
        if (!v) return missing(key, std::optional<bool>(fallback));
        if (!v->is_boolean()) {
            error(key, "expected true or false, got " + type_name(*v));
            return std::nullopt;
        }
        normalized[key] = v->get<bool>();
        return v->get<bool>();
    }

    std::optional<std::vector<double>> reals(const std::string& key, std::optional<std::vector<double>> fallback) {
        const json* v = raw(key);
        if (!v) return missing(key, fallback);
        if (!v->is_array()) {
            error(key, "expected an array of numbers, got " + type_name(*v));
            return std::nullopt;
        }
        std::vector<double> out;
        bool good = true;
        for (std::size_t i = 0; i < v->size(); ++i) {
            const json& e = (*v)[i];
            if (!e.is_number() || !std::isfinite(e.get<double>())) {
                diags_.push_back({at(key) + "[" + std::to_string(i) + "]", "expected a finite number"});
                good = false;
                continue;
            }
            out.push_back(e.get<double>());
        }
        if (!good) return std::nullopt;
        normalized[key] = out;
        return out;
    }

    /// Rejects every key that no reader asked for.
    void finish() {
        if (!node_) return;
        for (const auto& [key, value] : node_->items()) {
            if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) error(key, "unknown key");
        }
    }

    static std::optional<std::uint64_t> as_integer(const json& v) {
        if (v.is_number_unsigned()) return v.get<std::uint64_t>();
        if (v.is_number_integer()) {
            const auto i = v.get<std::int64_t>();
            if (i < 0) return std::nullopt;
            return static_cast<std::uint64_t>(i);
        }
        if (v.is_number_float()) {
            const double d = v.get<double>();
            if (d >= 0.0 && d == std::floor(d) && d < 9007199254740992.0) return static_cast<std::uint64_t>(d);
        }
        return std::nullopt;
    }

    json normalized;

private:
    template <class T>
    std::optional<T> missing(const std::string& key, std::optional<T> fallback) {
        if (!fallback) {
            error(key, "required key is missing");
            return std::nullopt;
        }
        normalized[key] = *fallback;
        return fallback;
    }

    const json* node_ = nullptr;
    std::string path_;
    Diags& diags_;
    std::vector<std::string> seen_;
};

struct ModelInfo {
    std::size_t dim = 1;
    bool lipschitz = false;
    std::string label;
};

std::optional<ModelInfo> check_model(Block& top, const std::string& command, json& out, Diags& diags) {
    const bool optional_osgood = command == "osgood-demo";
    const json* node = top.raw("model");
    if (!node && !optional_osgood) {
        top.error("model", "required key is missing");
        return std::nullopt;
    }
    json fallback = {{"label", "osgood"}};
    Block model(node ? node : &fallback, "$.model", diags);
    const auto label = model.text("label", std::nullopt);
    const json* params_node = model.raw("params");
    model.finish();
    if (!label) return std::nullopt;

    const auto& catalog = model_catalog();
    const auto entry = catalog.find(*label);
    if (entry == catalog.end()) {
        std::string known;
        for (const auto& [name, defaults] : catalog) known += (known.empty() ? "" : ", ") + name;
        diags.push_back({"$.model.label", "unknown model label '" + *label + "' (known: " + known + ")"});
        return std::nullopt;
    }
    if (optional_osgood && *label != "osgood") {
        diags.push_back({"$.model.label", "osgood-demo runs the osgood model only"});
        return std::nullopt;
    }

    std::map<std::string, double> params = entry->second;
    bool good = true;
    if (params_node) {
        if (!params_node->is_object()) {
            diags.push_back({"$.model.params", "expected an object, got " + type_name(*params_node)});
            return std::nullopt;
        }
        for (const auto& [key, value] : params_node->items()) {
            const std::string path = "$.model.params." + key;
            if (!params.contains(key)) {
                diags.push_back({path, "model '" + *label + "' has no parameter '" + key + "'"});
                good = false;
            } else if (!value.is_number() || !std::isfinite(value.get<double>())) {
                diags.push_back({path, "expected a finite number"});
                good = false;
            } else {
                params[key] = value.get<double>();
            }
        }
    }
    if (!good) return std::nullopt;
    try {
        const auto m = make_model(*label, params);
        out["model"] = {{"label", *label}, {"params", params}};
        return ModelInfo{m.dim(), m.lipschitz_L().has_value() && m.family() == HypothesisFamily::Lipschitz,
                         *label};
    } catch (const Error& e) {
        diags.push_back({"$.model.params", e.what()});
        return std::nullopt;
    }
}

std::vector<double> geometric(double first, double ratio, std::size_t count) {
    std::vector<double> v(count);
    double x = first;
    for (auto& e : v) {
        e = x;
        x *= ratio;
    }
    return v;
}

void check_x0(Block& block, const ModelInfo& model, std::optional<std::vector<double>> fallback) {
    if (!fallback) fallback = std::vector<double>(model.dim, 1.0);
    const auto x0 = block.reals("x0", fallback);
    if (x0 && x0->size() != model.dim) {
        block.error("x0", "expected " + std::to_string(model.dim) + " components for model '" + model.label +
                              "', got " + std::to_string(x0->size()));
    }
}

void check_decreasing(Block& block, const std::string& key, std::vector<double> fallback) {
    const auto sizes = block.reals(key, std::move(fallback));
    if (!sizes) return;
    if (sizes->size() < 3) block.error(key, "needs at least three entries");
    for (std::size_t j = 0; j < sizes->size(); ++j) {
        if ((*sizes)[j] < 0.0) {
            block.error(key, "entries must be >= 0");
            return;
        }
        if (j > 0 && !((*sizes)[j] < (*sizes)[j - 1])) {
            block.error(key, "entries must be strictly decreasing");
            return;
        }
    }
}

void require_lipschitz(const ModelInfo& model, const std::string& command, Diags& diags) {
    if (!model.lipschitz) {
        diags.push_back({"$.model.label", command + " needs a Lipschitz model; '" + model.label + "' is not"});
    }
}

void check_driver_list(Block& block) {
    const json* v = block.raw("n");
    if (!v) {
        block.normalized["n"] = {2, 4, 8, 16, 32};
        return;
    }
    if (!v->is_array()) {
        block.error("n", "expected an array of positive integers and \"inf\"");
        return;
    }
    json out = json::array();
    double previous = 0.0;
    for (std::size_t i = 0; i < v->size(); ++i) {
        const json& e = (*v)[i];
        double value = 0.0;
        if (e.is_string() && e.get<std::string>() == "inf") {
            value = std::numeric_limits<double>::infinity();
            out.push_back("inf");
        } else if (const auto n = Block::as_integer(e); n && *n >= 1) {
            value = static_cast<double>(*n);
            out.push_back(*n);
        } else {
            block.error("n[" + std::to_string(i) + "]", "expected a positive integer or \"inf\"");
            return;
        }
        if (!(value > previous)) {
            block.error("n", "entries must be strictly increasing");
            return;
        }
        previous = value;
    }
    if (out.size() < 3) block.error("n", "needs at least three entries");
    block.normalized["n"] = out;
}

void check_command_block(const std::string& command, Block& block, const std::optional<ModelInfo>& model,
                         Diags& diags) {
    if (command == "simulate") {
        if (model) check_x0(block, *model, std::nullopt);
        block.flag("paths_csv", true);
        block.flag("binary", false);
    } else if (command == "picard") {
        if (model) {
            check_x0(block, *model, std::nullopt);
            require_lipschitz(*model, command, diags);
        }
        block.integer("iterations", 8, 1);
        const auto tol = block.real("tol", 0.0);
        if (tol && *tol < 0.0) block.error("tol", "must be >= 0");
        block.flag("compare_particles", true);
    } else if (command == "stability-init") {
        if (model) {
            check_x0(block, *model, std::nullopt);
            require_lipschitz(*model, command, diags);
        }
        check_decreasing(block, "deltas", geometric(0.5, 0.5, 6));
    } else if (command == "stability-coeff") {
        if (model) {
            check_x0(block, *model, std::nullopt);
            require_lipschitz(*model, command, diags);
        }
        check_decreasing(block, "epsilons", geometric(0.5, 0.5, 6));
        const auto bump = block.text("bump", std::string("tanh"));
        if (bump && *bump != "tanh" && *bump != "constant") block.error("bump", "expected \"tanh\" or \"constant\"");
        const auto scale = block.real("scale", 1.0);
        if (scale && !(*scale > 0.0)) block.error("scale", "must be > 0");
    } else if (command == "stability-driver") {
        if (model) {
            check_x0(block, *model, std::nullopt);
            require_lipschitz(*model, command, diags);
        }
        check_driver_list(block);
    } else if (command == "control-compare") {
        const auto theta = block.real("theta", 1.0);
        if (theta && *theta < 0.0) block.error("theta", "must be >= 0");
        const auto sigma0 = block.real("sigma0", 0.05);
        if (sigma0 && *sigma0 < 0.0) block.error("sigma0", "must be >= 0");
        const json* subs = block.raw("subs");
        if (!subs) {
            block.normalized["subs"] = {2, 8, 32};
        } else if (!subs->is_array() || subs->empty()) {
            block.error("subs", "expected a nonempty array of positive integers");
        } else {
            json out = json::array();
            std::uint64_t lcm = 1;
            for (std::size_t i = 0; i < subs->size(); ++i) {
                const auto n = Block::as_integer((*subs)[i]);
                if (!n || *n < 1 || *n > 4096) {
                    block.error("subs[" + std::to_string(i) + "]", "expected an integer in [1, 4096]");
                    return;
                }
                lcm = std::lcm(lcm, *n);
                out.push_back(*n);
            }
            if (lcm > 4096) block.error("subs", "lcm of the chattering levels must be <= 4096");
            block.normalized["subs"] = out;
        }
    } else if (command == "osgood-demo") {
        if (model) check_x0(block, *model, std::vector<double>{0.5});
        const auto gap = block.real("gap", 1e-6);
        if (gap && !(*gap > 0.0)) block.error("gap", "must be > 0");
    }
}

}  // namespace

std::string to_string(const Diagnostic& d) { return d.path + ": " + d.message; }

json default_config() {
    return {
        {"command", "simulate"},
        {"model", {{"label", "mean_field_ou"}, {"params", {{"theta", 1.0}, {"sigma0", 0.3}}}}},
        {"grid", {{"T", 1.0}, {"N", 100}}},
        {"mc", {{"M", 1000}, {"seed", 1}}},
        {"simulate", {{"x0", {1.0}}}},
        {"output_dir", "mvsde-out"},
    };
}

Checked check_config(const json& config) {
    Checked result;
    Diags& diags = result.diagnostics;
    Block top(&config, "$", diags);
    if (!config.is_object()) return result;

    const auto command = top.text("command", std::nullopt);
    if (command && std::find(commands().begin(), commands().end(), *command) == commands().end()) {
        std::string known;
        for (const auto& c : commands()) known += (known.empty() ? "" : ", ") + c;
        top.error("command", "unknown command '" + *command + "' (known: " + known + ")");
    }
    const bool known_command = command && std::find(commands().begin(), commands().end(), *command) != commands().end();

    json& out = result.normalized;
    out = json::object();

    Block grid(top.raw("grid"), "$.grid", diags);
    const auto T = grid.real("T", 1.0);
    if (T && !(*T > 0.0)) grid.error("T", "must be > 0");
    grid.integer("N", 100, 1);
    grid.finish();

    Block mc(top.raw("mc"), "$.mc", diags);
    mc.integer("M", 1000, 1);
    mc.integer("seed", 1, 0);
    mc.finish();

    top.text("output_dir", std::string("mvsde-out"));

    std::optional<ModelInfo> model;
    if (known_command) {
        if (*command == "control-compare") {
            if (top.has("model")) top.error("model", "control-compare runs the built-in bang-bang example; remove 'model'");
            top.raw("model");
        } else {
            model = check_model(top, *command, out, diags);
        }
        Block block(top.raw(*command), "$." + *command, diags);
        check_command_block(*command, block, model, diags);
        block.finish();
        out[*command] = block.normalized;
        if (*command == "control-compare" && grid.normalized.contains("N") && block.normalized.contains("subs")) {
            std::uint64_t lcm = 1;
            for (const auto& sub : block.normalized["subs"]) lcm = std::lcm(lcm, sub.get<std::uint64_t>());
            if (grid.normalized["N"].get<std::uint64_t>() * lcm > 1'000'000) {
                diags.push_back({"$.grid.N", "N times lcm(subs) must be <= 1000000"});
            }
        }
    }
    top.finish();

    out["command"] = command.value_or("");
    out["grid"] = grid.normalized;
    out["mc"] = mc.normalized;
    out["output_dir"] = top.normalized.value("output_dir", "mvsde-out");
    if (!result.ok()) result.normalized = json();
    return result;
}

std::vector<Diagnostic> validate(const json& config) { return check_config(config).diagnostics; }

namespace {

/// SAX pass that only tracks the current JSON path, so a syntax error can
/// name the key under which it happened.
class PathTracker : public nlohmann::json_sax<json> {
public:
    bool null() override { return value(); }
    bool boolean(bool) override { return value(); }
    bool number_integer(number_integer_t) override { return value(); }
    bool number_unsigned(number_unsigned_t) override { return value(); }
    bool number_float(number_float_t, const string_t&) override { return value(); }
    bool string(string_t&) override { return value(); }
    bool binary(binary_t&) override { return value(); }

    bool start_object(std::size_t) override {
        value();
        frames_.push_back({false, "", 0});
        return true;
    }
    bool key(string_t& k) override {
        frames_.back().key = k;
        frames_.back().has_key = true;
        return true;
    }
    bool end_object() override {
        frames_.pop_back();
        return true;
    }
    bool start_array(std::size_t) override {
        value();
        frames_.push_back({true, "", 0});
        return true;
    }
    bool end_array() override {
        frames_.pop_back();
        return true;
    }
    bool parse_error(std::size_t position, const std::string&, const nlohmann::detail::exception& ex) override {
        error_path = path();
        error_message = ex.what();
        error_position = position;
        return false;
    }

    [[nodiscard]] std::string path() const {
        std::string p = "$";
        for (std::size_t j = 0; j < frames_.size(); ++j) {
            const auto& f = frames_[j];
            if (f.is_array) {
                // A nested container still open is the element already counted.
                const bool inside = j + 1 < frames_.size();
                p += "[" + std::to_string(inside ? f.index - 1 : f.index) + "]";
            } else if (f.has_key) {
                p += "." + f.key;
            }
        }
        return p;
    }

    std::string error_path;
    std::string error_message;
    std::size_t error_position = 0;

private:
    struct Frame {
        bool is_array;
        std::string key;
        std::size_t index;
        bool has_key = false;
    };

    bool value() {
        if (!frames_.empty() && frames_.back().is_array) ++frames_.back().index;
        return true;
    }

    std::vector<Frame> frames_;
};

}  // namespace

Parsed parse_config_text(std::string_view text) {
    Parsed parsed;
    PathTracker tracker;
    if (!json::sax_parse(text, &tracker)) {
        parsed.diagnostics.push_back({tracker.error_path, "malformed JSON near key '" + tracker.error_path +
                                                              "' (byte " + std::to_string(tracker.error_position) +
                                                              "): " + tracker.error_message});
        return parsed;
    }
    parsed.document = json::parse(text);
    return parsed;
}

}  // namespace mvsde::lab
