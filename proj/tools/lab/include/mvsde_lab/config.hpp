// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mvsde::lab {

using nlohmann::json;

/// One validation problem, located by a JSON path such as "$.grid.N".
struct Diagnostic {
    std::string path;
    std::string message;
};

std::string to_string(const Diagnostic& d);

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> names{"simulate",        "picard",          "stability-init",
                                                "stability-coeff", "stability-driver", "control-compare",
                                                "osgood-demo"};
    return names;
}

/// A complete, valid simulate config for the mean-field OU model.
json default_config();

/// Result of checking a config: diagnostics, and when there are none, the
/// config with every default filled in.
struct Checked {
    std::vector<Diagnostic> diagnostics;
    json normalized;

    [[nodiscard]] bool ok() const noexcept { return diagnostics.empty(); }
};

Checked check_config(const json& config);

/// Empty iff the config satisfies every invariant.
std::vector<Diagnostic> validate(const json& config);

/// Parses JSON text. Syntax errors come back as a diagnostic at the path of
/// the innermost key being read when the parser stopped.
struct Parsed {
    json document;
    std::vector<Diagnostic> diagnostics;
};

Parsed parse_config_text(std::string_view text);

}  // namespace mvsde::lab
