// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <ostream>

#include "mvsde_lab/config.hpp"

namespace mvsde::lab {

enum ExitCode : int {
    kOk = 0,
    kConfigInvalid = 2,
    kSolverFailure = 3,
    kIoError = 4,
};

std::string_view toolkit_version() noexcept;

/// Runs one experiment from a normalized config, writing its outputs and
/// finally manifest.json into output_dir. Diagnostics go to `err`.
int run_config(const json& normalized, const std::filesystem::path& output_dir, std::ostream& err);

/// Reads, validates and runs a config file. `output_dir` overrides the
/// config's own output_dir.
int run(const std::filesystem::path& config_path, const std::optional<std::filesystem::path>& output_dir,
        std::ostream& err);

}  // namespace mvsde::lab
