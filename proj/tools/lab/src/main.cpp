// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mvsde_lab/run.hpp"

int main(int argc, char** argv) {
    CLI::App app{"mvsde-lab: McKean-Vlasov SDE experiments from a JSON config"};
    app.set_version_flag("--version", std::string(mvsde::lab::toolkit_version()));
    std::string config;
    std::string output_dir;
    app.add_option("--config", config, "experiment config (JSON)")->required();
    app.add_option("--output-dir", output_dir, "overrides the config's output_dir");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : mvsde::lab::kConfigInvalid;
    }
    std::optional<std::filesystem::path> dir;
    if (!output_dir.empty()) dir = output_dir;
    return mvsde::lab::run(config, dir, std::cerr);
}
