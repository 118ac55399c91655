#include "pdenmpc/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"PDE-constrained NMPC solvers and heat-plate benchmark"};
    app.require_subcommand(1);
    std::string config;
    for (const char* name : {"run-bench", "compare", "analyze", "check"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("config", config, "JSON run configuration")->required();
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : pdenmpc::cli::kConfigError;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    try {
        return pdenmpc::cli::run_command(command, config, std::cout, std::cerr);
    } catch (const pdenmpc::cli::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return pdenmpc::cli::kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return pdenmpc::cli::kDivergence;
    }
}
