#pragma once

#include "pdenmpc/checks.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

namespace pdenmpc::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kDivergence = 2, kCheckFailed = 3 };

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct AnalysisConfig {
    bool convergence_factor = false;
    bool lemma_checks = false;
    std::vector<double> horizon_sweep;          // empty: the nmpc horizon only
    std::vector<double> gammas{0.5, 0.0};
    int sample_every = 1;
    int arnoldi_iters = 30;
    int arnoldi_seeds = 3;
    std::string solution_controller = "newton"; // or a splitting method name
    int lemma_instances = 20;

    bool any() const { return convergence_factor || lemma_checks; }
};

struct OutputConfig {
    std::string directory = "pdenmpc_out";
    bool field_snapshots = false;
    bool state_csv = false;
};

struct CompareConfig {
    int timing_repeats = 10;
    std::vector<int> grid_sweep;
    int sweep_iters = 3;
};

struct RunConfig {
    HeatPlateParams params;
    BenchConfig bench;
    ControllerSpec controller;
    AnalysisConfig analysis;
    OutputConfig output;
    CompareConfig compare;
    unsigned seed = 1;
};

/// Parses and validates a JSON document. Unknown keys, wrong types and
/// out-of-range values raise ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

int cmd_run_bench(const RunConfig& cfg, std::ostream& log);
int cmd_compare(const RunConfig& cfg, std::ostream& log);
int cmd_analyze(const RunConfig& cfg, std::ostream& log);
int cmd_check(const RunConfig& cfg, std::ostream& log);

/// Loads the config and dispatches; maps ConfigError to exit code 1.
int run_command(const std::string& command, const std::filesystem::path& config_path,
                std::ostream& log, std::ostream& err);

}  // namespace pdenmpc::cli
