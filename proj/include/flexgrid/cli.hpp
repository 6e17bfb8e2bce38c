#pragma once

// Subcommands behind the `flexgrid` executable. Each returns a process exit
// code and never throws.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

namespace flexgrid::cli {

enum ExitCode : int {
    kOk = 0,
    kUnexpected = 1,
    kConfigError = 2,
    kDataError = 3,
    kStepFailure = 4,   // some timestep failed; results were still written
    kConsistency = 5,   // internal cross-check failed
};

struct ClusterArgs {
    std::filesystem::path config;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out_dir;
};

struct SimulateArgs {
    std::filesystem::path config;
    std::filesystem::path clusters;
    std::optional<std::filesystem::path> out_dir;
    unsigned jobs = 1;
};

int cmd_cluster(const ClusterArgs& args, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err);
int cmd_report(const std::filesystem::path& results_dir, std::ostream& out, std::ostream& err);

// Reads FLEXGRID_LOG (error|warn|info|debug; default warn) and routes log
// output to stderr.
void configure_logging();

}  // namespace flexgrid::cli
