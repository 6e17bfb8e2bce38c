#include <iostream>
#include <thread>

#include "CLI11.hpp"

#include "flexgrid/cli.hpp"

int main(int argc, char** argv) {
    using namespace flexgrid::cli;
    CLI::App app{"EV-cluster flexibility against wind curtailment on radial feeders"};
    app.require_subcommand(1);

    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
    app.add_option("--jobs", jobs, "parallel timestep solves (default: available processors)")
        ->check(CLI::PositiveNumber);

    ClusterArgs cluster_args;
    std::uint64_t seed = 0;
    std::string cluster_out;
    auto* cluster = app.add_subcommand("cluster", "cluster users from sessions or a synthetic spec");
    cluster->add_option("--config", cluster_args.config, "run config (TOML)")->required()->check(CLI::ExistingFile);
    auto* seed_opt = cluster->add_option("--seed", seed, "override the config seed");
    cluster->add_option("--out", cluster_out, "output directory (default: paths.output_dir)");

    SimulateArgs sim_args;
    std::string sim_out;
    auto* simulate = app.add_subcommand("simulate", "run the baseline and flexibility weeks");
    simulate->add_option("--config", sim_args.config, "run config (TOML)")->required()->check(CLI::ExistingFile);
    simulate->add_option("--clusters", sim_args.clusters, "cluster model (flexgrid.cluster.v1)")->required();
    simulate->add_option("--out", sim_out, "output directory (default: paths.output_dir)");

    std::string results_dir;
    auto* report = app.add_subcommand("report", "print and cross-check a results bundle");
    report->add_option("results_dir", results_dir, "directory written by simulate")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }

    configure_logging();
    if (*cluster) {
        if (*seed_opt) cluster_args.seed = seed;
        if (!cluster_out.empty()) cluster_args.out_dir = cluster_out;
        return cmd_cluster(cluster_args, std::cout, std::cerr);
    }
    if (*simulate) {
        sim_args.jobs = jobs;
        if (!sim_out.empty()) sim_args.out_dir = sim_out;
        return cmd_simulate(sim_args, std::cout, std::cerr);
    }
    return cmd_report(results_dir, std::cout, std::cerr);
}
