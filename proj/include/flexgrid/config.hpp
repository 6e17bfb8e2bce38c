#pragma once

// Run configuration read from a TOML document. Relative paths resolve
// against the directory holding the config file.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "flexgrid/clustering.hpp"
#include "flexgrid/conic.hpp"
#include "flexgrid/ev_data.hpp"
#include "flexgrid/opf.hpp"
#include "flexgrid/scenario.hpp"

namespace flexgrid::config {

struct Paths {
    std::filesystem::path base_dir;
    std::optional<std::filesystem::path> sessions;
    std::filesystem::path network;
    std::filesystem::path output_dir;
};

struct ClusteringConfig {
    cluster::FeatureMode mode = cluster::FeatureMode::standard;
    std::optional<int> k;
    std::optional<std::pair<int, int>> k_range;
    int seeds_per_k = 10;
    ev::DayFilter day_filter = ev::DayFilter::weekdays;
    int max_iter = 300;
    double tol = 1e-6;
};

struct OpfConfig {
    double m_t = 1.0 / opf::kDefaultLossWeight;
    double epsilon_kw = scenario::kDefaultEpsilonKw;
    std::optional<double> s_base_mva;
    std::optional<double> v_min_pu;
    std::optional<double> v_max_pu;
    std::optional<double> slack_import_max_mw;
    std::optional<double> slack_export_max_mw;
    conic::SolverSettings solver;

    double loss_weight() const { return 1.0 / m_t; }
};

struct ScenarioConfig {
    std::optional<std::int64_t> adoption_count;
    std::optional<double> adoption_rate;
    std::optional<std::int64_t> fleet_total;
    std::optional<std::vector<double>> cluster_shares;
    int timestep_minutes = 30;
    std::size_t window_start = 0;
    std::optional<std::size_t> window_steps;
    bool baseline_ev_demand = true;

    std::int64_t ev_count() const;
    double effective_adoption_rate() const;
};

struct RunConfig {
    std::uint64_t seed = 0;
    Paths paths;
    std::optional<ev::SynthSpec> synth;
    ClusteringConfig clustering;
    OpfConfig opf;
    ScenarioConfig scenario;

    // Sub-seeds derived from the single root seed.
    std::uint64_t clustering_seed() const;
    std::uint64_t synth_seed() const;
};

// Throws ConfigError on any syntax or validation problem.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir);

// Effective configuration as JSON text, for echoing into result bundles.
// Paths are written as given (relative to the config file).
std::string echo_json(const RunConfig& cfg);

}  // namespace flexgrid::config
