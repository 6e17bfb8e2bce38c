#pragma once

// Week-scale baseline and flexibility simulations: fleet allocation, per-step
// EV bounds and social costs, the OPF sequence and curtailment accounting.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "flexgrid/clustering.hpp"
#include "flexgrid/conic.hpp"
#include "flexgrid/grid_model.hpp"
#include "flexgrid/opf.hpp"

namespace flexgrid::scenario {

inline constexpr const char* kResultSchema = "flexgrid.result.v1";
inline constexpr double kDefaultEpsilonKw = 0.01;

// Largest-remainder apportionment of `total` over non-negative weights. Ties
// in the remainder go to the lower index.
std::vector<std::int64_t> largest_remainder(const std::vector<double>& weights, std::int64_t total);

struct FleetAllocation {
    std::vector<std::vector<std::int64_t>> n_ev;  // [cluster][bus]
    std::int64_t total = 0;
    double adoption_rate = 1.0;

    std::vector<std::int64_t> per_bus() const;
    std::vector<std::int64_t> per_cluster() const;
};

// Shares proportional to member counts.
std::vector<double> member_shares(const cluster::ClusterAggregates& aggregates);

FleetAllocation allocate_fleet(const std::vector<double>& bus_weights, const std::vector<double>& cluster_shares,
                               std::int64_t total_evs, double adoption_rate = 1.0);
FleetAllocation allocate_fleet(const grid::Network& network, const cluster::ClusterAggregates& aggregates,
                               const std::vector<double>& cluster_shares, std::int64_t total_evs,
                               double adoption_rate = 1.0);

// Mean of a minute-of-day curve over [start, start + step), wrapping midnight.
double window_average(const ev::DayCurve& curve, UnixSeconds start, std::int64_t step_seconds);

struct ChargingBaseline {
    std::vector<std::vector<double>> n_charging;  // [cluster][bus], fractional
    std::vector<double> ev_demand_pu;             // per bus
};

ChargingBaseline charging_baseline(const cluster::ClusterAggregates& aggregates, const FleetAllocation& allocation,
                                   const grid::TimeAxis& time, std::size_t t, double s_base_mva);

// pi = 1 / (window-averaged centroid kW + epsilon)
double social_cost(const cluster::ClusterAggregates& aggregates, std::size_t cluster, const grid::TimeAxis& time,
                   std::size_t t, double epsilon_kw = kDefaultEpsilonKw);

struct FlexStep {
    std::vector<double> pi_flex;                  // per cluster
    std::vector<std::vector<double>> n_charging;  // [cluster][bus]
    std::vector<std::vector<double>> n_remain;    // [cluster][bus]
    std::vector<std::vector<double>> flex_ub;     // [cluster][bus], p.u.
    std::vector<double> ev_demand_pu;             // per bus, baseline EV charging
    int clamped = 0;                              // n_remain entries clamped at zero
};

struct ScheduleOptions {
    double epsilon_kw = kDefaultEpsilonKw;
    bool baseline_ev_demand = true;
};

struct FlexSchedule {
    std::size_t n_clusters = 0;
    std::size_t n_buses = 0;
    std::vector<FlexStep> steps;  // one per network timestep
};

FlexSchedule build_schedule(const grid::PerUnitNetwork& network, const cluster::ClusterAggregates& aggregates,
                            const FleetAllocation& allocation, const ScheduleOptions& options = {});

struct RunOptions {
    double loss_weight = opf::kDefaultLossWeight;
    unsigned jobs = 1;
    std::size_t t_begin = 0;
    std::size_t t_end = static_cast<std::size_t>(-1);  // clamped to the horizon
    conic::BackendFactory backend = conic::default_backend_factory();
};

struct StepResult {
    std::size_t t = 0;
    opf::SolveStatus status = opf::SolveStatus::numeric_failure;
    bool inexact = false;
    std::string message;
    std::vector<double> wind_available_mw;          // per generator
    std::vector<double> curtail_mw;                 // per generator
    std::vector<std::vector<double>> flex_mw;       // [cluster][bus]
    std::vector<std::vector<double>> flex_ub_mw;    // [cluster][bus]
    std::vector<double> demand_mw;                  // per bus, including baseline EV load
    std::vector<double> v_pu;                       // per bus
    double slack_p_mw = 0.0;
    double losses_mw = 0.0;
    double exactness = 0.0;
    double objective = 0.0;

    bool ok() const { return status == opf::SolveStatus::optimal && !inexact; }
};

struct SimulationResult {
    std::string label;
    grid::TimeAxis time;
    std::vector<std::string> bus_ids;
    std::vector<std::string> generator_ids;
    std::size_t n_clusters = 0;
    std::vector<StepResult> steps;  // ordered by t

    // Totals over successful steps only.
    double curtailment_mwh = 0.0;
    double flex_energy_mwh = 0.0;
    double wind_available_mwh = 0.0;
    double max_v_pu = 0.0;
    double max_exactness = 0.0;
    std::vector<std::size_t> failures;

    void accumulate();
};

SimulationResult run_baseline(std::shared_ptr<const grid::PerUnitNetwork> network, const FlexSchedule* schedule,
                              const RunOptions& options);
SimulationResult run_flex(std::shared_ptr<const grid::PerUnitNetwork> network, const FlexSchedule& schedule,
                          const RunOptions& options);

// 100 * (1 - flex / baseline); 0 when the baseline never curtails.
double curtailment_reduction(const SimulationResult& baseline, const SimulationResult& flex);

struct BundleInfo {
    std::string config_echo_json = "{}";
    FleetAllocation fleet;
    std::vector<std::string> cluster_labels;
};

// Writes summary.json, timeseries.csv and flex_by_cluster.csv.
void write_results_bundle(const std::filesystem::path& dir, const SimulationResult& baseline,
                          const SimulationResult& flex, const BundleInfo& info);

}  // namespace flexgrid::scenario
