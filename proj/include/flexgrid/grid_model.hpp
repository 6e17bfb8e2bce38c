#pragma once

// Radial distribution network: buses, lines, generators and demand series,
// loaded from a `flexgrid.network.v1` document and converted to per-unit.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "flexgrid/time.hpp"

namespace flexgrid::grid {

inline constexpr const char* kNetworkSchema = "flexgrid.network.v1";
inline constexpr double kUnlimited = std::numeric_limits<double>::infinity();

struct Bus {
    std::string id;
    double base_kv = 0.0;
    double v_min_pu = 0.9;
    double v_max_pu = 1.1;
    bool is_slack = false;
    // Slack-only: voltage set point and interconnection limits.
    double v_set_pu = 1.0;
    double p_import_max_mw = kUnlimited;
    double p_export_max_mw = kUnlimited;
};

struct Line {
    std::string id;
    std::string from_bus;  // parent (closer to the slack) after validation
    std::string to_bus;
    double r_ohm = 0.0;
    double x_ohm = 0.0;
    double s_max_mva = 0.0;
};

enum class GeneratorKind { wind_curtailable, firm };

struct Generator {
    std::string id;
    std::string bus;
    GeneratorKind kind = GeneratorKind::wind_curtailable;
    std::vector<double> p_profile_mw;
    // Reactive capability; absent means unity power factor.
    bool has_q_capability = false;
    double q_min_mvar = 0.0;
    double q_max_mvar = 0.0;
    double curtail_cost = 0.0;  // weight per MW curtailed
};

struct TimeAxis {
    UnixSeconds start = 0;
    std::int64_t step_seconds = 1800;
    std::size_t n_steps = 0;

    double step_hours() const { return static_cast<double>(step_seconds) / 3600.0; }
    UnixSeconds at(std::size_t t) const { return start + static_cast<std::int64_t>(t) * step_seconds; }
};

struct DemandSeries {
    std::string bus;
    std::vector<double> p_mw;
};

// Tree structure derived during validation; indices refer to Network vectors.
struct Topology {
    std::size_t slack = 0;
    std::vector<std::size_t> line_from;  // parent bus index per line
    std::vector<std::size_t> line_to;    // child bus index per line
    std::vector<int> parent_line;        // per bus, -1 for the slack
    std::vector<std::size_t> bfs_order;  // buses, slack first
};

struct Network {
    double s_base_mva = 10.0;
    double load_power_factor = 1.0;  // lagging, applied to all demand
    std::vector<Bus> buses;
    std::vector<Line> lines;
    std::vector<Generator> generators;
    std::vector<DemandSeries> demand;
    TimeAxis time;
    Topology topology;

    std::size_t bus_index(const std::string& id) const;
    // Total demand (MW) per bus index at step t.
    std::vector<double> demand_at(std::size_t t) const;
};

// Checks every invariant, orients lines parent->child by BFS from the slack
// and fills `topology`. Throws DataError naming the offending element.
void validate(Network& network);

Network load_network(const std::filesystem::path& path);
Network network_from_json_text(const std::string& text, const std::filesystem::path& base_dir);

// `timestamp,value_mw` with a uniform timestep.
struct ProfileSeries {
    TimeAxis time;
    std::vector<double> values;
};
ProfileSeries read_profile_csv(const std::filesystem::path& path);

struct PuBus {
    std::string id;
    double base_kv = 0.0;
    double v_min = 0.9;
    double v_max = 1.1;
    bool is_slack = false;
    double v_set = 1.0;
    double p_import_max = kUnlimited;
    double p_export_max = kUnlimited;
};

struct PuLine {
    std::string id;
    std::size_t from = 0;
    std::size_t to = 0;
    double r = 0.0;
    double x = 0.0;
    double s_max = 0.0;
    double z_base_ohm = 0.0;

    double z_abs() const;
    double z_abs_sq() const { return r * r + x * x; }
};

struct PuGenerator {
    std::string id;
    std::size_t bus = 0;
    GeneratorKind kind = GeneratorKind::wind_curtailable;
    std::vector<double> p_profile;
    bool has_q_capability = false;
    double q_min = 0.0;
    double q_max = 0.0;
    double curtail_cost = 0.0;
};

struct PerUnitNetwork {
    double s_base_mva = 10.0;
    double load_power_factor = 1.0;
    std::vector<PuBus> buses;
    std::vector<PuLine> lines;
    std::vector<PuGenerator> generators;
    std::vector<std::vector<double>> demand;  // [bus][t], p.u.
    std::vector<bool> has_demand;             // per bus
    TimeAxis time;
    Topology topology;
};

// Z_base = base_kv^2 / s_base_mva per line; powers divide by s_base_mva.
PerUnitNetwork to_per_unit(const Network& network);
Network to_physical(const PerUnitNetwork& pu);

// Share of total demand energy over the horizon, per bus index; sums to 1.
std::vector<double> demand_distribution(const Network& network);

}  // namespace flexgrid::grid
