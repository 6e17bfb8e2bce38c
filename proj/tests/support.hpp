#pragma once

#include <filesystem>
#include <memory>
#include <random>
#include <vector>
#include <string>

#include "flexgrid/ev_data.hpp"
#include "flexgrid/grid_model.hpp"

namespace testsupport {

inline std::filesystem::path data_path(const std::string& rel) { return std::filesystem::path(FLEXGRID_DATA_DIR) / rel; }

inline std::shared_ptr<const flexgrid::grid::PerUnitNetwork> load_pu(const std::string& rel) {
    return std::make_shared<const flexgrid::grid::PerUnitNetwork>(
        flexgrid::grid::to_per_unit(flexgrid::grid::load_network(data_path(rel))));
}

// Slack b0 -- line l1 -- b1 at 11 kV, 10 MVA base, one step. Demand and
// wind (if any) sit at b1.
struct TwoBusSpec {
    double demand_mw = 0.0;
    double wind_mw = 0.0;
    double r_ohm = 0.242;
    double x_ohm = 0.363;
    double s_max_mva = 5.0;
    double power_factor = 1.0;
    double export_max_mw = flexgrid::grid::kUnlimited;
    double v_max_pu = 1.1;
    double curtail_cost = 150.0;
    bool firm = false;
};

inline std::shared_ptr<const flexgrid::grid::PerUnitNetwork> two_bus(const TwoBusSpec& s) {
    using namespace flexgrid::grid;
    Network net;
    net.s_base_mva = 10.0;
    net.load_power_factor = s.power_factor;
    Bus b0;
    b0.id = "b0";
    b0.base_kv = 11.0;
    b0.is_slack = true;
    b0.p_export_max_mw = s.export_max_mw;
    Bus b1;
    b1.id = "b1";
    b1.base_kv = 11.0;
    b1.v_max_pu = s.v_max_pu;
    net.buses = {b0, b1};
    net.lines = {Line{"l1", "b0", "b1", s.r_ohm, s.x_ohm, s.s_max_mva}};
    Generator g;
    g.id = "w1";
    g.bus = "b1";
    g.kind = s.firm ? GeneratorKind::firm : GeneratorKind::wind_curtailable;
    g.p_profile_mw = {s.wind_mw};
    g.curtail_cost = s.curtail_cost;
    net.generators = {g};
    net.demand = {DemandSeries{"b1", {s.demand_mw}}};
    net.time = TimeAxis{0, 1800, 1};
    validate(net);
    return std::make_shared<const PerUnitNetwork>(to_per_unit(net));
}

// Profiles made of one to three charging blocks at random times of day,
// each wrapping around midnight.
inline std::vector<flexgrid::ev::EvProfile> random_profiles(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_int_distribution<int> blocks(1, 3);
    std::uniform_int_distribution<int> start(0, 1439);
    std::uniform_int_distribution<int> len(30, 360);
    std::uniform_real_distribution<double> kw(0.2, 7.0);
    std::vector<flexgrid::ev::EvProfile> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& p = out[i];
        p.user_id = "u" + std::to_string(1000 + i);
        p.n_days = 20;
        const int nb = blocks(gen);
        for (int b = 0; b < nb; ++b) {
            const int s0 = start(gen);
            const int l = len(gen);
            const double level = kw(gen);
            for (int m = 0; m < l; ++m) {
                const auto at = static_cast<std::size_t>((s0 + m) % 1440);
                p.avg_profile_kw[at] += level;
                p.frac_charging[at] = std::min(1.0, p.frac_charging[at] + level / 7.0);
            }
        }
        p.p_max_kw = 7.0;
    }
    return out;
}

}  // namespace testsupport
