#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "doctest.h"

#include "flexgrid/error.hpp"
#include "flexgrid/scenario.hpp"

#include "oracles.hpp"
#include "support.hpp"

using namespace flexgrid;

namespace {

cluster::ClusterStats flat_cluster(double kw, double frac, double p_max, int members = 1) {
    cluster::ClusterStats s;
    s.centroid_profile_kw.fill(kw);
    s.frac_charging.fill(frac);
    s.p_max_kw = p_max;
    s.member_count = members;
    return s;
}

// Charges only between the given hours (UTC), at `kw` with fraction `frac`.
cluster::ClusterStats window_cluster(int from_h, int to_h, double kw, double frac, double p_max) {
    cluster::ClusterStats s;
    for (int m = from_h * 60; m < to_h * 60; ++m) {
        s.centroid_profile_kw[static_cast<std::size_t>(m)] = kw;
        s.frac_charging[static_cast<std::size_t>(m)] = frac;
    }
    s.p_max_kw = p_max;
    s.member_count = 1;
    return s;
}

const grid::Network& five_bus() {
    static const grid::Network net = grid::load_network(testsupport::data_path("five_bus/network.json"));
    return net;
}

std::shared_ptr<const grid::PerUnitNetwork> five_bus_pu() {
    static const auto pu = std::make_shared<const grid::PerUnitNetwork>(grid::to_per_unit(five_bus()));
    return pu;
}

}  // namespace

TEST_CASE("largest_remainder: examples and edge cases") {
    CHECK(scenario::largest_remainder({0.5, 0.5}, 10) == std::vector<std::int64_t>{5, 5});
    CHECK(scenario::largest_remainder({0.7, 0.3}, 10) == std::vector<std::int64_t>{7, 3});
    CHECK(scenario::largest_remainder({1, 1, 1}, 10) == std::vector<std::int64_t>{4, 3, 3});
    CHECK(scenario::largest_remainder({1, 1, 1}, 0) == std::vector<std::int64_t>{0, 0, 0});
    CHECK(scenario::largest_remainder({0, 2, 0}, 5) == std::vector<std::int64_t>{0, 5, 0});
    CHECK_THROWS_AS(scenario::largest_remainder({0, 0}, 3), DataError);
    CHECK_THROWS_AS(scenario::largest_remainder({1, -1}, 3), ConfigError);

    std::mt19937_64 gen(31);
    std::uniform_int_distribution<int> len(1, 12);
    std::uniform_real_distribution<double> w(0.0, 1.0);
    std::uniform_int_distribution<std::int64_t> total(0, 20000);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> weights(static_cast<std::size_t>(len(gen)));
        for (auto& x : weights) x = w(gen);
        const auto n = total(gen);
        const auto got = scenario::largest_remainder(weights, n);
        CHECK(got == oracle::hamilton(weights, n));
        CHECK(std::accumulate(got.begin(), got.end(), std::int64_t{0}) == n);
    }
}

TEST_CASE("allocate_fleet: demand-weighted buses then cluster shares") {
    auto a = scenario::allocate_fleet(std::vector<double>{0.5, 0.5}, {1.0}, 10, 0.8);
    CHECK(a.n_ev[0] == std::vector<std::int64_t>{5, 5});
    auto b = scenario::allocate_fleet(std::vector<double>{0.7, 0.3}, {1.0}, 10, 0.8);
    CHECK(b.n_ev[0] == std::vector<std::int64_t>{7, 3});

    cluster::ClusterAggregates agg;
    for (int i = 0; i < 6; ++i) agg.clusters.push_back(flat_cluster(1.0, 0.1, 7.0, 3 + 2 * i));
    const auto shares = scenario::member_shares(agg);
    auto c = scenario::allocate_fleet(five_bus(), agg, shares, 1000, 0.8);
    const auto weights = grid::demand_distribution(five_bus());
    const auto by_bus = oracle::hamilton(weights, 1000);
    CHECK(c.per_bus() == by_bus);
    CHECK(c.total == 1000);
    std::int64_t all = 0;
    for (std::size_t j = 0; j < by_bus.size(); ++j) {
        std::vector<std::int64_t> column;
        for (const auto& row : c.n_ev) column.push_back(row[j]);
        CHECK(column == oracle::hamilton(shares, by_bus[j]));
        all += std::accumulate(column.begin(), column.end(), std::int64_t{0});
    }
    CHECK(all == 1000);
    const auto pc = c.per_cluster();
    CHECK(std::accumulate(pc.begin(), pc.end(), std::int64_t{0}) == 1000);
    // The slack bus has no demand, so it gets no vehicles.
    CHECK(c.per_bus()[five_bus().topology.slack] == 0);

    CHECK_THROWS_AS(scenario::allocate_fleet(std::vector<double>{1.0}, {0.6, 0.6}, 10, 0.8), ConfigError);
    CHECK_THROWS_AS(scenario::allocate_fleet(five_bus(), agg, {1.0}, 10, 0.8), ConfigError);
}

TEST_CASE("window_average and charging_baseline") {
    ev::DayCurve c{};
    c.fill(0.4);
    CHECK(scenario::window_average(c, 600 * 60, 1800) == doctest::Approx(0.4));
    ev::DayCurve late{};
    for (int m = 1430; m < 1440; ++m) late[static_cast<std::size_t>(m)] = 1.0;
    // 23:50 plus 20 minutes wraps into the next day.
    CHECK(scenario::window_average(late, 1430 * 60, 1200) == doctest::Approx(0.5));
    CHECK_THROWS_AS(scenario::window_average(c, 0, 90), ConfigError);

    cluster::ClusterAggregates agg;
    agg.clusters = {flat_cluster(2.0, 0.25, 7.0), flat_cluster(0.0, 0.0, 7.0)};
    scenario::FleetAllocation alloc;
    alloc.n_ev = {{0, 100}, {0, 40}};
    alloc.total = 140;
    grid::TimeAxis time{0, 1800, 4};
    auto base = scenario::charging_baseline(agg, alloc, time, 2, 10.0);
    CHECK(base.n_charging[0][1] == doctest::Approx(25.0));
    CHECK(base.n_charging[1][1] == 0.0);
    // 100 EVs at 2 kW average = 0.2 MW = 0.02 p.u. on 10 MVA.
    CHECK(base.ev_demand_pu[1] == doctest::Approx(0.02));
    CHECK(base.ev_demand_pu[0] == 0.0);
}

TEST_CASE("social_cost follows 1/(P + eps)") {
    cluster::ClusterAggregates agg;
    agg.clusters = {flat_cluster(0.0, 0.0, 7.0), flat_cluster(0.49, 0.1, 7.0), flat_cluster(3.0, 0.3, 7.0)};
    grid::TimeAxis time{0, 1800, 1};
    CHECK(scenario::social_cost(agg, 0, time, 0, 0.01) == doctest::Approx(100.0));
    CHECK(scenario::social_cost(agg, 1, time, 0, 0.01) == doctest::Approx(2.0));
    CHECK(scenario::social_cost(agg, 2, time, 0, 0.01) < scenario::social_cost(agg, 1, time, 0, 0.01));
    CHECK_THROWS_AS(scenario::social_cost(agg, 0, time, 0, 0.0), ConfigError);
}

TEST_CASE("build_schedule: flexibility bound from vehicles not yet charging") {
    auto net = testsupport::two_bus({});
    cluster::ClusterAggregates agg;
    agg.clusters = {flat_cluster(2.8, 0.4, 7.0)};
    auto alloc = scenario::allocate_fleet(std::vector<double>{0.0, 1.0}, {1.0}, 10, 1.0);
    auto s = scenario::build_schedule(*net, agg, alloc);
    REQUIRE(s.steps.size() == 1);
    const auto& st = s.steps[0];
    CHECK(st.n_charging[0][1] == doctest::Approx(4.0));
    CHECK(st.n_remain[0][1] == doctest::Approx(6.0));
    // (10 - 4) * 7 kW = 42 kW = 0.0042 p.u. on 10 MVA.
    CHECK(st.flex_ub[0][1] == doctest::Approx(0.0042));
    CHECK(st.flex_ub[0][0] == 0.0);
    CHECK(st.pi_flex[0] == doctest::Approx(1.0 / 2.81));
    CHECK(st.ev_demand_pu[1] == doctest::Approx(10 * 2.8 / 1000.0 / 10.0));
    CHECK(st.clamped == 0);

    auto off = scenario::build_schedule(*net, agg, alloc, {0.01, false});
    CHECK(off.steps[0].ev_demand_pu[1] == 0.0);

    auto none = scenario::allocate_fleet(std::vector<double>{0.0, 1.0}, {1.0}, 0, 1.0);
    auto zs = scenario::build_schedule(*net, agg, none);
    CHECK(zs.steps[0].flex_ub[0][1] == 0.0);
}

TEST_CASE("run_baseline: no surplus means no curtailment") {
    testsupport::TwoBusSpec spec;
    spec.demand_mw = 2.0;
    spec.wind_mw = 1.5;
    auto r = scenario::run_baseline(testsupport::two_bus(spec), nullptr, {});
    REQUIRE(r.failures.empty());
    CHECK(r.curtailment_mwh <= 1e-9);
    CHECK(r.wind_available_mwh == doctest::Approx(0.75));
}

TEST_CASE("run_baseline on the five-bus day: export limit forces curtailment, voltages bounded") {
    auto r = scenario::run_baseline(five_bus_pu(), nullptr, {});
    CHECK(r.failures.empty());
    CHECK(r.steps.size() == 48);
    CHECK(r.curtailment_mwh > 0.0);
    CHECK(r.max_v_pu <= 1.1 + 1e-6);
    double sum = 0.0;
    for (const auto& s : r.steps) {
        for (double c : s.curtail_mw) {
            CHECK(c >= 0.0);
            sum += c * 0.5;
        }
        for (double v : s.v_pu) CHECK(v <= 1.1 + 1e-6);
    }
    CHECK(r.curtailment_mwh == doctest::Approx(sum).epsilon(1e-12));
}

TEST_CASE("run_flex: exhausted fleet reproduces the baseline") {
    cluster::ClusterAggregates agg;
    agg.clusters = {flat_cluster(3.0, 1.0, 7.0), flat_cluster(1.0, 1.0, 11.0)};
    auto alloc = scenario::allocate_fleet(five_bus(), agg, {0.5, 0.5}, 400, 0.8);
    auto sched = scenario::build_schedule(*five_bus_pu(), agg, alloc);
    auto base = scenario::run_baseline(five_bus_pu(), &sched, {});
    auto flex = scenario::run_flex(five_bus_pu(), sched, {});
    REQUIRE(base.failures.empty());
    REQUIRE(flex.failures.empty());
    const double s_base = five_bus_pu()->s_base_mva;
    for (std::size_t t = 0; t < base.steps.size(); ++t)
        for (std::size_t g = 0; g < base.steps[t].curtail_mw.size(); ++g)
            CHECK(std::abs(base.steps[t].curtail_mw[g] - flex.steps[t].curtail_mw[g]) / s_base <= 1e-7);
    CHECK(flex.flex_energy_mwh <= 1e-9);
    CHECK(scenario::curtailment_reduction(base, flex) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("run_flex: bounded dispatch, displaced curtailment and parallel determinism") {
    cluster::ClusterAggregates agg;
    agg.clusters = {window_cluster(0, 6, 4.0, 0.5, 7.0), window_cluster(17, 22, 6.0, 0.6, 11.0),
                    flat_cluster(0.5, 0.1, 3.6)};
    auto alloc = scenario::allocate_fleet(five_bus(), agg, {0.4, 0.4, 0.2}, 300, 0.8);
    auto sched = scenario::build_schedule(*five_bus_pu(), agg, alloc);
    scenario::RunOptions serial;
    auto base = scenario::run_baseline(five_bus_pu(), &sched, serial);
    auto flex = scenario::run_flex(five_bus_pu(), sched, serial);
    REQUIRE(flex.failures.empty());
    CHECK(flex.curtailment_mwh <= base.curtailment_mwh + 1e-6);
    CHECK(flex.flex_energy_mwh > 0.0);
    for (const auto& s : flex.steps)
        for (std::size_t i = 0; i < s.flex_mw.size(); ++i)
            for (std::size_t j = 0; j < s.flex_mw[i].size(); ++j) {
                CHECK(s.flex_mw[i][j] >= 0.0);
                CHECK(s.flex_mw[i][j] <= s.flex_ub_mw[i][j] + 1e-8 * five_bus_pu()->s_base_mva);
            }
    for (const auto& st : sched.steps)
        for (std::size_t i = 0; i < st.n_charging.size(); ++i)
            for (std::size_t j = 0; j < st.n_charging[i].size(); ++j)
                CHECK(st.n_charging[i][j] <= static_cast<double>(alloc.n_ev[i][j]) + 1e-12);

    scenario::RunOptions parallel;
    parallel.jobs = 3;
    auto again = scenario::run_flex(five_bus_pu(), sched, parallel);
    REQUIRE(again.steps.size() == flex.steps.size());
    for (std::size_t t = 0; t < flex.steps.size(); ++t) {
        CHECK(again.steps[t].curtail_mw == flex.steps[t].curtail_mw);
        CHECK(again.steps[t].flex_mw == flex.steps[t].flex_mw);
        CHECK(again.steps[t].objective == flex.steps[t].objective);
    }
}

TEST_CASE("run_flex: the only habitually charging cluster takes the whole dispatch") {
    // Two clusters at b1; only the night cluster charges at 02:00 UTC.
    testsupport::TwoBusSpec spec;
    spec.demand_mw = 0.5;
    spec.wind_mw = 1.5;
    spec.export_max_mw = 0.0;
    auto net2 = testsupport::two_bus(spec);
    auto shifted = std::make_shared<grid::PerUnitNetwork>(*net2);
    shifted->time.start = 2 * 3600;
    cluster::ClusterAggregates agg;
    agg.clusters = {window_cluster(0, 6, 3.0, 0.2, 7.0), window_cluster(12, 18, 5.0, 0.5, 7.0)};
    auto alloc = scenario::allocate_fleet(std::vector<double>{0.0, 1.0}, {0.5, 0.5}, 800, 1.0);
    auto sched = scenario::build_schedule(*shifted, agg, alloc, {0.01, false});
    REQUIRE(sched.steps[0].pi_flex[1] == doctest::Approx(100.0));
    auto r = scenario::run_flex(shifted, sched, {});
    REQUIRE(r.steps[0].ok());
    const double s_base = shifted->s_base_mva;
    CHECK(r.steps[0].flex_mw[1][1] / s_base <= 1e-8);
    CHECK(r.steps[0].flex_mw[0][1] > 0.9);
    CHECK(r.steps[0].curtail_mw[0] / s_base <= 1e-8);
}

TEST_CASE("run_flex: a surplus beyond every bound saturates all co-located clusters first") {
    testsupport::TwoBusSpec spec;
    spec.demand_mw = 0.2;
    spec.wind_mw = 3.0;
    spec.export_max_mw = 0.0;
    auto net = testsupport::two_bus(spec);
    cluster::ClusterAggregates agg;
    agg.clusters = {flat_cluster(3.0, 0.5, 7.0), flat_cluster(0.2, 0.1, 7.0)};
    auto alloc = scenario::allocate_fleet(std::vector<double>{0.0, 1.0}, {0.5, 0.5}, 200, 1.0);
    auto sched = scenario::build_schedule(*net, agg, alloc, {0.01, false});
    auto r = scenario::run_flex(net, sched, {});
    REQUIRE(r.steps[0].ok());
    const auto& s = r.steps[0];
    const double s_base = net->s_base_mva;
    for (std::size_t i = 0; i < 2; ++i) CHECK((s.flex_ub_mw[i][1] - s.flex_mw[i][1]) / s_base <= 1e-8);
    CHECK(s.curtail_mw[0] > 1.0);
}

TEST_CASE("curtailment_reduction") {
    scenario::SimulationResult base;
    base.time = {0, 1800, 2};
    base.curtailment_mwh = 10.0;
    base.steps.resize(2);
    auto same = base;
    CHECK(scenario::curtailment_reduction(base, same) == 0.0);
    auto zero = base;
    zero.curtailment_mwh = 0.0;
    CHECK(scenario::curtailment_reduction(base, zero) == 100.0);
    CHECK(scenario::curtailment_reduction(zero, zero) == 0.0);
    auto other = base;
    other.steps.resize(3);
    CHECK_THROWS_AS(scenario::curtailment_reduction(base, other), ConfigError);
    auto later = base;
    later.time.start += 1800;
    CHECK_THROWS_AS(scenario::curtailment_reduction(base, later), ConfigError);
}

TEST_CASE("write_results_bundle writes the three files") {
    cluster::ClusterAggregates agg;
    agg.clusters = {window_cluster(0, 6, 4.0, 0.5, 7.0), flat_cluster(1.0, 0.2, 7.0)};
    auto alloc = scenario::allocate_fleet(five_bus(), agg, {0.5, 0.5}, 200, 0.8);
    auto sched = scenario::build_schedule(*five_bus_pu(), agg, alloc);
    scenario::RunOptions opts;
    opts.t_begin = 10;
    opts.t_end = 14;
    auto base = scenario::run_baseline(five_bus_pu(), &sched, opts);
    auto flex = scenario::run_flex(five_bus_pu(), sched, opts);
    CHECK(base.steps.size() == 4);
    const auto dir = std::filesystem::temp_directory_path() / "flexgrid_bundle_test";
    std::filesystem::remove_all(dir);
    scenario::write_results_bundle(dir, base, flex, {"{}", alloc, {"0", "1"}});
    for (const char* f : {"summary.json", "timeseries.csv", "flex_by_cluster.csv"})
        CHECK(std::filesystem::exists(dir / f));
    std::ifstream ts(dir / "timeseries.csv");
    std::string header;
    std::getline(ts, header);
    CHECK(header == "t,quantity,element,value");
    std::ifstream fc(dir / "flex_by_cluster.csv");
    std::getline(fc, header);
    CHECK(header == "t,cluster,bus,mw");
    std::filesystem::remove_all(dir);
}
