#include "flexgrid/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include <spdlog/spdlog.h>

#include "json.hpp"

#include "flexgrid/csv.hpp"
#include "flexgrid/error.hpp"

namespace flexgrid::scenario {

std::vector<std::int64_t> largest_remainder(const std::vector<double>& weights, std::int64_t total) {
    if (total < 0) throw ConfigError("apportionment: negative total");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("apportionment: weights must be finite and >= 0");
        sum += w;
    }
    std::vector<std::int64_t> seats(weights.size(), 0);
    if (total == 0) return seats;
    if (!(sum > 0.0)) throw DataError("apportionment: all weights are zero");
    std::vector<double> rem(weights.size());
    std::int64_t given = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double quota = static_cast<double>(total) * weights[i] / sum;
        seats[i] = static_cast<std::int64_t>(std::floor(quota));
        rem[i] = quota - static_cast<double>(seats[i]);
        given += seats[i];
    }
    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
    for (std::size_t i = 0; given < total; i = (i + 1) % order.size()) {
        if (weights[order[i]] > 0.0) {
            ++seats[order[i]];
            ++given;
        }
    }
    while (given > total) {
        // Rounding pushed the floors over; take back from the smallest remainders.
        for (auto it = order.rbegin(); it != order.rend() && given > total; ++it)
            if (seats[*it] > 0) {
                --seats[*it];
                --given;
            }
    }
    return seats;
}

std::vector<std::int64_t> FleetAllocation::per_bus() const {
    std::vector<std::int64_t> out(n_ev.empty() ? 0 : n_ev.front().size(), 0);
    for (const auto& row : n_ev)
        for (std::size_t j = 0; j < row.size(); ++j) out[j] += row[j];
    return out;
}

std::vector<std::int64_t> FleetAllocation::per_cluster() const {
    std::vector<std::int64_t> out;
    for (const auto& row : n_ev) out.push_back(std::accumulate(row.begin(), row.end(), std::int64_t{0}));
    return out;
}

std::vector<double> member_shares(const cluster::ClusterAggregates& aggregates) {
    double n = 0.0;
    for (const auto& c : aggregates.clusters) n += c.member_count;
    if (!(n > 0.0)) throw DataError("cluster aggregates: no members");
    std::vector<double> out;
    for (const auto& c : aggregates.clusters) out.push_back(c.member_count / n);
    return out;
}

FleetAllocation allocate_fleet(const std::vector<double>& bus_weights, const std::vector<double>& cluster_shares,
                               std::int64_t total_evs, double adoption_rate) {
    if (cluster_shares.empty()) throw ConfigError("fleet: no clusters");
    double s = 0.0;
    for (double c : cluster_shares) {
        if (!(c >= 0.0) || !std::isfinite(c)) throw ConfigError("fleet: cluster shares must be finite and >= 0");
        s += c;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ConfigError("fleet: cluster shares must sum to 1");
    if (!(adoption_rate > 0.0 && adoption_rate <= 1.0)) throw ConfigError("fleet: adoption rate must be in (0, 1]");
    FleetAllocation a;
    a.total = total_evs;
    a.adoption_rate = adoption_rate;
    a.n_ev.assign(cluster_shares.size(), std::vector<std::int64_t>(bus_weights.size(), 0));
    const auto by_bus = largest_remainder(bus_weights, total_evs);
    for (std::size_t j = 0; j < by_bus.size(); ++j) {
        const auto split = largest_remainder(cluster_shares, by_bus[j]);
        for (std::size_t i = 0; i < split.size(); ++i) a.n_ev[i][j] = split[i];
    }
    return a;
}

FleetAllocation allocate_fleet(const grid::Network& network, const cluster::ClusterAggregates& aggregates,
                               const std::vector<double>& cluster_shares, std::int64_t total_evs,
                               double adoption_rate) {
    if (cluster_shares.size() != aggregates.clusters.size())
        throw ConfigError("fleet: " + std::to_string(cluster_shares.size()) + " shares for " +
                          std::to_string(aggregates.clusters.size()) + " clusters");
    return allocate_fleet(grid::demand_distribution(network), cluster_shares, total_evs, adoption_rate);
}

double window_average(const ev::DayCurve& curve, UnixSeconds start, std::int64_t step_seconds) {
    if (step_seconds <= 0 || step_seconds % 60 != 0)
        throw ConfigError("timestep must be a positive whole number of minutes");
    const std::int64_t m0 = floor_div(start - floor_div(start, kSecondsPerDay) * kSecondsPerDay, 60);
    const std::int64_t n = step_seconds / 60;
    double sum = 0.0;
    for (std::int64_t k = 0; k < n; ++k) sum += curve[static_cast<std::size_t>((m0 + k) % kMinutesPerDay)];
    return sum / static_cast<double>(n);
}

ChargingBaseline charging_baseline(const cluster::ClusterAggregates& aggregates, const FleetAllocation& allocation,
                                   const grid::TimeAxis& time, std::size_t t, double s_base_mva) {
    if (allocation.n_ev.size() != aggregates.clusters.size())
        throw ConfigError("fleet allocation does not match the cluster model");
    const std::size_t nb = allocation.n_ev.empty() ? 0 : allocation.n_ev.front().size();
    ChargingBaseline out;
    out.n_charging.assign(aggregates.clusters.size(), std::vector<double>(nb, 0.0));
    out.ev_demand_pu.assign(nb, 0.0);
    for (std::size_t i = 0; i < aggregates.clusters.size(); ++i) {
        const auto& c = aggregates.clusters[i];
        const double frac = window_average(c.frac_charging, time.at(t), time.step_seconds);
        const double kw = window_average(c.centroid_profile_kw, time.at(t), time.step_seconds);
        for (std::size_t j = 0; j < nb; ++j) {
            const double n = static_cast<double>(allocation.n_ev[i][j]);
            out.n_charging[i][j] = n * frac;
            out.ev_demand_pu[j] += n * kw / 1000.0 / s_base_mva;
        }
    }
    return out;
}

double social_cost(const cluster::ClusterAggregates& aggregates, std::size_t cluster, const grid::TimeAxis& time,
                   std::size_t t, double epsilon_kw) {
    if (!(epsilon_kw > 0.0)) throw ConfigError("epsilon_kw must be positive");
    const double kw = window_average(aggregates.clusters.at(cluster).centroid_profile_kw, time.at(t), time.step_seconds);
    return 1.0 / (kw + epsilon_kw);
}

FlexSchedule build_schedule(const grid::PerUnitNetwork& network, const cluster::ClusterAggregates& aggregates,
                            const FleetAllocation& allocation, const ScheduleOptions& options) {
    const std::size_t nc = aggregates.clusters.size();
    const std::size_t nb = network.buses.size();
    if (allocation.n_ev.size() != nc) throw ConfigError("fleet allocation does not match the cluster model");
    for (const auto& row : allocation.n_ev)
        if (row.size() != nb) throw ConfigError("fleet allocation does not match the network");
    FlexSchedule s;
    s.n_clusters = nc;
    s.n_buses = nb;
    int clamped_total = 0;
    for (std::size_t t = 0; t < network.time.n_steps; ++t) {
        FlexStep step;
        auto base = charging_baseline(aggregates, allocation, network.time, t, network.s_base_mva);
        step.n_charging = std::move(base.n_charging);
        step.ev_demand_pu = options.baseline_ev_demand ? base.ev_demand_pu : std::vector<double>(nb, 0.0);
        step.n_remain.assign(nc, std::vector<double>(nb, 0.0));
        step.flex_ub.assign(nc, std::vector<double>(nb, 0.0));
        for (std::size_t i = 0; i < nc; ++i) {
            step.pi_flex.push_back(social_cost(aggregates, i, network.time, t, options.epsilon_kw));
            const double pmax_pu = aggregates.clusters[i].p_max_kw / 1000.0 / network.s_base_mva;
            for (std::size_t j = 0; j < nb; ++j) {
                double remain = static_cast<double>(allocation.n_ev[i][j]) - step.n_charging[i][j];
                if (remain < 0.0) {
                    remain = 0.0;
                    ++step.clamped;
                }
                step.n_remain[i][j] = remain;
                step.flex_ub[i][j] = remain * pmax_pu;
            }
        }
        clamped_total += step.clamped;
        s.steps.push_back(std::move(step));
    }
    if (clamped_total > 0) spdlog::warn("schedule: {} remaining-EV counts clamped at zero", clamped_total);
    return s;
}

void SimulationResult::accumulate() {
    const double dt = time.step_hours();
    curtailment_mwh = flex_energy_mwh = wind_available_mwh = 0.0;
    max_v_pu = max_exactness = 0.0;
    failures.clear();
    for (const auto& s : steps) {
        if (!s.ok()) {
            failures.push_back(s.t);
            continue;
        }
        for (double c : s.curtail_mw) curtailment_mwh += c * dt;
        for (double w : s.wind_available_mw) wind_available_mwh += w * dt;
        for (const auto& row : s.flex_mw)
            for (double f : row) flex_energy_mwh += f * dt;
        for (double v : s.v_pu) max_v_pu = std::max(max_v_pu, v);
        max_exactness = std::max(max_exactness, s.exactness);
    }
}

namespace {

SimulationResult run(const std::shared_ptr<const grid::PerUnitNetwork>& network, const FlexSchedule* schedule,
                     bool with_flex, const RunOptions& options, const std::string& label) {
    if (!network) throw ConfigError("simulation: no network");
    const auto& net = *network;
    const double sb = net.s_base_mva;
    const std::size_t t_end = std::min(options.t_end, net.time.n_steps);
    if (options.t_begin >= t_end) throw ConfigError("simulation: empty horizon window");
    if (schedule && schedule->steps.size() != net.time.n_steps)
        throw ConfigError("simulation: schedule does not cover the horizon");
    if (schedule && schedule->n_buses != net.buses.size())
        throw ConfigError("simulation: schedule does not match the network");

    SimulationResult out;
    out.label = label;
    out.time = net.time;
    for (const auto& b : net.buses) out.bus_ids.push_back(b.id);
    for (const auto& g : net.generators) out.generator_ids.push_back(g.id);
    out.n_clusters = schedule ? schedule->n_clusters : 0;
    const std::size_t nc = out.n_clusters;
    const std::size_t nb = net.buses.size();
    out.steps.resize(t_end - options.t_begin);

    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::size_t err_index = out.steps.size();
    std::exception_ptr err;

    auto work = [&] {
        for (std::size_t k = next++; k < out.steps.size(); k = next++) {
            const std::size_t t = options.t_begin + k;
            try {
                std::vector<opf::FlexBound> bounds;
                std::vector<double> pi;
                std::vector<double> extra;
                if (schedule) {
                    const auto& st = schedule->steps[t];
                    extra = st.ev_demand_pu;
                    if (with_flex) {
                        pi = st.pi_flex;
                        for (std::size_t i = 0; i < nc; ++i)
                            for (std::size_t j = 0; j < nb; ++j)
                                bounds.push_back({static_cast<int>(i), j, st.flex_ub[i][j]});
                    }
                }
                const auto inst = opf::build_instance(network, t, bounds, pi, options.loss_weight, extra);
                const auto sol = opf::solve_instance(inst, options.backend);

                StepResult r;
                r.t = t;
                r.status = sol.status;
                r.message = sol.message;
                for (double w : inst.gen_output) r.wind_available_mw.push_back(w * sb);
                for (std::size_t j = 0; j < nb; ++j) r.demand_mw.push_back(inst.demand_p[j] * sb);
                r.flex_mw.assign(nc, std::vector<double>(nb, 0.0));
                r.flex_ub_mw.assign(nc, std::vector<double>(nb, 0.0));
                // Reported decisions are clipped to their boxes; the solver may
                // sit a rounding error outside.
                auto clip = [](double v, double hi) { return std::clamp(v, 0.0, std::max(hi, 0.0)); };
                for (std::size_t f = 0; f < bounds.size(); ++f) {
                    r.flex_mw[static_cast<std::size_t>(bounds[f].cluster)][bounds[f].bus] =
                        clip(sol.flex[f], bounds[f].ub) * sb;
                    r.flex_ub_mw[static_cast<std::size_t>(bounds[f].cluster)][bounds[f].bus] = bounds[f].ub * sb;
                }
                for (std::size_t g = 0; g < net.generators.size(); ++g)
                    r.curtail_mw.push_back(clip(sol.curtail[g], inst.gen_output[g]) * sb);
                if (sol.status == opf::SolveStatus::optimal) {
                    const auto op = opf::recover_operating_point(sol, inst);
                    r.v_pu = op.v_pu;
                    r.losses_mw = op.total_loss_pu * sb;
                    r.inexact = !op.physical;
                    r.exactness = sol.exactness;
                    r.objective = sol.objective.total();
                    r.slack_p_mw = sol.slack_injection.real() * sb;
                    if (r.inexact) r.message = "relaxation gap above tolerance";
                } else {
                    r.v_pu.assign(nb, 0.0);
                }
                out.steps[k] = std::move(r);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (k < err_index) {
                    err_index = k;
                    err = std::current_exception();
                }
            }
        }
    };

    const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(out.steps.size())));
    if (jobs == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < jobs; ++i) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (err) std::rethrow_exception(err);

    out.accumulate();
    for (std::size_t t : out.failures) {
        const auto& s = out.steps[t - options.t_begin];
        spdlog::warn("{} run: step {} ({}) {}: {}", label, t, format_iso8601_utc(net.time.at(t)),
                     s.inexact ? "inexact" : opf::to_string(s.status), s.message);
    }
    return out;
}

}  // namespace

SimulationResult run_baseline(std::shared_ptr<const grid::PerUnitNetwork> network, const FlexSchedule* schedule,
                              const RunOptions& options) {
    return run(network, schedule, false, options, "baseline");
}

SimulationResult run_flex(std::shared_ptr<const grid::PerUnitNetwork> network, const FlexSchedule& schedule,
                          const RunOptions& options) {
    return run(network, &schedule, true, options, "flex");
}

double curtailment_reduction(const SimulationResult& baseline, const SimulationResult& flex) {
    if (baseline.steps.size() != flex.steps.size() || baseline.time.start != flex.time.start ||
        baseline.time.step_seconds != flex.time.step_seconds ||
        (!baseline.steps.empty() && baseline.steps.front().t != flex.steps.front().t))
        throw ConfigError("curtailment reduction: horizon mismatch");
    if (baseline.curtailment_mwh <= 0.0) return 0.0;
    return 100.0 * (1.0 - flex.curtailment_mwh / baseline.curtailment_mwh);
}

namespace {

using ojson = nlohmann::ordered_json;

int status_code(const StepResult& s) {
    if (s.ok()) return 0;
    if (s.status == opf::SolveStatus::optimal) return 1;  // inexact
    return s.status == opf::SolveStatus::infeasible ? 2 : 3;
}

ojson run_summary(const SimulationResult& r) {
    ojson j;
    j["curtailment_mwh"] = r.curtailment_mwh;
    j["wind_available_mwh"] = r.wind_available_mwh;
    j["flex_energy_mwh"] = r.flex_energy_mwh;
    j["max_v_pu"] = r.max_v_pu;
    j["max_exactness"] = r.max_exactness;
    j["n_steps"] = r.steps.size();
    j["n_failures"] = r.failures.size();
    ojson fails = ojson::array();
    for (std::size_t t : r.failures) {
        const auto& s = r.steps[t - r.steps.front().t];
        fails.push_back({{"t", t},
                         {"timestamp", format_iso8601_utc(r.time.at(t))},
                         {"status", s.inexact ? "inexact" : opf::to_string(s.status)},
                         {"message", s.message}});
    }
    j["failures"] = fails;
    return j;
}

}  // namespace

void write_results_bundle(const std::filesystem::path& dir, const SimulationResult& baseline,
                          const SimulationResult& flex, const BundleInfo& info) {
    std::filesystem::create_directories(dir);
    const double reduction = curtailment_reduction(baseline, flex);
    const auto& time = baseline.time;

    ojson summary;
    summary["schema"] = kResultSchema;
    try {
        summary["config"] = ojson::parse(info.config_echo_json);
    } catch (const ojson::exception&) {
        throw ConsistencyError("config echo is not valid JSON");
    }
    summary["horizon"] = {{"start", format_iso8601_utc(time.at(baseline.steps.front().t))},
                          {"step_minutes", time.step_seconds / 60},
                          {"t_begin", baseline.steps.front().t},
                          {"n_steps", baseline.steps.size()}};
    ojson per_bus = ojson::object();
    const auto bus_counts = info.fleet.per_bus();
    for (std::size_t j = 0; j < bus_counts.size() && j < baseline.bus_ids.size(); ++j)
        per_bus[baseline.bus_ids[j]] = bus_counts[j];
    summary["fleet"] = {{"total", info.fleet.total},
                        {"adoption_rate", info.fleet.adoption_rate},
                        {"per_cluster", info.fleet.per_cluster()},
                        {"per_bus", per_bus}};
    summary["baseline"] = run_summary(baseline);
    summary["flex"] = run_summary(flex);
    summary["curtailment_reduction_pct"] = reduction;
    {
        std::ofstream out(dir / "summary.json", std::ios::binary);
        if (!out) throw DataError("cannot write " + (dir / "summary.json").string());
        out << summary.dump(2) << '\n';
    }

    std::ofstream ts(dir / "timeseries.csv", std::ios::binary);
    if (!ts) throw DataError("cannot write " + (dir / "timeseries.csv").string());
    ts << "t,quantity,element,value\n";
    auto row = [&](const std::string& stamp, const std::string& q, const std::string& e, double v) {
        ts << stamp << ',' << q << ',' << e << ',' << csv::format_double(v) << '\n';
    };
    for (std::size_t k = 0; k < baseline.steps.size(); ++k) {
        const auto& b = baseline.steps[k];
        const std::string stamp = format_iso8601_utc(time.at(b.t));
        for (std::size_t g = 0; g < baseline.generator_ids.size(); ++g)
            row(stamp, "wind_available_mw", baseline.generator_ids[g], b.wind_available_mw[g]);
        for (std::size_t j = 0; j < baseline.bus_ids.size(); ++j)
            row(stamp, "demand_mw", baseline.bus_ids[j], b.demand_mw[j]);
        for (const SimulationResult* r : {&baseline, &flex}) {
            const auto& s = r->steps[k];
            const std::string p = r->label + ".";
            row(stamp, p + "status", "network", status_code(s));
            for (std::size_t g = 0; g < r->generator_ids.size(); ++g)
                row(stamp, p + "curtail_mw", r->generator_ids[g], s.curtail_mw[g]);
            for (std::size_t j = 0; j < r->bus_ids.size(); ++j) row(stamp, p + "v_pu", r->bus_ids[j], s.v_pu[j]);
            row(stamp, p + "losses_mw", "network", s.losses_mw);
            row(stamp, p + "slack_p_mw", "network", s.slack_p_mw);
            row(stamp, p + "exactness", "network", s.exactness);
            row(stamp, p + "objective", "network", s.objective);
        }
    }

    std::ofstream fc(dir / "flex_by_cluster.csv", std::ios::binary);
    if (!fc) throw DataError("cannot write " + (dir / "flex_by_cluster.csv").string());
    fc << "t,cluster,bus,mw\n";
    for (const auto& s : flex.steps) {
        if (!s.ok()) continue;
        const std::string stamp = format_iso8601_utc(time.at(s.t));
        for (std::size_t i = 0; i < flex.n_clusters; ++i)
            for (std::size_t j = 0; j < flex.bus_ids.size(); ++j) {
                if (s.flex_ub_mw[i][j] <= 0.0) continue;
                const std::string label = i < info.cluster_labels.size() ? info.cluster_labels[i] : std::to_string(i);
                fc << stamp << ',' << label << ',' << flex.bus_ids[j] << ',' << csv::format_double(s.flex_mw[i][j])
                   << '\n';
            }
    }
}

}  // namespace flexgrid::scenario
