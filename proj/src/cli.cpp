#include "flexgrid/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "json.hpp"

#include "flexgrid/clustering.hpp"
#include "flexgrid/config.hpp"
#include "flexgrid/csv.hpp"
#include "flexgrid/error.hpp"
#include "flexgrid/ev_data.hpp"
#include "flexgrid/grid_model.hpp"
#include "flexgrid/opf.hpp"
#include "flexgrid/rng.hpp"
#include "flexgrid/scenario.hpp"

namespace flexgrid::cli {

namespace {

template <typename F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const ConsistencyError& e) {
        err << "consistency error: " << e.what() << '\n';
        return kConsistency;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kUnexpected;
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

std::vector<ev::ChargingSession> load_sessions(const config::RunConfig& cfg) {
    if (cfg.synth) {
        ev::SynthSpec spec = *cfg.synth;
        spec.seed = cfg.synth_seed();
        return ev::synth_sessions(spec).sessions;
    }
    auto parsed = ev::parse_sessions(*cfg.paths.sessions, false);
    if (parsed.summary.n_rejected > 0)
        spdlog::warn("sessions: {} rows rejected in {}", parsed.summary.n_rejected, cfg.paths.sessions->string());
    return std::move(parsed.sessions);
}

}  // namespace

void configure_logging() {
    auto logger = spdlog::get("flexgrid");
    if (!logger) logger = spdlog::stderr_color_mt("flexgrid");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    spdlog::level::level_enum level = spdlog::level::warn;
    if (const char* env = std::getenv("FLEXGRID_LOG")) {
        const std::string v(env);
        if (v == "error")
            level = spdlog::level::err;
        else if (v == "warn")
            level = spdlog::level::warn;
        else if (v == "info")
            level = spdlog::level::info;
        else if (v == "debug")
            level = spdlog::level::debug;
        else
            spdlog::warn("FLEXGRID_LOG='{}' not recognised; using warn", v);
    }
    spdlog::set_level(level);
}

int cmd_cluster(const ClusterArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        auto cfg = config::load_run_config(args.config);
        if (args.seed) cfg.seed = *args.seed;
        const auto out_dir = args.out_dir.value_or(cfg.paths.output_dir);

        const auto sessions = load_sessions(cfg);
        if (sessions.empty()) throw DataError("no charging sessions");
        const auto set = ev::build_profiles(sessions, cfg.clustering.day_filter);
        if (!set.skipped.empty())
            spdlog::warn("{} users skipped (no days in filter or never charged)", set.skipped.size());
        if (set.profiles.empty()) throw DataError("no user profiles after filtering");
        spdlog::info("{} sessions, {} user profiles", sessions.size(), set.profiles.size());

        const auto features = cluster::make_features(set.profiles, cfg.clustering.mode);
        const auto& cc = cfg.clustering;
        const int n = static_cast<int>(features.size());
        cluster::ClusterModel model;
        std::vector<cluster::SelectKRow> table;
        if (cc.k) {
            if (*cc.k > n)
                throw ConfigError("k = " + std::to_string(*cc.k) + " exceeds the number of users (" +
                                  std::to_string(n) + ")");
            // Best of seeds_per_k runs, as in the sweep.
            for (int s = 0; s < cc.seeds_per_k; ++s) {
                auto m = cluster::kmeans(features, {*cc.k, mix_keys(cfg.clustering_seed(), static_cast<std::uint64_t>(s)),
                                                    cc.max_iter, cc.tol});
                if (s == 0 || m.inertia_j_kw2 < model.inertia_j_kw2) model = std::move(m);
            }
            const double sil = *cc.k >= 2 && *cc.k < n ? cluster::silhouette(features, model.assignments, cfg.clustering_seed()) : 0.0;
            table.push_back({*cc.k, model.inertia_j_kw2, sil});
        } else {
            const auto [k_min, k_max] = *cc.k_range;
            if (k_max > n - 1)
                throw ConfigError("k_range upper end " + std::to_string(k_max) + " exceeds n - 1 = " +
                                  std::to_string(n - 1) + " users");
            auto res = cluster::select_k(features, k_min, k_max, cc.seeds_per_k, cfg.clustering_seed(), cc.max_iter,
                                         cc.tol);
            table = res.table;
            for (std::size_t i = 0; i < res.table.size(); ++i)
                if (res.table[i].k == res.k_best) model = res.models[i];
        }

        std::map<std::string, ev::EvProfile> by_user;
        std::map<std::string, double> pmax;
        for (const auto& p : set.profiles) {
            by_user.emplace(p.user_id, p);
            pmax.emplace(p.user_id, p.p_max_kw);
        }
        cluster::ClusterDocument doc;
        doc.model = model;
        doc.aggregates = cluster::cluster_aggregates(model, by_user, pmax);
        doc.day_filter = ev::to_string(cc.day_filter);

        std::filesystem::create_directories(out_dir);
        cluster::write_cluster_document(out_dir / "clusters.json", doc);
        write_text(out_dir / "diagnostics.csv", cluster::diagnostics_csv(table));
        out << "users " << n << ", mode " << cluster::to_string(model.mode) << ", k " << model.k
            << ", inertia_j_kw2 " << csv::format_double(model.inertia_j_kw2) << '\n'
            << "wrote " << (out_dir / "clusters.json").string() << " and " << (out_dir / "diagnostics.csv").string()
            << '\n';
        return static_cast<int>(kOk);
    });
}

int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto cfg = config::load_run_config(args.config);
        const auto out_dir = args.out_dir.value_or(cfg.paths.output_dir);

        auto net = grid::load_network(cfg.paths.network);
        if (cfg.opf.s_base_mva) net.s_base_mva = *cfg.opf.s_base_mva;
        for (auto& b : net.buses) {
            if (cfg.opf.v_min_pu) b.v_min_pu = *cfg.opf.v_min_pu;
            if (cfg.opf.v_max_pu) b.v_max_pu = *cfg.opf.v_max_pu;
            if (b.is_slack && cfg.opf.slack_import_max_mw) b.p_import_max_mw = *cfg.opf.slack_import_max_mw;
            if (b.is_slack && cfg.opf.slack_export_max_mw) b.p_export_max_mw = *cfg.opf.slack_export_max_mw;
        }
        try {
            grid::validate(net);
        } catch (const DataError& e) {
            throw ConfigError(std::string("overrides make the network invalid: ") + e.what());
        }
        if (net.time.step_seconds != static_cast<std::int64_t>(cfg.scenario.timestep_minutes) * 60)
            throw ConfigError("scenario.timestep_minutes = " + std::to_string(cfg.scenario.timestep_minutes) +
                              " but the network profiles use " + std::to_string(net.time.step_seconds / 60) +
                              " minute steps");

        const auto doc = cluster::read_cluster_document(args.clusters);
        const auto shares = cfg.scenario.cluster_shares.value_or(scenario::member_shares(doc.aggregates));
        const auto fleet = scenario::allocate_fleet(net, doc.aggregates, shares, cfg.scenario.ev_count(),
                                                    cfg.scenario.effective_adoption_rate());

        auto pu = std::make_shared<const grid::PerUnitNetwork>(grid::to_per_unit(net));
        scenario::ScheduleOptions so;
        so.epsilon_kw = cfg.opf.epsilon_kw;
        so.baseline_ev_demand = cfg.scenario.baseline_ev_demand;
        const auto schedule = scenario::build_schedule(*pu, doc.aggregates, fleet, so);

        scenario::RunOptions ro;
        ro.loss_weight = cfg.opf.loss_weight();
        ro.jobs = std::max(1u, args.jobs);
        ro.t_begin = cfg.scenario.window_start;
        if (ro.t_begin >= pu->time.n_steps)
            throw ConfigError("scenario.window_start " + std::to_string(ro.t_begin) + " is outside the horizon of " +
                              std::to_string(pu->time.n_steps) + " steps");
        if (cfg.scenario.window_steps) ro.t_end = ro.t_begin + *cfg.scenario.window_steps;
        ro.backend = conic::default_backend_factory(cfg.opf.solver);

        {
            const auto loose = opf::loose_relaxation_lines(opf::build_instance(pu, ro.t_begin, {}, {}, ro.loss_weight));
            if (!loose.empty())
                spdlog::warn("loss weight {} may leave the relaxation inexact on {} line(s), e.g. '{}'", ro.loss_weight,
                             loose.size(), loose.front());
        }

        const auto baseline = scenario::run_baseline(pu, &schedule, ro);
        const auto flex = scenario::run_flex(pu, schedule, ro);

        scenario::BundleInfo info;
        info.config_echo_json = config::echo_json(cfg);
        info.fleet = fleet;
        for (std::size_t i = 0; i < doc.aggregates.clusters.size(); ++i) info.cluster_labels.push_back(std::to_string(i));
        scenario::write_results_bundle(out_dir, baseline, flex, info);

        const double reduction = scenario::curtailment_reduction(baseline, flex);
        out << "steps " << baseline.steps.size() << ", EVs " << fleet.total << '\n'
            << "baseline curtailment " << csv::format_double(baseline.curtailment_mwh) << " MWh\n"
            << "flex curtailment " << csv::format_double(flex.curtailment_mwh) << " MWh\n"
            << "reduction " << csv::format_double(reduction) << " %\n"
            << "wrote " << out_dir.string() << '\n';
        const std::size_t failed = baseline.failures.size() + flex.failures.size();
        if (failed > 0) {
            err << failed << " timestep solve(s) failed; see summary.json\n";
            return static_cast<int>(kStepFailure);
        }
        return static_cast<int>(kOk);
    });
}

namespace {

struct Recomputed {
    double curtailment_mwh = 0.0;
    double max_v_pu = 0.0;
    double max_exactness = 0.0;
    std::size_t n_failures = 0;
    std::size_t n_steps = 0;
};

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path, const std::string& header) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("missing " + path.string());
    std::string line;
    if (!std::getline(in, line) || csv::trim_eol(line) != header)
        throw DataError(path.string() + ": malformed header, expected '" + header + "'");
    std::vector<std::vector<std::string>> rows;
    const std::size_t width = csv::split(header).size();
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = csv::trim_eol(line);
        if (t.empty()) continue;
        const auto f = csv::split(t);
        if (f.size() != width) throw DataError(path.string() + ": line " + std::to_string(line_no) + ": wrong field count");
        rows.emplace_back(f.begin(), f.end());
    }
    return rows;
}

bool close(double a, double b) { return std::abs(a - b) <= 1e-6 * std::max(1.0, std::abs(b)); }

}  // namespace

int cmd_report(const std::filesystem::path& dir, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        using json = nlohmann::json;
        json summary;
        {
            std::ifstream in(dir / "summary.json", std::ios::binary);
            if (!in) throw DataError("missing " + (dir / "summary.json").string());
            try {
                in >> summary;
            } catch (const json::exception& e) {
                throw DataError("corrupt summary.json: " + std::string(e.what()));
            }
        }
        if (!summary.is_object() || summary.value("schema", "") != scenario::kResultSchema)
            throw DataError(std::string("summary.json: schema mismatch, expected ") + scenario::kResultSchema);

        std::map<std::string, Recomputed> runs{{"baseline", {}}, {"flex", {}}};
        double dt = 0.0, flex_energy = 0.0, reduction = 0.0;
        std::map<std::string, json> sums;
        try {
            dt = summary.at("horizon").at("step_minutes").get<double>() / 60.0;
            for (auto& [name, r] : runs) {
                sums[name] = summary.at(name);
                (void)r;
            }
            reduction = summary.at("curtailment_reduction_pct").get<double>();
        } catch (const json::exception& e) {
            throw DataError("summary.json: " + std::string(e.what()));
        }

        const auto ts = read_csv(dir / "timeseries.csv", "t,quantity,element,value");
        const auto fc = read_csv(dir / "flex_by_cluster.csv", "t,cluster,bus,mw");

        // status per (run, timestamp) first, then the quantities of good steps
        std::map<std::pair<std::string, std::string>, int> status;
        for (const auto& row : ts) {
            const auto dot = row[1].find('.');
            if (dot == std::string::npos || row[1].substr(dot + 1) != "status") continue;
            const std::string run = row[1].substr(0, dot);
            if (!runs.count(run)) throw DataError("timeseries.csv: unknown run '" + run + "'");
            status[{run, row[0]}] = static_cast<int>(csv::parse_double(row[3], "status"));
        }
        for (const auto& [key, code] : status) {
            auto& r = runs[key.first];
            ++r.n_steps;
            if (code != 0) ++r.n_failures;
        }
        for (const auto& row : ts) {
            const auto dot = row[1].find('.');
            if (dot == std::string::npos) continue;
            const std::string run = row[1].substr(0, dot);
            const std::string qty = row[1].substr(dot + 1);
            auto it = status.find({run, row[0]});
            if (it == status.end()) throw ConsistencyError("timeseries.csv: step " + row[0] + " of " + run + " has no status");
            if (it->second != 0) continue;
            const double v = csv::parse_double(row[3], qty);
            auto& r = runs[run];
            if (qty == "curtail_mw")
                r.curtailment_mwh += v * dt;
            else if (qty == "v_pu")
                r.max_v_pu = std::max(r.max_v_pu, v);
            else if (qty == "exactness")
                r.max_exactness = std::max(r.max_exactness, v);
        }
        for (const auto& row : fc) {
            auto it = status.find({"flex", row[0]});
            if (it == status.end() || it->second != 0)
                throw ConsistencyError("flex_by_cluster.csv: row for a step without a good flex solve: " + row[0]);
            flex_energy += csv::parse_double(row[3], "mw") * dt;
        }

        std::vector<std::string> mismatches;
        auto expect = [&](const std::string& what, double recomputed, double stated) {
            if (!close(recomputed, stated))
                mismatches.push_back(what + ": recomputed " + csv::format_double(recomputed) + ", summary " +
                                     csv::format_double(stated));
        };
        try {
            for (const auto& [name, r] : runs) {
                const auto& s = sums[name];
                expect(name + ".curtailment_mwh", r.curtailment_mwh, s.at("curtailment_mwh").get<double>());
                expect(name + ".max_v_pu", r.max_v_pu, s.at("max_v_pu").get<double>());
                expect(name + ".max_exactness", r.max_exactness, s.at("max_exactness").get<double>());
                expect(name + ".n_failures", static_cast<double>(r.n_failures), s.at("n_failures").get<double>());
                expect(name + ".n_steps", static_cast<double>(r.n_steps), s.at("n_steps").get<double>());
            }
            expect("flex.flex_energy_mwh", flex_energy, sums["flex"].at("flex_energy_mwh").get<double>());
        } catch (const json::exception& e) {
            throw DataError("summary.json: " + std::string(e.what()));
        }
        const double base = runs["baseline"].curtailment_mwh;
        const double recomputed_reduction = base > 0.0 ? 100.0 * (1.0 - runs["flex"].curtailment_mwh / base) : 0.0;
        expect("curtailment_reduction_pct", recomputed_reduction, reduction);
        if (!mismatches.empty()) {
            std::string msg = "bundle is inconsistent:";
            for (const auto& m : mismatches) msg += "\n  " + m;
            throw ConsistencyError(msg);
        }

        std::ostringstream t;
        t << std::fixed;
        t << "results: " << dir.string() << '\n';
        t << "horizon: " << summary["horizon"].value("start", "") << ", " << runs["baseline"].n_steps << " x "
          << summary["horizon"].value("step_minutes", 0) << " min\n\n";
        t << std::left << std::setw(22) << "" << std::right << std::setw(14) << "baseline" << std::setw(14) << "flex"
          << '\n';
        auto line = [&](const std::string& label, double a, double b, int prec) {
            t << std::left << std::setw(22) << label << std::right << std::setprecision(prec) << std::setw(14) << a
              << std::setw(14) << b << '\n';
        };
        const auto& b = runs["baseline"];
        const auto& f = runs["flex"];
        line("curtailment [MWh]", b.curtailment_mwh, f.curtailment_mwh, 3);
        line("flex energy [MWh]", 0.0, flex_energy, 3);
        line("max |V| [p.u.]", b.max_v_pu, f.max_v_pu, 5);
        t << std::left << std::setw(22) << "max exactness gap" << std::right << std::scientific << std::setprecision(2)
          << std::setw(14) << b.max_exactness << std::setw(14) << f.max_exactness << std::fixed << '\n';
        t << std::left << std::setw(22) << "failed steps" << std::right << std::setw(14) << b.n_failures
          << std::setw(14) << f.n_failures << '\n';
        t << "\ncurtailment reduction: " << std::setprecision(2) << recomputed_reduction << " %\n";
        t << "cross-check: summary.json, timeseries.csv and flex_by_cluster.csv agree\n";
        out << t.str();
        return static_cast<int>(kOk);
    });
}

}  // namespace flexgrid::cli
