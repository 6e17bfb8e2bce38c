#include "flexgrid/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include "toml.hpp"

#include "json.hpp"

#include "flexgrid/error.hpp"
#include "flexgrid/rng.hpp"
#include "flexgrid/time.hpp"

namespace flexgrid::config {

namespace {

void check_keys(const toml::table& t, const std::string& where, std::initializer_list<std::string_view> allowed) {
    const std::set<std::string_view> ok(allowed);
    for (const auto& [key, node] : t) {
        (void)node;
        if (!ok.count(key.str()))
            throw ConfigError("config: unknown key '" + std::string(key.str()) + "' in " + where);
    }
}

const toml::table* sub_table(const toml::table& t, std::string_view key, const std::string& where) {
    const toml::node* n = t.get(key);
    if (!n) return nullptr;
    if (!n->is_table()) throw ConfigError("config: '" + std::string(key) + "' in " + where + " must be a table");
    return n->as_table();
}

std::optional<double> get_double(const toml::table& t, std::string_view key) {
    const toml::node* n = t.get(key);
    if (!n) return std::nullopt;
    if (auto v = n->value<double>(); v && (n->is_floating_point() || n->is_integer())) {
        if (!std::isfinite(*v)) throw ConfigError("config: '" + std::string(key) + "' must be finite");
        return v;
    }
    throw ConfigError("config: '" + std::string(key) + "' must be a number");
}

std::optional<std::int64_t> get_int(const toml::table& t, std::string_view key) {
    const toml::node* n = t.get(key);
    if (!n) return std::nullopt;
    if (!n->is_integer()) throw ConfigError("config: '" + std::string(key) + "' must be an integer");
    return n->value<std::int64_t>();
}

std::optional<std::string> get_string(const toml::table& t, std::string_view key) {
    const toml::node* n = t.get(key);
    if (!n) return std::nullopt;
    if (!n->is_string()) throw ConfigError("config: '" + std::string(key) + "' must be a string");
    return n->value<std::string>();
}

std::optional<bool> get_bool(const toml::table& t, std::string_view key) {
    const toml::node* n = t.get(key);
    if (!n) return std::nullopt;
    if (!n->is_boolean()) throw ConfigError("config: '" + std::string(key) + "' must be true or false");
    return n->value<bool>();
}

std::optional<std::vector<double>> get_double_array(const toml::table& t, std::string_view key) {
    const toml::node* n = t.get(key);
    if (!n) return std::nullopt;
    const toml::array* arr = n->as_array();
    if (!arr) throw ConfigError("config: '" + std::string(key) + "' must be an array");
    std::vector<double> out;
    for (const auto& e : *arr) {
        auto v = e.value<double>();
        if (!v || !(e.is_floating_point() || e.is_integer()) || !std::isfinite(*v))
            throw ConfigError("config: '" + std::string(key) + "' must hold numbers");
        out.push_back(*v);
    }
    return out;
}

int positive_int(std::optional<std::int64_t> v, int fallback, const char* what) {
    if (!v) return fallback;
    if (*v < 1 || *v > 1'000'000'000) throw ConfigError(std::string("config: ") + what + " must be a positive integer");
    return static_cast<int>(*v);
}

double positive(std::optional<double> v, double fallback, const char* what) {
    if (!v) return fallback;
    if (!(*v > 0.0)) throw ConfigError(std::string("config: ") + what + " must be positive");
    return *v;
}

std::int64_t parse_day(const std::string& text) {
    // YYYY-MM-DD
    if (text.size() != 10 || text[4] != '-' || text[7] != '-')
        throw ConfigError("config: start_day must be YYYY-MM-DD, got '" + text + "'");
    try {
        return floor_div(parse_iso8601_utc(text + "T00:00:00Z"), kSecondsPerDay);
    } catch (const Error&) {
        throw ConfigError("config: invalid start_day '" + text + "'");
    }
}

ev::SynthSpec parse_synth(const toml::table& t) {
    check_keys(t, "[synth]", {"n_users", "days", "start_day", "archetype"});
    ev::SynthSpec s;
    s.n_users = positive_int(get_int(t, "n_users"), 0, "synth.n_users");
    if (s.n_users == 0) throw ConfigError("config: synth.n_users is required");
    s.days = positive_int(get_int(t, "days"), 28, "synth.days");
    s.start_day = parse_day(get_string(t, "start_day").value_or("2021-05-03"));
    const toml::node* arch = t.get("archetype");
    const toml::array* arr = arch ? arch->as_array() : nullptr;
    if (!arr || arr->empty()) throw ConfigError("config: [[synth.archetype]] entries are required");
    for (const auto& node : *arr) {
        const toml::table* a = node.as_table();
        if (!a) throw ConfigError("config: synth.archetype entries must be tables");
        check_keys(*a, "[[synth.archetype]]",
                   {"name", "share", "start_hour_mean", "start_hour_sd", "duration_h_mean", "duration_h_sd",
                    "power_kw", "power_sd_kw", "charge_prob", "weekend_charge_prob"});
        ev::Archetype x;
        x.name = get_string(*a, "name").value_or("archetype" + std::to_string(s.archetypes.size()));
        x.start_hour_mean = get_double(*a, "start_hour_mean").value_or(x.start_hour_mean);
        x.start_hour_sd = get_double(*a, "start_hour_sd").value_or(x.start_hour_sd);
        x.duration_h_mean = get_double(*a, "duration_h_mean").value_or(x.duration_h_mean);
        x.duration_h_sd = get_double(*a, "duration_h_sd").value_or(x.duration_h_sd);
        x.power_kw = get_double(*a, "power_kw").value_or(x.power_kw);
        x.power_sd_kw = get_double(*a, "power_sd_kw").value_or(x.power_sd_kw);
        x.charge_prob = get_double(*a, "charge_prob").value_or(x.charge_prob);
        x.weekend_charge_prob = get_double(*a, "weekend_charge_prob").value_or(x.weekend_charge_prob);
        const auto share = get_double(*a, "share");
        if (!share) throw ConfigError("config: archetype '" + x.name + "' needs a share");
        s.archetypes.push_back(x);
        s.mix.push_back(*share);
    }
    return s;
}

}  // namespace

std::int64_t ScenarioConfig::ev_count() const {
    if (adoption_count) return *adoption_count;
    return static_cast<std::int64_t>(std::llround(adoption_rate.value_or(1.0) * static_cast<double>(fleet_total.value_or(0))));
}

double ScenarioConfig::effective_adoption_rate() const { return adoption_rate.value_or(1.0); }

std::uint64_t RunConfig::clustering_seed() const { return sub_seed(seed, "clustering"); }
std::uint64_t RunConfig::synth_seed() const { return sub_seed(seed, "synth"); }

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "config: " << e.description() << " at line " << e.source().begin.line;
        throw ConfigError(msg.str());
    }
    check_keys(root, "top level", {"seed", "paths", "synth", "clustering", "opf", "scenario"});

    RunConfig cfg;
    if (auto s = get_int(root, "seed")) {
        if (*s < 0) throw ConfigError("config: seed must be non-negative");
        cfg.seed = static_cast<std::uint64_t>(*s);
    }

    cfg.paths.base_dir = base_dir;
    const toml::table* paths = sub_table(root, "paths", "top level");
    if (!paths) throw ConfigError("config: [paths] is required");
    check_keys(*paths, "[paths]", {"sessions", "network", "output_dir"});
    if (auto s = get_string(*paths, "sessions")) cfg.paths.sessions = base_dir / *s;
    cfg.paths.network = base_dir / get_string(*paths, "network").value_or("");
    if (!get_string(*paths, "network")) throw ConfigError("config: paths.network is required");
    cfg.paths.output_dir = base_dir / get_string(*paths, "output_dir").value_or("out");

    if (const toml::table* synth = sub_table(root, "synth", "top level")) cfg.synth = parse_synth(*synth);
    if (cfg.paths.sessions.has_value() == cfg.synth.has_value())
        throw ConfigError("config: give exactly one of paths.sessions or [synth]");

    if (const toml::table* c = sub_table(root, "clustering", "top level")) {
        check_keys(*c, "[clustering]", {"mode", "k", "k_range", "seeds_per_k", "day_filter", "max_iter", "tol"});
        try {
            if (auto m = get_string(*c, "mode")) cfg.clustering.mode = cluster::parse_feature_mode(*m);
            if (auto d = get_string(*c, "day_filter")) cfg.clustering.day_filter = ev::parse_day_filter(*d);
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
        if (auto k = get_int(*c, "k")) cfg.clustering.k = positive_int(k, 1, "clustering.k");
        if (auto r = get_double_array(*c, "k_range")) {
            if (r->size() != 2 || (*r)[0] != std::floor((*r)[0]) || (*r)[1] != std::floor((*r)[1]))
                throw ConfigError("config: clustering.k_range must be [k_min, k_max]");
            cfg.clustering.k_range = {static_cast<int>((*r)[0]), static_cast<int>((*r)[1])};
            if (cfg.clustering.k_range->first > cfg.clustering.k_range->second)
                throw ConfigError("config: clustering.k_range is empty");
        }
        cfg.clustering.seeds_per_k = positive_int(get_int(*c, "seeds_per_k"), cfg.clustering.seeds_per_k,
                                                  "clustering.seeds_per_k");
        cfg.clustering.max_iter = positive_int(get_int(*c, "max_iter"), cfg.clustering.max_iter, "clustering.max_iter");
        cfg.clustering.tol = positive(get_double(*c, "tol"), cfg.clustering.tol, "clustering.tol");
    }
    if (cfg.clustering.k.has_value() == cfg.clustering.k_range.has_value())
        throw ConfigError("config: give exactly one of clustering.k or clustering.k_range");

    if (const toml::table* o = sub_table(root, "opf", "top level")) {
        check_keys(*o, "[opf]",
                   {"m_t", "epsilon_kw", "s_base_mva", "v_min_pu", "v_max_pu", "slack_import_max_mw",
                    "slack_export_max_mw", "solver"});
        cfg.opf.m_t = positive(get_double(*o, "m_t"), cfg.opf.m_t, "opf.m_t");
        cfg.opf.epsilon_kw = positive(get_double(*o, "epsilon_kw"), cfg.opf.epsilon_kw, "opf.epsilon_kw");
        if (auto v = get_double(*o, "s_base_mva")) cfg.opf.s_base_mva = positive(v, 0.0, "opf.s_base_mva");
        if (auto v = get_double(*o, "v_min_pu")) cfg.opf.v_min_pu = positive(v, 0.0, "opf.v_min_pu");
        if (auto v = get_double(*o, "v_max_pu")) cfg.opf.v_max_pu = positive(v, 0.0, "opf.v_max_pu");
        if (cfg.opf.v_min_pu && cfg.opf.v_max_pu && !(*cfg.opf.v_min_pu < *cfg.opf.v_max_pu))
            throw ConfigError("config: opf.v_min_pu must be below opf.v_max_pu");
        for (auto [key, dst] : {std::pair{"slack_import_max_mw", &cfg.opf.slack_import_max_mw},
                                std::pair{"slack_export_max_mw", &cfg.opf.slack_export_max_mw}}) {
            if (auto v = get_double(*o, key)) {
                if (*v < 0.0) throw ConfigError(std::string("config: opf.") + key + " must be >= 0");
                *dst = v;
            }
        }
        if (const toml::table* s = sub_table(*o, "solver", "[opf]")) {
            check_keys(*s, "[opf.solver]", {"feastol", "abstol", "reltol", "fallback_tol", "max_iter", "max_attempts"});
            auto& st = cfg.opf.solver;
            st.feastol = positive(get_double(*s, "feastol"), st.feastol, "opf.solver.feastol");
            st.abstol = positive(get_double(*s, "abstol"), st.abstol, "opf.solver.abstol");
            st.reltol = positive(get_double(*s, "reltol"), st.reltol, "opf.solver.reltol");
            st.fallback_tol = positive(get_double(*s, "fallback_tol"), st.fallback_tol, "opf.solver.fallback_tol");
            st.max_iter = positive_int(get_int(*s, "max_iter"), st.max_iter, "opf.solver.max_iter");
            st.max_attempts = positive_int(get_int(*s, "max_attempts"), st.max_attempts, "opf.solver.max_attempts");
        }
    }

    if (const toml::table* s = sub_table(root, "scenario", "top level")) {
        check_keys(*s, "[scenario]",
                   {"adoption_count", "adoption_rate", "fleet_total", "cluster_shares", "timestep_minutes",
                    "window_start", "window_steps", "baseline_ev_demand"});
        auto& sc = cfg.scenario;
        sc.adoption_count = get_int(*s, "adoption_count");
        sc.adoption_rate = get_double(*s, "adoption_rate");
        sc.fleet_total = get_int(*s, "fleet_total");
        if (sc.adoption_count && *sc.adoption_count < 0) throw ConfigError("config: scenario.adoption_count must be >= 0");
        if (sc.fleet_total && *sc.fleet_total < 0) throw ConfigError("config: scenario.fleet_total must be >= 0");
        if (sc.adoption_rate && !(*sc.adoption_rate > 0.0 && *sc.adoption_rate <= 1.0))
            throw ConfigError("config: scenario.adoption_rate must be in (0, 1]");
        if (sc.adoption_count && (sc.adoption_rate || sc.fleet_total))
            throw ConfigError("config: give scenario.adoption_count or adoption_rate with fleet_total, not both");
        if (!sc.adoption_count && !(sc.adoption_rate && sc.fleet_total))
            throw ConfigError("config: scenario needs adoption_count, or adoption_rate with fleet_total");
        sc.cluster_shares = get_double_array(*s, "cluster_shares");
        sc.timestep_minutes = positive_int(get_int(*s, "timestep_minutes"), sc.timestep_minutes, "scenario.timestep_minutes");
        if (auto w = get_int(*s, "window_start")) {
            if (*w < 0) throw ConfigError("config: scenario.window_start must be >= 0");
            sc.window_start = static_cast<std::size_t>(*w);
        }
        if (auto w = get_int(*s, "window_steps"))
            sc.window_steps = static_cast<std::size_t>(positive_int(w, 1, "scenario.window_steps"));
        sc.baseline_ev_demand = get_bool(*s, "baseline_ev_demand").value_or(sc.baseline_ev_demand);
    } else {
        throw ConfigError("config: [scenario] is required");
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), path.parent_path());
}

std::string echo_json(const RunConfig& cfg) {
    using ojson = nlohmann::ordered_json;
    auto rel = [&](const std::filesystem::path& p) { return p.lexically_relative(cfg.paths.base_dir).generic_string(); };
    auto opt = [](const auto& v) -> ojson { return v ? ojson(*v) : ojson(nullptr); };
    ojson j;
    j["seed"] = cfg.seed;
    j["paths"] = {{"network", rel(cfg.paths.network)},
                  {"sessions", cfg.paths.sessions ? ojson(rel(*cfg.paths.sessions)) : ojson(nullptr)}};
    if (cfg.synth) {
        ojson arch = ojson::array();
        for (std::size_t i = 0; i < cfg.synth->archetypes.size(); ++i) {
            const auto& a = cfg.synth->archetypes[i];
            arch.push_back({{"name", a.name},
                            {"share", cfg.synth->mix[i]},
                            {"start_hour_mean", a.start_hour_mean},
                            {"start_hour_sd", a.start_hour_sd},
                            {"duration_h_mean", a.duration_h_mean},
                            {"duration_h_sd", a.duration_h_sd},
                            {"power_kw", a.power_kw},
                            {"power_sd_kw", a.power_sd_kw},
                            {"charge_prob", a.charge_prob},
                            {"weekend_charge_prob", a.weekend_charge_prob}});
        }
        j["synth"] = {{"n_users", cfg.synth->n_users},
                      {"days", cfg.synth->days},
                      {"start_day", format_iso8601_utc(cfg.synth->start_day * kSecondsPerDay).substr(0, 10)},
                      {"archetype", arch}};
    }
    const auto& c = cfg.clustering;
    j["clustering"] = {{"mode", cluster::to_string(c.mode)},
                       {"k", opt(c.k)},
                       {"k_range", c.k_range ? ojson::array({c.k_range->first, c.k_range->second}) : ojson(nullptr)},
                       {"seeds_per_k", c.seeds_per_k},
                       {"day_filter", ev::to_string(c.day_filter)},
                       {"max_iter", c.max_iter},
                       {"tol", c.tol}};
    const auto& o = cfg.opf;
    j["opf"] = {{"m_t", o.m_t},
                {"epsilon_kw", o.epsilon_kw},
                {"s_base_mva", opt(o.s_base_mva)},
                {"v_min_pu", opt(o.v_min_pu)},
                {"v_max_pu", opt(o.v_max_pu)},
                {"slack_import_max_mw", opt(o.slack_import_max_mw)},
                {"slack_export_max_mw", opt(o.slack_export_max_mw)},
                {"solver",
                 {{"feastol", o.solver.feastol},
                  {"abstol", o.solver.abstol},
                  {"reltol", o.solver.reltol},
                  {"fallback_tol", o.solver.fallback_tol},
                  {"max_iter", o.solver.max_iter},
                  {"max_attempts", o.solver.max_attempts}}}};
    const auto& s = cfg.scenario;
    j["scenario"] = {{"adoption_count", opt(s.adoption_count)},
                     {"adoption_rate", opt(s.adoption_rate)},
                     {"fleet_total", opt(s.fleet_total)},
                     {"ev_count", s.ev_count()},
                     {"cluster_shares", opt(s.cluster_shares)},
                     {"timestep_minutes", s.timestep_minutes},
                     {"window_start", s.window_start},
                     {"window_steps", opt(s.window_steps)},
                     {"baseline_ev_demand", s.baseline_ev_demand}};
    return j.dump();
}

}  // namespace flexgrid::config
