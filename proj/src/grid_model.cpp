#include "flexgrid/grid_model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "flexgrid/csv.hpp"
#include "flexgrid/error.hpp"

namespace flexgrid::grid {

using json = nlohmann::json;

std::size_t Network::bus_index(const std::string& id) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].id == id) return i;
    throw DataError("unknown bus '" + id + "'");
}

std::vector<double> Network::demand_at(std::size_t t) const {
    std::vector<double> out(buses.size(), 0.0);
    for (const auto& d : demand) out[bus_index(d.bus)] += d.p_mw.at(t);
    return out;
}

namespace {

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
    while (parent[i] != i) {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    return i;
}

void check_series(const std::string& what, const std::vector<double>& series, std::size_t n_steps) {
    if (series.size() != n_steps)
        throw DataError(what + ": horizon mismatch (" + std::to_string(series.size()) + " steps, expected " +
                        std::to_string(n_steps) + ")");
    for (double v : series)
        if (!std::isfinite(v)) throw DataError(what + ": non-finite value");
}

}  // namespace

void validate(Network& net) {
    if (!(net.s_base_mva > 0.0)) throw DataError("network: s_base_mva must be positive");
    if (!(net.load_power_factor > 0.0 && net.load_power_factor <= 1.0))
        throw DataError("network: load_power_factor must be in (0, 1]");
    if (net.buses.empty()) throw DataError("network: no buses");

    std::map<std::string, std::size_t> index;
    std::size_t n_slack = 0;
    for (std::size_t i = 0; i < net.buses.size(); ++i) {
        const Bus& b = net.buses[i];
        if (!index.emplace(b.id, i).second) throw DataError("network: duplicate bus '" + b.id + "'");
        if (!(b.base_kv > 0.0)) throw DataError("bus '" + b.id + "': base_kv must be positive");
        if (!(0.0 < b.v_min_pu && b.v_min_pu < b.v_max_pu))
            throw DataError("bus '" + b.id + "': require 0 < v_min_pu < v_max_pu");
        if (b.is_slack) {
            ++n_slack;
            net.topology.slack = i;
            if (!(b.v_set_pu >= b.v_min_pu && b.v_set_pu <= b.v_max_pu))
                throw DataError("bus '" + b.id + "': v_set_pu outside voltage bounds");
            if (!(b.p_import_max_mw >= 0.0) || !(b.p_export_max_mw >= 0.0))
                throw DataError("bus '" + b.id + "': slack limits must be non-negative");
        }
    }
    if (n_slack != 1) throw DataError("network: exactly one slack bus required, found " + std::to_string(n_slack));

    auto lookup = [&](const std::string& id, const std::string& who) {
        const auto it = index.find(id);
        if (it == index.end()) throw DataError(who + " references unknown bus '" + id + "'");
        return it->second;
    };

    // Radiality: union-find catches cycles, BFS catches disconnected buses.
    std::vector<std::size_t> uf(net.buses.size());
    std::iota(uf.begin(), uf.end(), 0);
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(net.buses.size());
    std::map<std::string, int> line_ids;
    for (std::size_t l = 0; l < net.lines.size(); ++l) {
        const Line& line = net.lines[l];
        if (!line_ids.emplace(line.id, 0).second) throw DataError("network: duplicate line '" + line.id + "'");
        const std::size_t a = lookup(line.from_bus, "line '" + line.id + "'");
        const std::size_t b = lookup(line.to_bus, "line '" + line.id + "'");
        if (a == b) throw DataError("line '" + line.id + "': from_bus equals to_bus");
        if (!(line.r_ohm >= 0.0) || !(line.r_ohm + std::abs(line.x_ohm) > 0.0))
            throw DataError("line '" + line.id + "': impedance must be non-zero with r_ohm >= 0");
        if (!(line.s_max_mva > 0.0)) throw DataError("line '" + line.id + "': s_max_mva must be positive");
        if (net.buses[a].base_kv != net.buses[b].base_kv)
            throw DataError("line '" + line.id + "': joins buses of different base_kv (transformers unsupported)");
        const std::size_t ra = find_root(uf, a);
        const std::size_t rb = find_root(uf, b);
        if (ra == rb)
            throw DataError("network is not radial: line '" + line.id + "' (" + line.from_bus + " - " + line.to_bus +
                            ") closes a cycle");
        uf[ra] = rb;
        adj[a].emplace_back(b, l);
        adj[b].emplace_back(a, l);
    }

    Topology& topo = net.topology;
    topo.parent_line.assign(net.buses.size(), -1);
    topo.line_from.assign(net.lines.size(), 0);
    topo.line_to.assign(net.lines.size(), 0);
    topo.bfs_order.clear();
    std::vector<bool> seen(net.buses.size(), false);
    std::deque<std::size_t> queue{topo.slack};
    seen[topo.slack] = true;
    while (!queue.empty()) {
        const std::size_t u = queue.front();
        queue.pop_front();
        topo.bfs_order.push_back(u);
        for (const auto& [v, l] : adj[u]) {
            if (seen[v]) continue;
            seen[v] = true;
            topo.parent_line[v] = static_cast<int>(l);
            topo.line_from[l] = u;
            topo.line_to[l] = v;
            Line& line = net.lines[l];
            if (line.from_bus != net.buses[u].id) std::swap(line.from_bus, line.to_bus);
            queue.push_back(v);
        }
    }
    for (std::size_t i = 0; i < net.buses.size(); ++i)
        if (!seen[i]) throw DataError("network is not radial: bus '" + net.buses[i].id + "' is not connected to the slack");

    std::map<std::string, int> gen_ids;
    for (const auto& g : net.generators) {
        if (!gen_ids.emplace(g.id, 0).second) throw DataError("network: duplicate generator '" + g.id + "'");
        lookup(g.bus, "generator '" + g.id + "'");
        check_series("generator '" + g.id + "'", g.p_profile_mw, net.time.n_steps);
        for (double p : g.p_profile_mw)
            if (p < 0.0) throw DataError("generator '" + g.id + "': negative output");
        if (g.has_q_capability && !(g.q_min_mvar <= g.q_max_mvar))
            throw DataError("generator '" + g.id + "': q_min_mvar exceeds q_max_mvar");
        if (g.kind == GeneratorKind::wind_curtailable && !(g.curtail_cost > 0.0))
            throw DataError("generator '" + g.id + "': curtail_cost must be positive");
    }
    for (const auto& d : net.demand) {
        lookup(d.bus, "demand");
        check_series("demand at '" + d.bus + "'", d.p_mw, net.time.n_steps);
    }
    if (net.time.n_steps == 0) throw DataError("network: empty horizon");
    if (net.time.step_seconds <= 0) throw DataError("network: timestep must be positive");
}

ProfileSeries read_profile_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing profile " + path.string());
    std::string line;
    if (!std::getline(in, line) || csv::trim_eol(line) != "timestamp,value_mw")
        throw DataError(path.string() + ": malformed header, expected 'timestamp,value_mw'");
    ProfileSeries out;
    std::vector<UnixSeconds> stamps;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto row = csv::trim_eol(line);
        if (row.empty()) continue;
        const auto f = csv::split(row);
        if (f.size() != 2) throw DataError(path.string() + ": line " + std::to_string(line_no) + ": expected 2 fields");
        stamps.push_back(parse_iso8601_utc(f[0]));
        out.values.push_back(csv::parse_double(f[1], "value_mw"));
    }
    if (stamps.size() < 1) throw DataError(path.string() + ": no samples");
    out.time.start = stamps.front();
    out.time.n_steps = stamps.size();
    out.time.step_seconds = stamps.size() > 1 ? stamps[1] - stamps[0] : 1800;
    for (std::size_t i = 1; i < stamps.size(); ++i)
        if (stamps[i] - stamps[i - 1] != out.time.step_seconds || out.time.step_seconds <= 0)
            throw DataError(path.string() + ": non-uniform timestep at line " + std::to_string(i + 2));
    return out;
}

Network network_from_json_text(const std::string& text, const std::filesystem::path& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("network document: ") + e.what());
    }
    if (!j.is_object() || j.value("schema", "") != kNetworkSchema)
        throw DataError(std::string("network document: schema mismatch, expected ") + kNetworkSchema);

    Network net;
    std::map<std::string, ProfileSeries> series;
    bool have_axis = false;
    auto profile = [&](const std::string& sid) -> const std::vector<double>& {
        auto it = series.find(sid);
        if (it == series.end()) throw DataError("network document: missing profile '" + sid + "'");
        return it->second.values;
    };
    auto limit = [](const json& b, const char* key) {
        return b.contains(key) && !b[key].is_null() ? b[key].get<double>() : kUnlimited;
    };

    try {
        net.s_base_mva = j.at("s_base_mva").get<double>();
        net.load_power_factor = j.value("load_power_factor", 1.0);
        for (const auto& [sid, rel] : j.at("profiles").items()) {
            ProfileSeries s = read_profile_csv(base_dir / rel.get<std::string>());
            if (!have_axis) {
                net.time = s.time;
                have_axis = true;
            } else if (s.time.start != net.time.start || s.time.step_seconds != net.time.step_seconds ||
                       s.time.n_steps != net.time.n_steps) {
                throw DataError("profile '" + sid + "': horizon mismatch with other profiles");
            }
            series.emplace(sid, std::move(s));
        }
        for (const auto& b : j.at("buses")) {
            Bus bus;
            bus.id = b.at("id").get<std::string>();
            bus.base_kv = b.at("base_kv").get<double>();
            bus.v_min_pu = b.value("v_min_pu", 0.9);
            bus.v_max_pu = b.value("v_max_pu", 1.1);
            bus.is_slack = b.value("is_slack", false);
            bus.v_set_pu = b.value("v_set_pu", 1.0);
            bus.p_import_max_mw = limit(b, "p_import_max_mw");
            bus.p_export_max_mw = limit(b, "p_export_max_mw");
            net.buses.push_back(bus);
        }
        for (const auto& l : j.at("lines")) {
            Line line;
            line.id = l.at("id").get<std::string>();
            line.from_bus = l.at("from_bus").get<std::string>();
            line.to_bus = l.at("to_bus").get<std::string>();
            line.r_ohm = l.at("r_ohm").get<double>();
            line.x_ohm = l.at("x_ohm").get<double>();
            line.s_max_mva = l.at("s_max_mva").get<double>();
            net.lines.push_back(line);
        }
        for (const auto& g : j.value("generators", json::array())) {
            Generator gen;
            gen.id = g.at("id").get<std::string>();
            gen.bus = g.at("bus").get<std::string>();
            const std::string kind = g.at("kind").get<std::string>();
            if (kind == "wind_curtailable")
                gen.kind = GeneratorKind::wind_curtailable;
            else if (kind == "firm")
                gen.kind = GeneratorKind::firm;
            else
                throw DataError("generator '" + gen.id + "': unknown kind '" + kind + "'");
            gen.p_profile_mw = profile(g.at("profile").get<std::string>());
            if (g.contains("q_min_mvar") || g.contains("q_max_mvar")) {
                gen.has_q_capability = true;
                gen.q_min_mvar = g.value("q_min_mvar", 0.0);
                gen.q_max_mvar = g.value("q_max_mvar", 0.0);
            }
            gen.curtail_cost = g.value("curtail_cost", 0.0);
            const double scale = g.value("scale", 1.0);
            for (double& v : gen.p_profile_mw) v *= scale;
            net.generators.push_back(std::move(gen));
        }
        for (const auto& d : j.value("demand", json::array())) {
            DemandSeries ds;
            ds.bus = d.at("bus").get<std::string>();
            ds.p_mw = profile(d.at("profile").get<std::string>());
            const double scale = d.value("scale", 1.0);
            for (double& v : ds.p_mw) v *= scale;
            net.demand.push_back(std::move(ds));
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("network document: ") + e.what());
    }
    if (!have_axis) throw DataError("network document: no profiles");
    validate(net);
    return net;
}

Network load_network(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open network document " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return network_from_json_text(ss.str(), path.parent_path());
}

double PuLine::z_abs() const { return std::hypot(r, x); }

PerUnitNetwork to_per_unit(const Network& net) {
    PerUnitNetwork pu;
    const double sb = net.s_base_mva;
    pu.s_base_mva = sb;
    pu.load_power_factor = net.load_power_factor;
    pu.time = net.time;
    pu.topology = net.topology;
    for (const auto& b : net.buses) {
        if (!(b.base_kv > 0.0)) throw DataError("bus '" + b.id + "': zero base_kv");
        pu.buses.push_back({b.id, b.base_kv, b.v_min_pu, b.v_max_pu, b.is_slack, b.v_set_pu, b.p_import_max_mw / sb,
                            b.p_export_max_mw / sb});
    }
    for (std::size_t l = 0; l < net.lines.size(); ++l) {
        const Line& line = net.lines[l];
        const double kv = net.buses[net.topology.line_from[l]].base_kv;
        const double z_base = kv * kv / sb;
        pu.lines.push_back({line.id, net.topology.line_from[l], net.topology.line_to[l], line.r_ohm / z_base,
                            line.x_ohm / z_base, line.s_max_mva / sb, z_base});
    }
    for (const auto& g : net.generators) {
        PuGenerator pg;
        pg.id = g.id;
        pg.bus = net.bus_index(g.bus);
        pg.kind = g.kind;
        pg.p_profile.reserve(g.p_profile_mw.size());
        for (double p : g.p_profile_mw) pg.p_profile.push_back(p / sb);
        pg.has_q_capability = g.has_q_capability;
        pg.q_min = g.q_min_mvar / sb;
        pg.q_max = g.q_max_mvar / sb;
        pg.curtail_cost = g.curtail_cost;
        pu.generators.push_back(std::move(pg));
    }
    pu.demand.assign(net.buses.size(), std::vector<double>(net.time.n_steps, 0.0));
    pu.has_demand.assign(net.buses.size(), false);
    for (const auto& d : net.demand) {
        const std::size_t b = net.bus_index(d.bus);
        pu.has_demand[b] = true;
        for (std::size_t t = 0; t < d.p_mw.size(); ++t) pu.demand[b][t] += d.p_mw[t] / sb;
    }
    return pu;
}

Network to_physical(const PerUnitNetwork& pu) {
    Network net;
    const double sb = pu.s_base_mva;
    net.s_base_mva = sb;
    net.load_power_factor = pu.load_power_factor;
    net.time = pu.time;
    net.topology = pu.topology;
    for (const auto& b : pu.buses)
        net.buses.push_back({b.id, b.base_kv, b.v_min, b.v_max, b.is_slack, b.v_set, b.p_import_max * sb,
                             b.p_export_max * sb});
    for (const auto& l : pu.lines)
        net.lines.push_back({l.id, pu.buses[l.from].id, pu.buses[l.to].id, l.r * l.z_base_ohm, l.x * l.z_base_ohm,
                             l.s_max * sb});
    for (const auto& g : pu.generators) {
        Generator gen;
        gen.id = g.id;
        gen.bus = pu.buses[g.bus].id;
        gen.kind = g.kind;
        for (double p : g.p_profile) gen.p_profile_mw.push_back(p * sb);
        gen.has_q_capability = g.has_q_capability;
        gen.q_min_mvar = g.q_min * sb;
        gen.q_max_mvar = g.q_max * sb;
        gen.curtail_cost = g.curtail_cost;
        net.generators.push_back(std::move(gen));
    }
    for (std::size_t b = 0; b < pu.buses.size(); ++b) {
        if (!pu.has_demand[b]) continue;
        DemandSeries d{pu.buses[b].id, {}};
        for (double p : pu.demand[b]) d.p_mw.push_back(p * sb);
        net.demand.push_back(std::move(d));
    }
    return net;
}

std::vector<double> demand_distribution(const Network& net) {
    std::vector<double> energy(net.buses.size(), 0.0);
    for (const auto& d : net.demand) {
        double e = 0.0;
        for (double p : d.p_mw) e += p;
        energy[net.bus_index(d.bus)] += e;
    }
    const double total = std::accumulate(energy.begin(), energy.end(), 0.0);
    if (!(total > 0.0)) throw DataError("demand_distribution: all-zero demand");
    for (double& e : energy) e /= total;
    return energy;
}

}  // namespace flexgrid::grid
