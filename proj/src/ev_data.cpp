#include "flexgrid/ev_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_map>

#include "flexgrid/csv.hpp"
#include "flexgrid/error.hpp"
#include "flexgrid/rng.hpp"

namespace flexgrid::ev {

namespace {

constexpr std::string_view kHeader = "user_id,start,end,avg_power_kw";

bool session_less(const ChargingSession& a, const ChargingSession& b) {
    if (a.user_id != b.user_id) return a.user_id < b.user_id;
    if (a.start != b.start) return a.start < b.start;
    if (a.end != b.end) return a.end < b.end;
    return a.avg_power_kw < b.avg_power_kw;
}

bool day_passes(std::int64_t day, DayFilter filter) {
    switch (filter) {
        case DayFilter::all: return true;
        case DayFilter::weekdays: return !is_weekend(day);
        case DayFilter::weekends: return is_weekend(day);
    }
    return true;
}

}  // namespace

ParsedSessions parse_sessions(std::istream& in, bool strict, const std::string& source) {
    ParsedSessions out;
    std::string line;
    if (!std::getline(in, line) || csv::trim_eol(line) != kHeader)
        throw DataError(source + ": malformed header, expected '" + std::string(kHeader) + "'");

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view row = csv::trim_eol(line);
        if (row.empty()) continue;
        std::string reason;
        ChargingSession s;
        try {
            const auto fields = csv::split(row);
            if (fields.size() != 4) throw DataError("expected 4 fields, got " + std::to_string(fields.size()));
            s.user_id = std::string(fields[0]);
            if (s.user_id.empty()) throw DataError("empty user_id");
            s.start = parse_iso8601_utc(fields[1]);
            s.end = parse_iso8601_utc(fields[2]);
            s.avg_power_kw = csv::parse_double(fields[3], "avg_power_kw");
            if (s.end <= s.start)
                reason = "end not after start";
            else if (s.end - s.start > kMaxSessionSeconds)
                reason = "session longer than 7 days";
            else if (s.avg_power_kw < 0.0)
                reason = "negative power";
        } catch (const DataError& e) {
            reason = e.what();
        }
        if (!reason.empty()) {
            std::string msg = source + ": line " + std::to_string(line_no) + ": " + reason;
            if (strict) throw DataError(msg);
            out.rejections.push_back(std::move(msg));
            continue;
        }
        if (s.avg_power_kw == 0.0) continue;
        out.sessions.push_back(std::move(s));
    }
    std::sort(out.sessions.begin(), out.sessions.end(), session_less);
    out.summary = summarize(out.sessions);
    out.summary.n_rejected = out.rejections.size();
    return out;
}

ParsedSessions parse_sessions(const std::filesystem::path& path, bool strict) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open sessions file " + path.string());
    return parse_sessions(in, strict, path.string());
}

void write_sessions(std::ostream& out, std::span<const ChargingSession> sessions) {
    out << kHeader << '\n';
    for (const auto& s : sessions) {
        out << s.user_id << ',' << format_iso8601_utc(s.start) << ',' << format_iso8601_utc(s.end) << ','
            << csv::format_double(s.avg_power_kw) << '\n';
    }
}

void write_sessions(const std::filesystem::path& path, std::span<const ChargingSession> sessions) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write sessions file " + path.string());
    write_sessions(out, sessions);
}

SessionDatasetSummary summarize(std::span<const ChargingSession> sessions) {
    SessionDatasetSummary s;
    std::set<std::string_view> users;
    for (const auto& session : sessions) {
        users.insert(session.user_id);
        if (s.n_sessions == 0 || session.start < s.first) s.first = session.start;
        if (s.n_sessions == 0 || session.end > s.last) s.last = session.end;
        s.total_energy_kwh += session.avg_power_kw * static_cast<double>(session.end - session.start) / 3600.0;
        ++s.n_sessions;
    }
    s.n_users = users.size();
    return s;
}

std::map<std::string, std::vector<ChargingSession>> group_by_user(std::span<const ChargingSession> sessions) {
    std::map<std::string, std::vector<ChargingSession>> out;
    for (const auto& s : sessions) out[s.user_id].push_back(s);
    return out;
}

DayFilter parse_day_filter(const std::string& text) {
    if (text == "all") return DayFilter::all;
    if (text == "weekdays") return DayFilter::weekdays;
    if (text == "weekends") return DayFilter::weekends;
    throw ConfigError("unknown day_filter '" + text + "' (expected all, weekdays or weekends)");
}

std::string to_string(DayFilter filter) {
    switch (filter) {
        case DayFilter::all: return "all";
        case DayFilter::weekdays: return "weekdays";
        case DayFilter::weekends: return "weekends";
    }
    return "all";
}

DayRaster rasterize_user(std::span<const ChargingSession> sessions, DayFilter filter) {
    if (sessions.empty()) throw DataError("rasterize_user: empty session list");
    const std::string& user = sessions.front().user_id;

    // Start minutes floor, end minutes ceil; intervals are [start, end).
    std::int64_t first_min = 0;
    std::int64_t last_min = 0;
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        const auto& s = sessions[i];
        if (s.user_id != user) throw DataError("rasterize_user: sessions of more than one user");
        const std::int64_t a = floor_div(s.start, 60);
        const std::int64_t b = ceil_div(s.end, 60);
        if (i == 0 || a < first_min) first_min = a;
        if (i == 0 || b > last_min) last_min = b;
    }
    const std::int64_t first_day = floor_div(first_min, kMinutesPerDay);
    const std::int64_t last_day = floor_div(last_min - 1, kMinutesPerDay);

    DayRaster raster;
    std::unordered_map<std::int64_t, std::size_t> row_of_day;
    for (std::int64_t d = first_day; d <= last_day; ++d) {
        if (!day_passes(d, filter)) continue;
        row_of_day.emplace(d, raster.days.size());
        raster.days.push_back(d);
    }
    raster.rows.assign(raster.days.size(), DayCurve{});

    for (const auto& s : sessions) {
        const std::int64_t a = floor_div(s.start, 60);
        const std::int64_t b = ceil_div(s.end, 60);
        for (std::int64_t m = a; m < b; ++m) {
            const std::int64_t day = floor_div(m, kMinutesPerDay);
            const auto it = row_of_day.find(day);
            if (it == row_of_day.end()) continue;
            raster.rows[it->second][static_cast<std::size_t>(m - day * kMinutesPerDay)] += s.avg_power_kw;
        }
    }
    return raster;
}

AverageProfile average_profile(const DayRaster& raster) {
    if (raster.rows.empty()) throw DataError("average_profile: raster has no days");
    AverageProfile p;
    p.n_days = static_cast<int>(raster.rows.size());
    for (const auto& row : raster.rows) {
        for (int t = 0; t < kMinutesPerDay; ++t) {
            p.avg_profile_kw[t] += row[t];
            if (row[t] > 0.0) p.frac_charging[t] += 1.0;
        }
    }
    const double n = static_cast<double>(p.n_days);
    for (int t = 0; t < kMinutesPerDay; ++t) {
        p.avg_profile_kw[t] /= n;
        p.frac_charging[t] /= n;
    }
    return p;
}

double robust_max(std::vector<double> samples) {
    std::erase_if(samples, [](double v) { return !(v > 0.0); });
    if (samples.empty()) throw DataError("user never charged");
    std::sort(samples.begin(), samples.end());
    // Nearest-rank 90th percentile: rank ceil(0.9 n), 1-based. Dropping the
    // strictly-top decile this way is invariant to duplicating the multiset.
    const std::size_t n = samples.size();
    const std::size_t rank = std::max<std::size_t>(1, (9 * n + 9) / 10);
    return samples[rank - 1];
}

double max_charging_power(std::span<const ChargingSession> sessions) {
    const DayRaster raster = rasterize_user(sessions, DayFilter::all);
    std::vector<double> samples;
    for (const auto& row : raster.rows)
        for (double v : row)
            if (v > 0.0) samples.push_back(v);
    return robust_max(std::move(samples));
}

ProfileSet build_profiles(std::span<const ChargingSession> sessions, DayFilter filter) {
    ProfileSet out;
    for (const auto& [user, list] : group_by_user(sessions)) {
        const DayRaster raster = rasterize_user(list, filter);
        if (raster.n_days() == 0) {
            out.skipped.push_back(user);
            continue;
        }
        const AverageProfile avg = average_profile(raster);
        EvProfile p;
        p.user_id = user;
        p.avg_profile_kw = avg.avg_profile_kw;
        p.frac_charging = avg.frac_charging;
        p.n_days = avg.n_days;
        try {
            p.p_max_kw = max_charging_power(list);
        } catch (const DataError&) {
            out.skipped.push_back(user);
            continue;
        }
        out.profiles.push_back(std::move(p));
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

void validate(const SynthSpec& spec) {
    if (spec.n_users < 1) throw ConfigError("synth: n_users must be >= 1");
    if (spec.days < 1) throw ConfigError("synth: days must be >= 1");
    if (spec.archetypes.empty() || spec.mix.size() != spec.archetypes.size())
        throw ConfigError("synth: invalid mix (one weight per archetype required)");
    double total = 0.0;
    for (double w : spec.mix) {
        if (!(w >= 0.0)) throw ConfigError("synth: invalid mix (negative weight)");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("synth: invalid mix (weights sum to " + csv::format_double(total) + ")");
    for (const auto& a : spec.archetypes) {
        const double wp = a.weekend_charge_prob < 0.0 ? a.charge_prob : a.weekend_charge_prob;
        if (!(a.power_kw > 0.0) || a.power_sd_kw < 0.0 || a.start_hour_sd < 0.0 || a.duration_h_sd < 0.0 ||
            !(a.duration_h_mean > 0.0) || a.charge_prob < 0.0 || a.charge_prob > 1.0 || wp > 1.0)
            throw ConfigError("synth: invalid archetype '" + a.name + "'");
    }
}

}  // namespace

SynthOutput synth_sessions(const SynthSpec& spec) {
    validate(spec);
    SynthOutput out;
    const int width = std::max(4, static_cast<int>(std::to_string(spec.n_users).size()));
    const CounterRng root(spec.seed);

    for (int u = 0; u < spec.n_users; ++u) {
        std::string digits = std::to_string(u + 1);
        const std::string user_id = "u" + std::string(static_cast<std::size_t>(width) - digits.size(), '0') + digits;
        const CounterRng user_rng = root.split(user_id);

        CounterRng pick = user_rng.split("archetype");
        const double r = pick.uniform();
        std::size_t a = 0;
        double cumulative = 0.0;
        for (; a + 1 < spec.mix.size(); ++a) {
            cumulative += spec.mix[a];
            if (r < cumulative) break;
        }
        const Archetype& arch = spec.archetypes[a];
        out.archetype[user_id] = arch.name;

        CounterRng level = user_rng.split("power");
        const double power = arch.power_sd_kw > 0.0 ? std::max(0.5, level.normal(arch.power_kw, arch.power_sd_kw))
                                                    : arch.power_kw;
        const double weekend_prob = arch.weekend_charge_prob < 0.0 ? arch.charge_prob : arch.weekend_charge_prob;

        for (int d = 0; d < spec.days; ++d) {
            const std::int64_t day = spec.start_day + d;
            CounterRng day_rng = user_rng.split(static_cast<std::uint64_t>(day));
            const double p = is_weekend(day) ? weekend_prob : arch.charge_prob;
            if (!day_rng.bernoulli(p)) continue;
            double hour = arch.start_hour_sd > 0.0 ? day_rng.normal(arch.start_hour_mean, arch.start_hour_sd)
                                                   : arch.start_hour_mean;
            hour = std::fmod(std::fmod(hour, 24.0) + 24.0, 24.0);
            const double dur_h = arch.duration_h_sd > 0.0 ? day_rng.normal(arch.duration_h_mean, arch.duration_h_sd)
                                                         : arch.duration_h_mean;
            const auto start_min = static_cast<std::int64_t>(std::llround(hour * 60.0)) % kMinutesPerDay;
            const auto dur_min = std::clamp<std::int64_t>(std::llround(dur_h * 60.0), 5, 24 * 60);
            ChargingSession s;
            s.user_id = user_id;
            s.start = day * kSecondsPerDay + start_min * 60;
            s.end = s.start + dur_min * 60;
            s.avg_power_kw = power;
            out.sessions.push_back(std::move(s));
        }
    }
    std::sort(out.sessions.begin(), out.sessions.end(), session_less);
    return out;
}

}  // namespace flexgrid::ev
