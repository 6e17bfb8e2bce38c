#pragma once

// Charging-session ingestion, minute rasterization, per-user daily profiles
// and a synthetic session generator.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "flexgrid/time.hpp"

namespace flexgrid::ev {

using DayCurve = std::array<double, kMinutesPerDay>;

// Longest session accepted before a row is treated as corrupt.
inline constexpr UnixSeconds kMaxSessionSeconds = 7 * kSecondsPerDay;

struct ChargingSession {
    std::string user_id;
    UnixSeconds start = 0;
    UnixSeconds end = 0;
    double avg_power_kw = 0.0;

    friend bool operator==(const ChargingSession&, const ChargingSession&) = default;
};

struct SessionDatasetSummary {
    std::size_t n_users = 0;
    std::size_t n_sessions = 0;
    UnixSeconds first = 0;
    UnixSeconds last = 0;
    double total_energy_kwh = 0.0;
    std::size_t n_rejected = 0;
};

struct ParsedSessions {
    std::vector<ChargingSession> sessions;  // sorted by (user_id, start)
    SessionDatasetSummary summary;
    std::vector<std::string> rejections;  // "line N: reason"
};

// Reads the `user_id,start,end,avg_power_kw` CSV. Rows with zero power are
// dropped silently; other invariant violations are rejected. In strict mode
// the first rejection throws DataError carrying the line number.
ParsedSessions parse_sessions(const std::filesystem::path& path, bool strict);
ParsedSessions parse_sessions(std::istream& in, bool strict, const std::string& source = "<stream>");

void write_sessions(std::ostream& out, std::span<const ChargingSession> sessions);
void write_sessions(const std::filesystem::path& path, std::span<const ChargingSession> sessions);

SessionDatasetSummary summarize(std::span<const ChargingSession> sessions);

// Groups sorted sessions into per-user spans, preserving order.
std::map<std::string, std::vector<ChargingSession>> group_by_user(std::span<const ChargingSession> sessions);

enum class DayFilter { all, weekdays, weekends };

DayFilter parse_day_filter(const std::string& text);
std::string to_string(DayFilter filter);

// One row per calendar day in the user's observation span that passes the
// filter, including days without any charging.
struct DayRaster {
    std::vector<std::int64_t> days;  // days since epoch, ascending
    std::vector<DayCurve> rows;      // kW per minute

    std::size_t n_days() const { return rows.size(); }
};

DayRaster rasterize_user(std::span<const ChargingSession> sessions, DayFilter filter);

struct AverageProfile {
    DayCurve avg_profile_kw{};
    DayCurve frac_charging{};
    int n_days = 0;
};

AverageProfile average_profile(const DayRaster& raster);

// 90th percentile (nearest rank) of the user's nonzero per-minute samples.
double max_charging_power(std::span<const ChargingSession> sessions);

// Same statistic on an explicit sample multiset; zero samples are ignored.
double robust_max(std::vector<double> samples);

struct EvProfile {
    std::string user_id;
    DayCurve avg_profile_kw{};
    DayCurve frac_charging{};
    double p_max_kw = 0.0;
    int n_days = 0;
};

// Full per-user pipeline. Users whose filtered span contains no day, or who
// never charged, are skipped and listed in `skipped`.
struct ProfileSet {
    std::vector<EvProfile> profiles;  // sorted by user_id
    std::vector<std::string> skipped;
};

ProfileSet build_profiles(std::span<const ChargingSession> sessions, DayFilter filter);

// ---------------------------------------------------------------------------
// Synthetic sessions

struct Archetype {
    std::string name;
    double start_hour_mean = 0.0;
    double start_hour_sd = 0.0;
    double duration_h_mean = 1.0;
    double duration_h_sd = 0.0;
    double power_kw = 7.0;
    double power_sd_kw = 0.0;   // per-user spread of the power level
    double charge_prob = 1.0;   // probability of a session on a given day
    double weekend_charge_prob = -1.0;  // < 0 means same as charge_prob
};

struct SynthSpec {
    int n_users = 1;
    int days = 1;
    std::int64_t start_day = 0;  // days since epoch of the first simulated day
    std::vector<Archetype> archetypes;
    std::vector<double> mix;  // one weight per archetype, summing to 1
    std::uint64_t seed = 0;
};

struct SynthOutput {
    std::vector<ChargingSession> sessions;         // sorted by (user_id, start)
    std::map<std::string, std::string> archetype;  // user_id -> archetype name
};

SynthOutput synth_sessions(const SynthSpec& spec);

}  // namespace flexgrid::ev
