#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"

#include "flexgrid/error.hpp"
#include "flexgrid/ev_data.hpp"

using namespace flexgrid;
using ev::ChargingSession;
using ev::DayFilter;

namespace {

constexpr const char* kHeader = "user_id,start,end,avg_power_kw\n";

// 2021-06-07 is a Monday.
const std::int64_t kMonday = days_from_civil({2021, 6, 7});

UnixSeconds at(std::int64_t day, int hh, int mm) { return day * kSecondsPerDay + hh * 3600 + mm * 60; }

ev::ParsedSessions parse(const std::string& body, bool strict = false) {
    std::istringstream in(std::string(kHeader) + body);
    return ev::parse_sessions(in, strict);
}

}  // namespace

TEST_CASE("parse_sessions: counts, rejections and empty input") {
    auto ok = parse(
        "b,2021-06-07T10:00:00Z,2021-06-07T11:00:00Z,7\n"
        "a,2021-06-07T20:00:00Z,2021-06-07T22:00:00Z,3.6\n"
        "a,2021-06-07T08:00:00Z,2021-06-07T09:00:00Z,7\n");
    REQUIRE(ok.sessions.size() == 3);
    CHECK(ok.summary.n_users == 2);
    CHECK(ok.summary.n_sessions == 3);
    CHECK(ok.sessions[0].user_id == "a");
    CHECK(ok.sessions[0].start < ok.sessions[1].start);
    CHECK(ok.summary.total_energy_kwh == doctest::Approx(7 + 7.2 + 7));

    auto bad = parse("a,2021-06-07T10:00:00Z,2021-06-07T10:00:00Z,7\n"
                     "a,2021-06-07T12:00:00Z,2021-06-07T13:00:00Z,7\n");
    CHECK(bad.sessions.size() == 1);
    CHECK(bad.summary.n_rejected == 1);
    REQUIRE(bad.rejections.size() == 1);
    CHECK(bad.rejections[0].find("line 2") != std::string::npos);

    CHECK_THROWS_AS(parse("a,2021-06-07T10:00:00Z,2021-06-07T09:00:00Z,7\n", true), DataError);

    auto empty = parse("");
    CHECK(empty.sessions.empty());
    CHECK(empty.summary.n_users == 0);

    SUBCASE("zero power is dropped without a rejection") {
        auto z = parse("a,2021-06-07T10:00:00Z,2021-06-07T11:00:00Z,0\n");
        CHECK(z.sessions.empty());
        CHECK(z.summary.n_rejected == 0);
    }
    SUBCASE("sessions longer than seven days are rejected") {
        auto z = parse("a,2021-06-01T10:00:00Z,2021-06-09T11:00:00Z,7\n");
        CHECK(z.sessions.empty());
        CHECK(z.summary.n_rejected == 1);
    }
    SUBCASE("header must match") {
        std::istringstream in("user,start,end,kw\n");
        CHECK_THROWS_AS(ev::parse_sessions(in, false), DataError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(ev::parse_sessions(std::filesystem::path("/nonexistent/sessions.csv"), false), DataError);
    }
}

TEST_CASE("rasterize_user: placement, midnight split and overlap") {
    std::vector<ChargingSession> one{{"u", at(kMonday, 10, 0), at(kMonday, 11, 0), 7.0}};
    auto r = ev::rasterize_user(one, DayFilter::weekdays);
    REQUIRE(r.n_days() == 1);
    int n7 = 0;
    double sum = 0.0;
    for (int m = 0; m < kMinutesPerDay; ++m) {
        n7 += r.rows[0][m] == 7.0;
        sum += r.rows[0][m];
    }
    CHECK(n7 == 60);
    CHECK(sum == 420.0);
    CHECK(r.rows[0][600] == 7.0);
    CHECK(r.rows[0][659] == 7.0);
    CHECK(r.rows[0][660] == 0.0);

    std::vector<ChargingSession> night{{"u", at(kMonday, 23, 30), at(kMonday + 1, 0, 30), 3.0}};
    auto n = ev::rasterize_user(night, DayFilter::all);
    REQUIRE(n.n_days() == 2);
    CHECK(n.days[0] == kMonday);
    for (int m = 1410; m < 1440; ++m) CHECK(n.rows[0][m] == 3.0);
    for (int m = 0; m < 30; ++m) CHECK(n.rows[1][m] == 3.0);
    CHECK(n.rows[1][30] == 0.0);

    std::vector<ChargingSession> both{{"u", at(kMonday, 9, 0), at(kMonday, 10, 0), 2.0},
                                      {"u", at(kMonday, 9, 30), at(kMonday, 9, 31), 3.0}};
    auto o = ev::rasterize_user(both, DayFilter::all);
    CHECK(o.rows[0][570] == 5.0);
    CHECK(o.rows[0][571] == 2.0);

    CHECK_THROWS_AS(ev::rasterize_user({}, DayFilter::all), DataError);
}

TEST_CASE("rasterize_user: span includes idle days and respects the filter") {
    // Monday and the following Monday: 8 calendar days, 6 weekdays, 2 weekend days.
    std::vector<ChargingSession> s{{"u", at(kMonday, 1, 0), at(kMonday, 2, 0), 7.0},
                                   {"u", at(kMonday + 7, 1, 0), at(kMonday + 7, 2, 0), 7.0}};
    CHECK(ev::rasterize_user(s, DayFilter::all).n_days() == 8);
    CHECK(ev::rasterize_user(s, DayFilter::weekdays).n_days() == 6);
    auto we = ev::rasterize_user(s, DayFilter::weekends);
    CHECK(we.n_days() == 2);
    for (const auto& row : we.rows) CHECK(*std::max_element(row.begin(), row.end()) == 0.0);

    // Partial minutes: start floors, end ceils.
    std::vector<ChargingSession> p{{"u", at(kMonday, 5, 0) + 20, at(kMonday, 5, 2) + 1, 4.0}};
    auto pr = ev::rasterize_user(p, DayFilter::all);
    CHECK(pr.rows[0][300] == 4.0);
    CHECK(pr.rows[0][302] == 4.0);
    CHECK(pr.rows[0][303] == 0.0);
}

TEST_CASE("rasterize_user: energy is conserved for minute-aligned sessions") {
    std::mt19937_64 gen(7);
    std::uniform_int_distribution<int> start_min(0, 20 * kMinutesPerDay);
    std::uniform_int_distribution<int> dur_min(1, 3000);
    std::uniform_real_distribution<double> kw(0.5, 22.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<ChargingSession> s;
        double expected_kwh = 0.0;
        for (int i = 0; i < 15; ++i) {
            const UnixSeconds a = kMonday * kSecondsPerDay + start_min(gen) * 60LL;
            const int d = dur_min(gen);
            const double p = kw(gen);
            s.push_back({"u", a, a + d * 60LL, p});
            expected_kwh += p * d / 60.0;
        }
        std::sort(s.begin(), s.end(), [](auto& x, auto& y) { return x.start < y.start; });
        auto r = ev::rasterize_user(s, DayFilter::all);
        double kwh = 0.0;
        for (const auto& row : r.rows)
            for (double v : row) kwh += v / 60.0;
        CHECK(kwh == doctest::Approx(expected_kwh).epsilon(1e-9));
    }
}

TEST_CASE("average_profile: means, fractions and scaling") {
    ev::DayRaster r;
    r.days = {kMonday, kMonday + 1};
    r.rows.assign(2, ev::DayCurve{});
    r.rows[0][600] = 7.0;
    auto a = ev::average_profile(r);
    CHECK(a.n_days == 2);
    CHECK(a.avg_profile_kw[600] == 3.5);
    CHECK(a.frac_charging[600] == 0.5);
    CHECK(a.avg_profile_kw[601] == 0.0);

    ev::DayRaster zero;
    zero.days = {kMonday};
    zero.rows.assign(1, ev::DayCurve{});
    auto z = ev::average_profile(zero);
    CHECK(*std::max_element(z.avg_profile_kw.begin(), z.avg_profile_kw.end()) == 0.0);
    CHECK(*std::max_element(z.frac_charging.begin(), z.frac_charging.end()) == 0.0);

    ev::DayRaster same;
    ev::DayCurve day{};
    for (int m = 60; m < 120; ++m) day[m] = 7.0;
    for (int d = 0; d < 365; ++d) {
        same.days.push_back(kMonday + d);
        same.rows.push_back(day);
    }
    auto s = ev::average_profile(same);
    for (int m = 0; m < kMinutesPerDay; ++m) CHECK(s.avg_profile_kw[m] == day[m]);

    // Scaling session powers by c scales the average by c; fractions stay.
    std::vector<ChargingSession> sess{{"u", at(kMonday, 8, 0), at(kMonday, 9, 30), 3.3},
                                      {"u", at(kMonday + 2, 22, 0), at(kMonday + 3, 1, 0), 7.1}};
    auto base = ev::average_profile(ev::rasterize_user(sess, DayFilter::all));
    for (auto& x : sess) x.avg_power_kw *= 2.5;
    auto scaled = ev::average_profile(ev::rasterize_user(sess, DayFilter::all));
    for (int m = 0; m < kMinutesPerDay; ++m) {
        CHECK(scaled.avg_profile_kw[m] == doctest::Approx(2.5 * base.avg_profile_kw[m]).epsilon(1e-15));
        CHECK(scaled.frac_charging[m] == base.frac_charging[m]);
    }
}

TEST_CASE("robust_max: top decile is excluded") {
    CHECK(ev::robust_max(std::vector<double>(50, 7.0)) == 7.0);
    std::vector<double> spikes(90, 7.0);
    spikes.insert(spikes.end(), 10, 50.0);
    CHECK(ev::robust_max(spikes) == 7.0);
    std::vector<double> ten{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK(ev::robust_max(ten) == 9.0);
    CHECK(ev::robust_max({4.0}) == 4.0);
    CHECK(ev::robust_max({0.0, 4.0, 0.0}) == 4.0);
    CHECK_THROWS_AS(ev::robust_max({0.0, 0.0}), DataError);

    // Oracle: nearest-rank 90th percentile; when n is a multiple of ten this
    // is also the maximum left after dropping the n/10 largest samples.
    std::mt19937_64 gen(11);
    for (int trial = 0; trial < 50; ++trial) {
        std::uniform_int_distribution<int> len(2, 400);
        std::uniform_int_distribution<int> level(1, 30);
        std::vector<double> v(static_cast<std::size_t>(len(gen)));
        if (trial % 2 == 0) v.resize(10 * (v.size() / 10 + 1));
        for (auto& x : v) x = level(gen) * 0.5;
        auto sorted = v;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t n = sorted.size();
        const double expect = sorted[static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(n) - 1e-9)) - 1];
        if (n % 10 == 0) CHECK(expect == sorted[n - n / 10 - 1]);
        const double got = ev::robust_max(v);
        CHECK(got == expect);
        std::shuffle(v.begin(), v.end(), gen);
        CHECK(ev::robust_max(v) == got);
        auto twice = v;
        twice.insert(twice.end(), v.begin(), v.end());
        CHECK(ev::robust_max(twice) == got);
    }
}

TEST_CASE("max_charging_power: per-minute samples of the sessions") {
    std::vector<ChargingSession> s{{"u", at(kMonday, 0, 0), at(kMonday, 9, 0), 7.0},
                                   {"u", at(kMonday, 12, 0), at(kMonday, 12, 30), 50.0}};
    CHECK(ev::max_charging_power(s) == 7.0);
}

TEST_CASE("write_sessions then parse_sessions is the identity") {
    std::vector<ChargingSession> s{{"alpha", at(kMonday, 10, 0) + 17, at(kMonday, 11, 3) + 5, 7.123456789012345},
                                   {"alpha", at(kMonday + 1, 23, 0), at(kMonday + 2, 2, 0), 0.1},
                                   {"beta", at(kMonday, 1, 0), at(kMonday, 2, 0), 1.0 / 3.0}};
    std::ostringstream out;
    ev::write_sessions(out, s);
    std::istringstream in(out.str());
    auto back = ev::parse_sessions(in, true);
    CHECK(back.sessions == s);
}

TEST_CASE("synth_sessions: degenerate archetype, determinism and mix") {
    ev::Archetype night;
    night.name = "night";
    night.start_hour_mean = 0.0;
    night.duration_h_mean = 4.0;
    night.power_kw = 7.0;
    night.charge_prob = 1.0;
    ev::SynthSpec spec;
    spec.n_users = 1;
    spec.days = 10;
    spec.start_day = kMonday;
    spec.archetypes = {night};
    spec.mix = {1.0};
    spec.seed = 3;
    auto out = ev::synth_sessions(spec);
    REQUIRE(out.sessions.size() == 10);
    for (std::size_t i = 0; i < out.sessions.size(); ++i) {
        const auto& s = out.sessions[i];
        CHECK(s.start == at(kMonday + static_cast<std::int64_t>(i), 0, 0));
        CHECK(s.end - s.start == 4 * 3600);
        CHECK(s.avg_power_kw == 7.0);
    }

    ev::Archetype day = night;
    day.name = "day";
    day.start_hour_mean = 9.0;
    day.start_hour_sd = 1.0;
    day.duration_h_sd = 0.5;
    day.power_sd_kw = 1.0;
    day.charge_prob = 0.6;
    spec.n_users = 100;
    spec.archetypes = {night, day};
    spec.mix = {0.5, 0.5};
    auto a = ev::synth_sessions(spec);
    auto b = ev::synth_sessions(spec);
    std::ostringstream sa, sb;
    ev::write_sessions(sa, a.sessions);
    ev::write_sessions(sb, b.sessions);
    CHECK(sa.str() == sb.str());
    for (const auto& s : a.sessions) {
        CHECK(s.end > s.start);
        CHECK(s.avg_power_kw > 0.0);
        CHECK(s.end - s.start <= ev::kMaxSessionSeconds);
    }
    // 99% binomial interval for n = 100, p = 0.5 is 50 +- 13.
    REQUIRE(a.archetype.size() == 100);
    const auto n_night = std::count_if(a.archetype.begin(), a.archetype.end(),
                                       [](const auto& kv) { return kv.second == "night"; });
    CHECK(n_night >= 37);
    CHECK(n_night <= 63);

    spec.mix = {0.7, 0.2};
    CHECK_THROWS_AS(ev::synth_sessions(spec), ConfigError);
}

TEST_CASE("build_profiles: profile bounded by the raw maximum") {
    ev::Archetype a;
    a.name = "evening";
    a.start_hour_mean = 18.0;
    a.start_hour_sd = 1.5;
    a.duration_h_mean = 3.0;
    a.duration_h_sd = 1.0;
    a.power_kw = 7.0;
    a.power_sd_kw = 2.0;
    a.charge_prob = 0.5;
    ev::SynthSpec spec{20, 28, kMonday, {a}, {1.0}, 5};
    auto synth = ev::synth_sessions(spec);
    auto set = ev::build_profiles(synth.sessions, DayFilter::weekdays);
    CHECK(set.profiles.size() + set.skipped.size() == 20);
    for (const auto& p : set.profiles) {
        std::vector<ChargingSession> mine;
        for (const auto& s : synth.sessions)
            if (s.user_id == p.user_id) mine.push_back(s);
        double raw_max = 0.0;
        for (const auto& row : ev::rasterize_user(mine, DayFilter::all).rows)
            raw_max = std::max(raw_max, *std::max_element(row.begin(), row.end()));
        CHECK(p.n_days > 0);
        CHECK(p.p_max_kw > 0.0);
        for (int m = 0; m < kMinutesPerDay; ++m) {
            CHECK(p.avg_profile_kw[m] <= raw_max + 1e-12);
            CHECK(p.frac_charging[m] >= 0.0);
            CHECK(p.frac_charging[m] <= 1.0);
        }
    }
}
