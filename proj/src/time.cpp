#include "flexgrid/time.hpp"

#include <charconv>
#include <cstdio>

#include "flexgrid/error.hpp"

namespace flexgrid {

// Howard Hinnant's civil calendar algorithms (proleptic Gregorian).
std::int64_t days_from_civil(CivilDate date) {
    const int y = date.year - (date.month <= 2 ? 1 : 0);
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned mp = (date.month + 9) % 12;
    const unsigned doy = (153 * mp + 2) / 5 + date.day - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

CivilDate civil_from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return {static_cast<int>(y + (m <= 2 ? 1 : 0)), m, d};
}

int weekday_of(std::int64_t days_since_epoch) {
    // 1970-01-01 was a Thursday (index 3).
    return static_cast<int>(((days_since_epoch % 7) + 7 + 3) % 7);
}

bool is_weekend(std::int64_t days_since_epoch) { return weekday_of(days_since_epoch) >= 5; }

namespace {

bool read_int(std::string_view text, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > text.size()) return false;
    const char* first = text.data() + pos;
    const char* last = first + len;
    for (const char* p = first; p != last; ++p)
        if (*p < '0' || *p > '9') return false;
    return std::from_chars(first, last, out).ec == std::errc{};
}

}  // namespace

UnixSeconds parse_iso8601_utc(std::string_view text) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
    const bool ok = text.size() == 20 && read_int(text, 0, 4, y) && text[4] == '-' &&
                    read_int(text, 5, 2, mo) && text[7] == '-' && read_int(text, 8, 2, d) &&
                    text[10] == 'T' && read_int(text, 11, 2, h) && text[13] == ':' &&
                    read_int(text, 14, 2, mi) && text[16] == ':' && read_int(text, 17, 2, s) &&
                    text[19] == 'Z';
    if (!ok || mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || s > 59)
        throw DataError("invalid ISO-8601 UTC timestamp '" + std::string(text) + "'");
    const CivilDate date{y, static_cast<unsigned>(mo), static_cast<unsigned>(d)};
    const std::int64_t days = days_from_civil(date);
    const CivilDate back = civil_from_days(days);
    if (back.month != date.month || back.day != date.day)
        throw DataError("invalid calendar date in '" + std::string(text) + "'");
    return days * kSecondsPerDay + h * 3600 + mi * 60 + s;
}

std::string format_iso8601_utc(UnixSeconds t) {
    const std::int64_t days = floor_div(t, kSecondsPerDay);
    const std::int64_t sod = t - days * kSecondsPerDay;
    const CivilDate date = civil_from_days(days);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", date.year, date.month, date.day,
                  static_cast<int>(sod / 3600), static_cast<int>((sod / 60) % 60),
                  static_cast<int>(sod % 60));
    return buf;
}

}  // namespace flexgrid
