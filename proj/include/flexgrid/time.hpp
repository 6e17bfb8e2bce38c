#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace flexgrid {

// Seconds since 1970-01-01T00:00:00Z.
using UnixSeconds = std::int64_t;

inline constexpr std::int64_t kSecondsPerDay = 86400;
inline constexpr int kMinutesPerDay = 1440;

struct CivilDate {
    int year;
    unsigned month;
    unsigned day;
};

std::int64_t days_from_civil(CivilDate date);
CivilDate civil_from_days(std::int64_t days);

// 0 = Monday ... 6 = Sunday.
int weekday_of(std::int64_t days_since_epoch);
bool is_weekend(std::int64_t days_since_epoch);

// Accepts `YYYY-MM-DDTHH:MM:SSZ` (the trailing Z is required). Throws DataError.
UnixSeconds parse_iso8601_utc(std::string_view text);
std::string format_iso8601_utc(UnixSeconds t);

// Floor division that rounds toward negative infinity.
constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

constexpr std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return -floor_div(-a, b); }

}  // namespace flexgrid
