#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace flexgrid::csv {

// Splits one line on commas. The formats used here never quote fields.
std::vector<std::string_view> split(std::string_view line);

// Strips a trailing '\r' so CRLF input is tolerated on read.
std::string_view trim_eol(std::string_view line);

// Throws DataError naming `what` when the field is not a finite number.
double parse_double(std::string_view field, std::string_view what);
long long parse_int(std::string_view field, std::string_view what);

// Shortest representation that round-trips exactly.
std::string format_double(double value);

}  // namespace flexgrid::csv
