#pragma once

#include <string>
#include <string_view>

namespace dcu {

/// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);

/// Strict parse of a full string as a double; throws std::invalid_argument.
double parse_double(std::string_view text);

/// Strict parse of a full string as a base-10 integer.
long long parse_int(std::string_view text);

}  // namespace dcu
