#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cfx::text {

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

/// Parses a full token as a double (decimal or scientific, optional leading '+').
std::optional<double> parse_double(std::string_view token);

std::string_view trim(std::string_view s);

std::vector<std::string_view> split(std::string_view s, char sep);

bool iequals(std::string_view a, std::string_view b);

std::string to_lower(std::string_view s);

}  // namespace cfx::text
