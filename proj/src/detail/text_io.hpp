#pragma once

#include "credal/types.hpp"

#include <charconv>
#include <string>
#include <string_view>

namespace credal::detail {

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

inline int parse_int(std::string_view text, const char* where)
{
    text = trim(text);
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw ConfigError(std::string(where) + ": not an integer: '" + std::string(text) + "'");
    return value;
}

inline double parse_double(std::string_view text, const char* where)
{
    text = trim(text);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw ConfigError(std::string(where) + ": not a real number: '" + std::string(text) + "'");
    return value;
}

/// Shortest representation that parses back to the same double.
inline std::string format_double(double x)
{
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

} // namespace credal::detail
