#pragma once

#include <charconv>
#include <string>

namespace sawu {

// Shortest round-trip decimal form, locale independent.
inline std::string fmt_double(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

// Fixed-precision decimal form, locale independent.
inline std::string fmt_fixed(double v, int precision) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, precision);
    return std::string(buf, end);
}

}  // namespace sawu
