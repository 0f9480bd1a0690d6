#pragma once

#include <cstdio>
#include <string>

namespace vinispec {

/// Decimal rendering with the given number of significant digits ("%.Ng").
inline std::string format_significant(double value, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, value);
    return buf;
}

/// Fixed-point rendering with the given number of decimals ("%.Nf").
inline std::string format_fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
    return buf;
}

} // namespace vinispec
