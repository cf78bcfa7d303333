#pragma once

#include <charconv>
#include <string>

namespace obsim {

// Shortest decimal form that re-parses to the exact same double (up to 17
// significant digits). Used everywhere a probability or amplitude is printed
// so values round-trip through text bit-exactly.
inline std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

} // namespace obsim
