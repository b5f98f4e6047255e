#pragma once

// Field-level plumbing shared by the tab-separated artifact formats
// (classification tables, datasets, cell matrices). Private to the library
// sources; the formats themselves are documented in docs/formats.md.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "abmtk/diagnostics.hpp"
#include "abmtk/value.hpp"

namespace abmtk::textio {

inline std::string hash16(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// %.17g: reparses to the identical double, so emitted files are exact.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string sanitize(const std::string& s) {
    std::string out = s;
    for (char& c : out)
        if (c == '\t' || c == '\n' || c == '\r') c = ' ';
    return out;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    for (size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == sep) {
            out.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

inline Value parse_value_literal(const std::string& s) {
    if (s == "true") return Value::of_bool(true);
    if (s == "false") return Value::of_bool(false);
    auto r = parse_rational(s);
    if (!r) throw RuntimeError("malformed value '" + s + "' in table");
    return Value::of_number(*r);
}

inline uint64_t parse_u64(const std::string& s) {
    if (s.empty()) throw RuntimeError("malformed integer in table");
    char* end = nullptr;
    unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size()) throw RuntimeError("malformed integer '" + s + "' in table");
    return v;
}

inline double parse_num(const std::string& s) {
    if (s.empty()) throw RuntimeError("malformed number in table");
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) throw RuntimeError("malformed number '" + s + "' in table");
    return v;
}

inline bool parse_bool(const std::string& s) {
    if (s == "true") return true;
    if (s == "false") return false;
    throw RuntimeError("malformed boolean '" + s + "' in table");
}

} // namespace abmtk::textio
