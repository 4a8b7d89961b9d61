#pragma once

#include <cmath>
#include <cstdio>
#include <string>

#include <json.hpp>

namespace capfade::cli {

using Json = nlohmann::ordered_json;

namespace detail {

inline void append_number(std::string& out, double v) {
    if (!std::isfinite(v)) {
        out += "null";
        return;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

inline bool is_scalar(const Json& j) { return !j.is_object() && !j.is_array(); }

inline void append(std::string& out, const Json& j, int depth) {
    const std::string pad(static_cast<std::size_t>(2 * (depth + 1)), ' ');
    const std::string close(static_cast<std::size_t>(2 * depth), ' ');
    switch (j.type()) {
    case Json::value_t::object: {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        bool first = true;
        for (const auto& [key, value] : j.items()) {
            if (!first) out += ",\n";
            first = false;
            out += pad;
            out += Json(key).dump();
            out += ": ";
            append(out, value, depth + 1);
        }
        out += "\n" + close + "}";
        return;
    }
    case Json::value_t::array: {
        if (j.empty()) {
            out += "[]";
            return;
        }
        bool flat = true;
        for (const auto& e : j) flat = flat && is_scalar(e);
        if (flat) {
            out += "[";
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) out += ", ";
                append(out, j[i], depth + 1);
            }
            out += "]";
            return;
        }
        out += "[\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i) out += ",\n";
            out += pad;
            append(out, j[i], depth + 1);
        }
        out += "\n" + close + "]";
        return;
    }
    case Json::value_t::number_float:
        append_number(out, j.get<double>());
        return;
    default:
        out += j.dump();
        return;
    }
}

} // namespace detail

/// Stable text form: insertion-ordered keys, two-space indent, scalar arrays
/// on one line, floats with 17 significant digits, non-finite values as null.
inline std::string to_text(const Json& j) {
    std::string out;
    detail::append(out, j, 0);
    out += '\n';
    return out;
}

} // namespace capfade::cli
