#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include <json.hpp>

#include "evosr/errors.hpp"

namespace evosr {

/// Formats a double as decimal text with 17 significant digits, the count
/// that makes text round-trips exact for 64-bit floats. All file and wire
/// serialization of reals goes through this. to_chars keeps the output
/// locale-independent; zero is canonicalized to "0" since a JSON integer
/// cannot carry the sign of -0.0 back.
inline void append_real(std::string& out, double v) {
    if (v == 0.0) {
        out += '0';
        return;
    }
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    out.append(buf, res.ptr);
}

inline std::string format_real(double v) {
    std::string out;
    append_real(out, v);
    return out;
}

/// Reads a JSON number as double, throwing the caller's error type with
/// context when the value is not a number.
template <class ErrorT>
inline double as_real(const nlohmann::json& j, const char* what) {
    if (!j.is_number()) throw ErrorT(std::string(what) + ": expected a number");
    return j.get<double>();
}

template <class ErrorT>
inline std::int64_t as_int(const nlohmann::json& j, const char* what) {
    if (!j.is_number_integer()) throw ErrorT(std::string(what) + ": expected an integer");
    return j.get<std::int64_t>();
}

/// 64-bit FNV-1a over a byte string; used to fingerprint the canonical
/// serialized forms of the problem and the parameter set.
inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

inline std::string digest_hex(std::uint64_t d) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(d));
    return buf;
}

template <class ErrorT>
inline std::uint64_t parse_digest_hex(const nlohmann::json& j, const char* what) {
    if (!j.is_string()) throw ErrorT(std::string(what) + ": expected a hex digest string");
    const std::string s = j.get<std::string>();
    if (s.size() != 18 || s[0] != '0' || s[1] != 'x')
        throw ErrorT(std::string(what) + ": malformed digest " + s);
    std::uint64_t v = 0;
    for (std::size_t i = 2; i < s.size(); ++i) {
        const char c = s[i];
        v <<= 4;
        if (c >= '0' && c <= '9')
            v |= static_cast<std::uint64_t>(c - '0');
        else if (c >= 'a' && c <= 'f')
            v |= static_cast<std::uint64_t>(c - 'a' + 10);
        else
            throw ErrorT(std::string(what) + ": malformed digest " + s);
    }
    return v;
}

}  // namespace evosr
