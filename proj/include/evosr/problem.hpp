#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "evosr/errors.hpp"
#include "evosr/json_io.hpp"
#include "evosr/linear_system.hpp"
#include "evosr/rng.hpp"

namespace evosr {

/// The six built-in benchmark families plus systems loaded from file.
/// Formula indices i, j are 1-based; u(lo,hi) is a uniform draw.
///   p1: a_ii = 20        a_ij = u(0,1)      b_i = 10*i
///   p2: a_ii = 20*n      a_ij = j           b_i = 10*i
///   p3: a_ii = 2*i^2     a_ij = j           b_i = 10*i
///   p4: a_ii = u(-100,100)  a_ij = u(-10,10)   b_i = u(-100,100)
///   p5: a_ii = u(-70,70)    a_ij = u(0,7)      b_i = u(0,70)
///   p6: a_ii = 70           a_ij = u(-10,10)   b_i = u(-70,70)
enum class ProblemFamily { p1, p2, p3, p4, p5, p6, file };

inline std::string_view family_name(ProblemFamily f) {
    switch (f) {
        case ProblemFamily::p1: return "p1";
        case ProblemFamily::p2: return "p2";
        case ProblemFamily::p3: return "p3";
        case ProblemFamily::p4: return "p4";
        case ProblemFamily::p5: return "p5";
        case ProblemFamily::p6: return "p6";
        case ProblemFamily::file: return "file";
    }
    return "?";
}

inline ProblemFamily parse_family(std::string_view s) {
    if (s == "p1") return ProblemFamily::p1;
    if (s == "p2") return ProblemFamily::p2;
    if (s == "p3") return ProblemFamily::p3;
    if (s == "p4") return ProblemFamily::p4;
    if (s == "p5") return ProblemFamily::p5;
    if (s == "p6") return ProblemFamily::p6;
    if (s == "file") return ProblemFamily::file;
    throw InvalidParams("unknown problem family: " + std::string(s));
}

struct ProblemSpec {
    ProblemFamily family = ProblemFamily::p1;
    std::size_t n = 100;
    std::uint64_t seed = 1;
    bool ensure_dominance = false;
    std::string path;  // family == file only
};

namespace detail {

// Rescales every diagonal entry to 1.05x the absolute off-diagonal row sum,
// keeping the original sign. Rows whose off-diagonal part is all zero are
// left alone.
inline void rescale_to_dominance(std::vector<std::vector<double>>& rows) {
    const std::size_t n = rows.size();
    for (std::size_t i = 0; i < n; ++i) {
        double off = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) off += std::abs(rows[i][j]);
        if (off > 0.0) rows[i][i] = std::copysign(1.05 * off, rows[i][i]);
    }
}

inline double draw_nonzero(RngStream& rng, double lo, double hi) {
    for (int attempt = 0; attempt < 100; ++attempt) {
        const double v = rng.uniform(lo, hi);
        if (v != 0.0) return v;
    }
    throw ZeroDiagonal("diagonal draw was zero after 100 resampling attempts");
}

}  // namespace detail

/// Builds a benchmark system. Entries are filled row-major (the diagonal
/// rule applies in place when j == i), then b; random values are consumed
/// from rng in exactly that order, so equal (spec, stream) pairs reproduce
/// the system bit for bit.
inline LinearSystem generate(const ProblemSpec& spec, RngStream& rng) {
    if (spec.family == ProblemFamily::file)
        throw InvalidParams("generate() does not handle file-backed specs; use load_system");
    if (spec.n < 2) throw DimensionTooSmall("generator families require n >= 2");

    const std::size_t n = spec.n;
    std::vector<std::vector<double>> rows(n, std::vector<double>(n, 0.0));
    std::vector<double> b(n, 0.0);

    for (std::size_t i = 0; i < n; ++i) {
        const double fi = static_cast<double>(i + 1);  // 1-based row index
        for (std::size_t j = 0; j < n; ++j) {
            const double fj = static_cast<double>(j + 1);
            double v = 0.0;
            if (i == j) {
                switch (spec.family) {
                    case ProblemFamily::p1: v = 20.0; break;
                    case ProblemFamily::p2: v = 20.0 * static_cast<double>(n); break;
                    case ProblemFamily::p3: v = 2.0 * fi * fi; break;
                    case ProblemFamily::p4: v = detail::draw_nonzero(rng, -100.0, 100.0); break;
                    case ProblemFamily::p5: v = detail::draw_nonzero(rng, -70.0, 70.0); break;
                    case ProblemFamily::p6: v = 70.0; break;
                    case ProblemFamily::file: break;
                }
            } else {
                switch (spec.family) {
                    case ProblemFamily::p1: v = rng.uniform(0.0, 1.0); break;
                    case ProblemFamily::p2: v = fj; break;
                    case ProblemFamily::p3: v = fj; break;
                    case ProblemFamily::p4: v = rng.uniform(-10.0, 10.0); break;
                    case ProblemFamily::p5: v = rng.uniform(0.0, 7.0); break;
                    case ProblemFamily::p6: v = rng.uniform(-10.0, 10.0); break;
                    case ProblemFamily::file: break;
                }
            }
            rows[i][j] = v;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double fi = static_cast<double>(i + 1);
        switch (spec.family) {
            case ProblemFamily::p1:
            case ProblemFamily::p2:
            case ProblemFamily::p3: b[i] = 10.0 * fi; break;
            case ProblemFamily::p4: b[i] = rng.uniform(-100.0, 100.0); break;
            case ProblemFamily::p5: b[i] = rng.uniform(0.0, 70.0); break;
            case ProblemFamily::p6: b[i] = rng.uniform(-70.0, 70.0); break;
            case ProblemFamily::file: break;
        }
    }

    if (spec.ensure_dominance) detail::rescale_to_dominance(rows);
    return LinearSystem(rows, std::move(b));
}

inline LinearSystem generate(const ProblemSpec& spec) {
    RngStream rng(spec.seed, kProblemStreamId);
    return generate(spec, rng);
}

/// Canonical text form of a system: the problem-file JSON document with all
/// reals printed to 17 significant digits. Digests and files both use it, so
/// save -> load reproduces every entry exactly.
inline std::string canonical_system_text(const LinearSystem& sys) {
    const std::size_t n = sys.size();
    std::string out;
    out.reserve(n * n * 22 + n * 22 + 64);
    out += "{\"n\": ";
    out += std::to_string(n);
    out += ",\n\"a\": [";
    for (std::size_t i = 0; i < n; ++i) {
        out += (i == 0) ? "\n[" : ",\n[";
        for (std::size_t j = 0; j < n; ++j) {
            if (j) out += ", ";
            append_real(out, sys.a(i, j));
        }
        out += "]";
    }
    out += "],\n\"b\": [";
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += ", ";
        append_real(out, sys.b(i));
    }
    out += "]}\n";
    return out;
}

inline std::uint64_t system_digest(const LinearSystem& sys) {
    return fnv1a64(canonical_system_text(sys));
}

inline LinearSystem system_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ParseError("problem file: top level must be an object");
    if (!doc.contains("n") || !doc.contains("a") || !doc.contains("b"))
        throw ParseError("problem file: missing one of the fields n, a, b");
    const std::int64_t n_raw = as_int<ParseError>(doc["n"], "problem file field n");
    if (n_raw < 1) throw ParseError("problem file: n must be positive");
    const auto n = static_cast<std::size_t>(n_raw);

    const auto& a = doc["a"];
    if (!a.is_array() || a.size() != n)
        throw ParseError("problem file: a must be an array of exactly n rows");
    std::vector<std::vector<double>> rows(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = a[i];
        if (!r.is_array() || r.size() != n)
            throw ParseError("problem file: row " + std::to_string(i + 1) +
                             " of a must hold exactly n numbers");
        for (std::size_t j = 0; j < n; ++j)
            rows[i][j] = as_real<ParseError>(r[j], "problem file matrix entry");
    }
    const auto& b = doc["b"];
    if (!b.is_array() || b.size() != n)
        throw ParseError("problem file: b must be an array of exactly n numbers");
    std::vector<double> rhs(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        rhs[i] = as_real<ParseError>(b[i], "problem file rhs entry");

    return LinearSystem(rows, std::move(rhs));  // invariant checks throw from here
}

inline LinearSystem load_system(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open problem file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("problem file " + path + ": " + e.what());
    }
    return system_from_json(doc);
}

inline void save_system(const LinearSystem& sys, const std::string& path) {
    const std::string text = canonical_system_text(sys);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open output file: " + path);
    out << text;
    if (!out) throw IoError("failed writing problem file: " + path);
}

}  // namespace evosr
