#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "evosr/errors.hpp"
#include "evosr/evolution.hpp"
#include "evosr/json_io.hpp"
#include "evosr/linear_system.hpp"
#include "evosr/metrics.hpp"
#include "evosr/problem.hpp"
#include "evosr/selection.hpp"

namespace evosr {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::uint16_t kDefaultPort = 7201;
inline constexpr std::size_t kMaxFrameBytes = 64ull << 20;  // 64 MiB

// One frame on the wire: a 4-byte big-endian unsigned payload length followed
// by that many bytes of UTF-8 JSON with a top-level "type" field. Reals are
// decimal text with 17 significant digits so every double crosses the wire
// bit-exactly; divergent individuals carry the string sentinel "inf" in their
// error field.

struct Hello {
    int protocol_version = kProtocolVersion;
    int slave_capacity = 1;

    friend bool operator==(const Hello&, const Hello&) = default;
};

/// Shipped once inside the first assignment so slaves can cache the problem
/// and the knobs; later assignments carry digests only.
struct SetupPayload {
    LinearSystem system;
    EvoParams params;
    std::uint64_t seed = 0;

    friend bool operator==(const SetupPayload& a, const SetupPayload& b) {
        return a.system == b.system && a.seed == b.seed &&
               params_wire_text_eq(a.params, b.params);
    }

    static bool params_wire_text_eq(const EvoParams& x, const EvoParams& y);
};

struct Assign {
    std::int64_t t = 0;
    std::uint64_t system_digest = 0;
    std::uint64_t params_digest = 0;
    SelectionMethod selection = SelectionMethod::bas;
    std::uint32_t rng_stream_id = 0;
    std::vector<Individual> subpop;  // only x and omega travel
    std::optional<SetupPayload> setup;

    friend bool operator==(const Assign&, const Assign&) = default;
};

struct SubResult {
    std::int64_t t = 0;
    std::vector<Individual> subpop;  // x, omega and error travel
    SlavePhase timings;

    friend bool operator==(const SubResult& a, const SubResult& b) {
        return a.t == b.t && a.subpop == b.subpop && a.timings.t_um == b.timings.t_um &&
               a.timings.t_m == b.timings.t_m && a.timings.t_f == b.timings.t_f &&
               a.timings.t_a == b.timings.t_a && a.timings.t_s_partial == b.timings.t_s_partial;
    }
};

struct Terminate {
    std::string reason;

    friend bool operator==(const Terminate&, const Terminate&) = default;
};

struct Ack {
    std::int64_t t = 0;
    std::string error;  // empty when the acknowledgement is clean

    friend bool operator==(const Ack&, const Ack&) = default;
};

using Message = std::variant<Hello, Assign, SubResult, Terminate, Ack>;

// ---------------------------------------------------------------------------
// canonical parameter serialization (also the digest input)

inline std::string params_wire_text(const EvoParams& p) {
    std::string out = "{\"pop_size\": ";
    out += std::to_string(p.pop_size);
    out += ", \"epsilon\": ";
    append_real(out, p.epsilon);
    out += ", \"max_generations\": ";
    out += std::to_string(p.max_generations);
    out += ", \"omega_lo\": ";
    append_real(out, p.omega_lo);
    out += ", \"omega_hi\": ";
    append_real(out, p.omega_hi);
    out += ", \"gamma\": ";
    append_real(out, p.gamma);
    out += ", \"lambda\": ";
    append_real(out, p.lambda);
    out += ", \"p_max\": ";
    append_real(out, p.p_max);
    out += ", \"p_min\": ";
    append_real(out, p.p_min);
    out += ", \"selection\": \"";
    out += selection_name(p.selection);
    out += "\", \"init_clip\": ";
    append_real(out, p.init_clip);
    out += "}";
    return out;
}

inline bool SetupPayload::params_wire_text_eq(const EvoParams& x, const EvoParams& y) {
    return params_wire_text(x) == params_wire_text(y);
}

inline std::uint64_t params_digest(const EvoParams& p) { return fnv1a64(params_wire_text(p)); }

inline EvoParams params_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw MalformedPayload("params: expected an object");
    EvoParams p;
    p.pop_size = static_cast<int>(as_int<MalformedPayload>(j.at("pop_size"), "params.pop_size"));
    p.epsilon = as_real<MalformedPayload>(j.at("epsilon"), "params.epsilon");
    p.max_generations = as_int<MalformedPayload>(j.at("max_generations"), "params.max_generations");
    p.omega_lo = as_real<MalformedPayload>(j.at("omega_lo"), "params.omega_lo");
    p.omega_hi = as_real<MalformedPayload>(j.at("omega_hi"), "params.omega_hi");
    p.gamma = as_real<MalformedPayload>(j.at("gamma"), "params.gamma");
    p.lambda = as_real<MalformedPayload>(j.at("lambda"), "params.lambda");
    p.p_max = as_real<MalformedPayload>(j.at("p_max"), "params.p_max");
    p.p_min = as_real<MalformedPayload>(j.at("p_min"), "params.p_min");
    if (!j.at("selection").is_string()) throw MalformedPayload("params.selection: expected string");
    p.selection = parse_selection(j.at("selection").get<std::string>());
    p.init_clip = as_real<MalformedPayload>(j.at("init_clip"), "params.init_clip");
    return p;
}

// ---------------------------------------------------------------------------
// encoding

namespace detail {

inline void append_vector(std::string& out, const std::vector<double>& v, const char* what) {
    out += "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i]))
            throw NonFiniteValue(std::string(what) + " holds a non-finite value");
        if (i) out += ", ";
        append_real(out, v[i]);
    }
    out += "]";
}

inline void append_individual(std::string& out, const Individual& ind, bool with_error) {
    out += "{\"x\": ";
    append_vector(out, ind.x, "individual solution vector");
    out += ", \"omega\": ";
    if (!std::isfinite(ind.omega)) throw NonFiniteValue("individual omega is non-finite");
    append_real(out, ind.omega);
    if (with_error) {
        out += ", \"error\": ";
        if (std::isfinite(ind.error))
            append_real(out, ind.error);
        else
            out += "\"inf\"";
    }
    out += "}";
}

inline void append_json_string(std::string& out, std::string_view s) {
    out += '"';
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    out += '"';
}

inline std::string payload_text(const Message& msg) {
    std::string out;
    if (const auto* hello = std::get_if<Hello>(&msg)) {
        out += "{\"type\": \"hello\", \"protocol_version\": ";
        out += std::to_string(hello->protocol_version);
        out += ", \"slave_capacity\": ";
        out += std::to_string(hello->slave_capacity);
        out += "}";
    } else if (const auto* assign = std::get_if<Assign>(&msg)) {
        out += "{\"type\": \"assign\", \"t\": ";
        out += std::to_string(assign->t);
        out += ", \"system_digest\": \"";
        out += digest_hex(assign->system_digest);
        out += "\", \"params_digest\": \"";
        out += digest_hex(assign->params_digest);
        out += "\", \"selection\": \"";
        out += selection_name(assign->selection);
        out += "\", \"rng_stream_id\": ";
        out += std::to_string(assign->rng_stream_id);
        out += ", \"subpop\": [";
        for (std::size_t i = 0; i < assign->subpop.size(); ++i) {
            if (i) out += ", ";
            append_individual(out, assign->subpop[i], /*with_error=*/false);
        }
        out += "]";
        if (assign->setup) {
            out += ", \"setup\": {\"seed\": ";
            out += std::to_string(assign->setup->seed);
            out += ", \"params\": ";
            out += params_wire_text(assign->setup->params);
            out += ", \"system\": ";
            std::string sys_text = canonical_system_text(assign->setup->system);
            // canonical text ends with a newline meant for files
            while (!sys_text.empty() && sys_text.back() == '\n') sys_text.pop_back();
            out += sys_text;
            out += "}";
        }
        out += "}";
    } else if (const auto* sub = std::get_if<SubResult>(&msg)) {
        out += "{\"type\": \"sub_result\", \"t\": ";
        out += std::to_string(sub->t);
        out += ", \"subpop\": [";
        for (std::size_t i = 0; i < sub->subpop.size(); ++i) {
            if (i) out += ", ";
            append_individual(out, sub->subpop[i], /*with_error=*/true);
        }
        out += "], \"timings\": {\"t_um\": ";
        append_real(out, sub->timings.t_um);
        out += ", \"t_m\": ";
        append_real(out, sub->timings.t_m);
        out += ", \"t_f\": ";
        append_real(out, sub->timings.t_f);
        out += ", \"t_a\": ";
        append_real(out, sub->timings.t_a);
        if (sub->timings.t_s_partial != 0.0) {
            out += ", \"t_s_partial\": ";
            append_real(out, sub->timings.t_s_partial);
        }
        out += "}}";
    } else if (const auto* term = std::get_if<Terminate>(&msg)) {
        out += "{\"type\": \"terminate\", \"reason\": ";
        append_json_string(out, term->reason);
        out += "}";
    } else {
        const auto& ack = std::get<Ack>(msg);
        out += "{\"type\": \"ack\", \"t\": ";
        out += std::to_string(ack.t);
        if (!ack.error.empty()) {
            out += ", \"error\": ";
            append_json_string(out, ack.error);
        }
        out += "}";
    }
    return out;
}

}  // namespace detail

/// Serializes one frame: 4-byte big-endian length prefix + JSON payload.
inline std::string encode(const Message& msg) {
    const std::string payload = detail::payload_text(msg);
    if (payload.size() > kMaxFrameBytes)
        throw OversizeFrame("frame payload exceeds the 64 MiB cap");
    std::string out;
    out.reserve(payload.size() + 4);
    const auto len = static_cast<std::uint32_t>(payload.size());
    out.push_back(static_cast<char>((len >> 24) & 0xFF));
    out.push_back(static_cast<char>((len >> 16) & 0xFF));
    out.push_back(static_cast<char>((len >> 8) & 0xFF));
    out.push_back(static_cast<char>(len & 0xFF));
    out += payload;
    return out;
}

// ---------------------------------------------------------------------------
// decoding

namespace detail {

inline std::vector<double> vector_from_json(const nlohmann::json& j, const char* what) {
    if (!j.is_array()) throw MalformedPayload(std::string(what) + ": expected an array");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& v : j) out.push_back(as_real<MalformedPayload>(v, what));
    return out;
}

inline Individual individual_from_json(const nlohmann::json& j, bool with_error) {
    if (!j.is_object()) throw MalformedPayload("individual: expected an object");
    Individual ind;
    ind.x = vector_from_json(j.at("x"), "individual solution vector");
    ind.omega = as_real<MalformedPayload>(j.at("omega"), "individual omega");
    if (with_error) {
        const auto& e = j.at("error");
        if (e.is_string()) {
            if (e.get<std::string>() != "inf")
                throw MalformedPayload("individual error: unknown sentinel " +
                                       e.get<std::string>());
            ind.error = kInf;
        } else {
            ind.error = as_real<MalformedPayload>(e, "individual error");
        }
        ind.evaluated = true;
    }
    return ind;
}

inline Message message_from_json(const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("type") || !doc["type"].is_string())
        throw MalformedPayload("frame payload lacks a type field");
    const std::string type = doc["type"].get<std::string>();
    try {
        if (type == "hello") {
            Hello h;
            h.protocol_version =
                static_cast<int>(as_int<MalformedPayload>(doc.at("protocol_version"),
                                                          "hello.protocol_version"));
            h.slave_capacity = static_cast<int>(
                as_int<MalformedPayload>(doc.at("slave_capacity"), "hello.slave_capacity"));
            if (h.protocol_version != kProtocolVersion)
                throw VersionMismatch("peer speaks protocol version " +
                                      std::to_string(h.protocol_version) + ", expected " +
                                      std::to_string(kProtocolVersion));
            return h;
        }
        if (type == "assign") {
            Assign a;
            a.t = as_int<MalformedPayload>(doc.at("t"), "assign.t");
            a.system_digest =
                parse_digest_hex<MalformedPayload>(doc.at("system_digest"), "assign.system_digest");
            a.params_digest =
                parse_digest_hex<MalformedPayload>(doc.at("params_digest"), "assign.params_digest");
            if (!doc.at("selection").is_string())
                throw MalformedPayload("assign.selection: expected string");
            a.selection = parse_selection(doc.at("selection").get<std::string>());
            a.rng_stream_id = static_cast<std::uint32_t>(
                as_int<MalformedPayload>(doc.at("rng_stream_id"), "assign.rng_stream_id"));
            const auto& subpop = doc.at("subpop");
            if (!subpop.is_array()) throw MalformedPayload("assign.subpop: expected an array");
            for (const auto& ij : subpop)
                a.subpop.push_back(individual_from_json(ij, /*with_error=*/false));
            if (doc.contains("setup")) {
                const auto& s = doc["setup"];
                if (!s.is_object()) throw MalformedPayload("assign.setup: expected an object");
                SetupPayload setup{system_from_json(s.at("system")),
                                   params_from_json(s.at("params")),
                                   static_cast<std::uint64_t>(
                                       as_int<MalformedPayload>(s.at("seed"), "setup.seed"))};
                a.setup.emplace(std::move(setup));
            }
            return a;
        }
        if (type == "sub_result") {
            SubResult r;
            r.t = as_int<MalformedPayload>(doc.at("t"), "sub_result.t");
            const auto& subpop = doc.at("subpop");
            if (!subpop.is_array()) throw MalformedPayload("sub_result.subpop: expected an array");
            for (const auto& ij : subpop)
                r.subpop.push_back(individual_from_json(ij, /*with_error=*/true));
            const auto& tm = doc.at("timings");
            if (!tm.is_object()) throw MalformedPayload("sub_result.timings: expected an object");
            r.timings.t_um = as_real<MalformedPayload>(tm.at("t_um"), "timings.t_um");
            r.timings.t_m = as_real<MalformedPayload>(tm.at("t_m"), "timings.t_m");
            r.timings.t_f = as_real<MalformedPayload>(tm.at("t_f"), "timings.t_f");
            r.timings.t_a = as_real<MalformedPayload>(tm.at("t_a"), "timings.t_a");
            if (tm.contains("t_s_partial"))
                r.timings.t_s_partial =
                    as_real<MalformedPayload>(tm["t_s_partial"], "timings.t_s_partial");
            return r;
        }
        if (type == "terminate") {
            Terminate t;
            if (!doc.at("reason").is_string())
                throw MalformedPayload("terminate.reason: expected string");
            t.reason = doc["reason"].get<std::string>();
            return t;
        }
        if (type == "ack") {
            Ack a;
            a.t = as_int<MalformedPayload>(doc.at("t"), "ack.t");
            if (doc.contains("error")) {
                if (!doc["error"].is_string())
                    throw MalformedPayload("ack.error: expected string");
                a.error = doc["error"].get<std::string>();
            }
            return a;
        }
    } catch (const nlohmann::json::exception& e) {
        throw MalformedPayload(std::string("frame payload: ") + e.what());
    }
    throw MalformedPayload("unknown frame type: " + type);
}

}  // namespace detail

/// Attempts to decode one frame from the front of buf. Returns false when
/// more bytes are needed (nothing consumed); throws OversizeFrame,
/// MalformedPayload or VersionMismatch on poisoned input. On success,
/// consumed holds the total frame size in bytes.
inline bool try_decode(std::string_view buf, Message& out, std::size_t& consumed) {
    if (buf.size() < 4) return false;
    const auto b = [&](int i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(buf[i])); };
    const std::uint32_t len = (b(0) << 24) | (b(1) << 16) | (b(2) << 8) | b(3);
    if (len > kMaxFrameBytes)
        throw OversizeFrame("frame length prefix " + std::to_string(len) +
                            " exceeds the 64 MiB cap");
    if (buf.size() < 4u + len) return false;
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(buf.substr(4, len));
    } catch (const nlohmann::json::exception& e) {
        throw MalformedPayload(std::string("frame payload is not valid JSON: ") + e.what());
    }
    out = detail::message_from_json(doc);
    consumed = 4u + len;
    return true;
}

/// Decodes exactly one complete frame; FrameTooShort when bytes are missing.
inline Message decode(std::string_view buf, std::size_t& consumed) {
    Message out;
    if (!try_decode(buf, out, consumed))
        throw FrameTooShort("incomplete frame: have " + std::to_string(buf.size()) + " bytes");
    return out;
}

inline Message decode(std::string_view buf) {
    std::size_t consumed = 0;
    return decode(buf, consumed);
}

/// Incremental frame assembler for a byte stream delivered in arbitrary
/// chunks. next() optionally reports the decode duration, which is the
/// unmarshalling sample of the timing model.
class FrameReader {
public:
    void feed(const char* data, std::size_t len) { buf_.append(data, len); }
    void feed(std::string_view data) { buf_.append(data); }

    std::optional<Message> next(double* decode_seconds = nullptr) {
        Message msg;
        std::size_t consumed = 0;
        Stopwatch sw;
        if (!try_decode(buf_, msg, consumed)) return std::nullopt;
        if (decode_seconds) *decode_seconds = sw.seconds();
        buf_.erase(0, consumed);
        return msg;
    }

    std::size_t buffered() const { return buf_.size(); }

private:
    std::string buf_;
};

}  // namespace evosr
