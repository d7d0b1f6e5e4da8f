#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "evosr/engine.hpp"
#include "evosr/errors.hpp"
#include "evosr/evolution.hpp"
#include "evosr/json_io.hpp"
#include "evosr/problem.hpp"
#include "evosr/wire.hpp"

namespace evosr {

/// Fully resolved run configuration: every knob a run uses, assembled from
/// defaults, an optional config file and command-line flags. The resolved
/// value is echoed into every report so a run can be reproduced from its
/// output alone.
struct RunConfig {
    ProblemSpec problem;
    EvoParams params;
    Topology topology;
    std::uint64_t seed = 42;
    std::string out_path = "report.json";
    std::string format = "json";  // "json" or "csv"
    std::string listen = "0.0.0.0:7201";
    std::string connect = "127.0.0.1:7201";
    double handshake_timeout = 10.0;
    double gather_timeout = 30.0;
};

inline nlohmann::json params_to_json(const EvoParams& p) {
    return nlohmann::json{{"pop_size", p.pop_size},
                          {"epsilon", p.epsilon},
                          {"max_generations", p.max_generations},
                          {"omega_lo", p.omega_lo},
                          {"omega_hi", p.omega_hi},
                          {"gamma", p.gamma},
                          {"lambda", p.lambda},
                          {"p_max", p.p_max},
                          {"p_min", p.p_min},
                          {"selection", std::string(selection_name(p.selection))},
                          {"init_clip", p.init_clip}};
}

inline nlohmann::json run_config_to_json(const RunConfig& cfg) {
    return nlohmann::json{
        {"problem",
         {{"family", std::string(family_name(cfg.problem.family))},
          {"n", cfg.problem.n},
          {"seed", cfg.problem.seed},
          {"ensure_dominance", cfg.problem.ensure_dominance},
          {"path", cfg.problem.path}}},
        {"params", params_to_json(cfg.params)},
        {"topology",
         {{"kind", std::string(topology_name(cfg.topology.kind))},
          {"slaves", cfg.topology.slave_count}}},
        {"seed", cfg.seed},
        {"output", {{"path", cfg.out_path}, {"format", cfg.format}}},
        {"network",
         {{"listen", cfg.listen},
          {"connect", cfg.connect},
          {"handshake_timeout", cfg.handshake_timeout},
          {"gather_timeout", cfg.gather_timeout}}}};
}

namespace detail {

template <class T, class Fn>
inline void maybe(const nlohmann::json& j, const char* key, T& slot, Fn&& convert) {
    if (j.contains(key)) slot = convert(j.at(key));
}

}  // namespace detail

/// Loads a (possibly partial) configuration document over the given
/// defaults; absent keys keep their current values. Throws ParseError on
/// malformed content.
inline void run_config_merge_json(RunConfig& cfg, const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("config: top level must be an object");
    try {
        if (j.contains("problem")) {
            const auto& p = j.at("problem");
            detail::maybe(p, "family", cfg.problem.family,
                          [](const nlohmann::json& v) { return parse_family(v.get<std::string>()); });
            detail::maybe(p, "n", cfg.problem.n, [](const nlohmann::json& v) {
                return static_cast<std::size_t>(as_int<ParseError>(v, "problem.n"));
            });
            detail::maybe(p, "seed", cfg.problem.seed, [](const nlohmann::json& v) {
                return static_cast<std::uint64_t>(as_int<ParseError>(v, "problem.seed"));
            });
            detail::maybe(p, "ensure_dominance", cfg.problem.ensure_dominance,
                          [](const nlohmann::json& v) { return v.get<bool>(); });
            detail::maybe(p, "path", cfg.problem.path,
                          [](const nlohmann::json& v) { return v.get<std::string>(); });
        }
        if (j.contains("params")) {
            const auto& p = j.at("params");
            detail::maybe(p, "pop_size", cfg.params.pop_size, [](const nlohmann::json& v) {
                return static_cast<int>(as_int<ParseError>(v, "params.pop_size"));
            });
            detail::maybe(p, "epsilon", cfg.params.epsilon, [](const nlohmann::json& v) {
                return as_real<ParseError>(v, "params.epsilon");
            });
            detail::maybe(p, "max_generations", cfg.params.max_generations,
                          [](const nlohmann::json& v) {
                              return as_int<ParseError>(v, "params.max_generations");
                          });
            detail::maybe(p, "omega_lo", cfg.params.omega_lo, [](const nlohmann::json& v) {
                return as_real<ParseError>(v, "params.omega_lo");
            });
            detail::maybe(p, "omega_hi", cfg.params.omega_hi, [](const nlohmann::json& v) {
                return as_real<ParseError>(v, "params.omega_hi");
            });
            detail::maybe(p, "gamma", cfg.params.gamma, [](const nlohmann::json& v) {
                return as_real<ParseError>(v, "params.gamma");
            });
            detail::maybe(p, "lambda", cfg.params.lambda, [](const nlohmann::json& v) {
                return as_real<ParseError>(v, "params.lambda");
            });
            detail::maybe(p, "p_max", cfg.params.p_max, [](const nlohmann::json& v) {
                return as_real<ParseError>(v, "params.p_max");
            });
            detail::maybe(p, "p_min", cfg.params.p_min, [](const nlohmann::json& v) {
                return as_real<ParseError>(v, "params.p_min");
            });
            detail::maybe(p, "selection", cfg.params.selection, [](const nlohmann::json& v) {
                return parse_selection(v.get<std::string>());
            });
            detail::maybe(p, "init_clip", cfg.params.init_clip, [](const nlohmann::json& v) {
                return as_real<ParseError>(v, "params.init_clip");
            });
        }
        if (j.contains("topology")) {
            const auto& t = j.at("topology");
            detail::maybe(t, "kind", cfg.topology.kind, [](const nlohmann::json& v) {
                return parse_topology(v.get<std::string>());
            });
            detail::maybe(t, "slaves", cfg.topology.slave_count, [](const nlohmann::json& v) {
                return static_cast<int>(as_int<ParseError>(v, "topology.slaves"));
            });
        }
        detail::maybe(j, "seed", cfg.seed, [](const nlohmann::json& v) {
            return static_cast<std::uint64_t>(as_int<ParseError>(v, "seed"));
        });
        if (j.contains("output")) {
            const auto& o = j.at("output");
            detail::maybe(o, "path", cfg.out_path,
                          [](const nlohmann::json& v) { return v.get<std::string>(); });
            detail::maybe(o, "format", cfg.format,
                          [](const nlohmann::json& v) { return v.get<std::string>(); });
        }
        if (j.contains("network")) {
            const auto& n = j.at("network");
            detail::maybe(n, "listen", cfg.listen,
                          [](const nlohmann::json& v) { return v.get<std::string>(); });
            detail::maybe(n, "connect", cfg.connect,
                          [](const nlohmann::json& v) { return v.get<std::string>(); });
            detail::maybe(n, "handshake_timeout", cfg.handshake_timeout,
                          [](const nlohmann::json& v) {
                              return as_real<ParseError>(v, "network.handshake_timeout");
                          });
            detail::maybe(n, "gather_timeout", cfg.gather_timeout, [](const nlohmann::json& v) {
                return as_real<ParseError>(v, "network.gather_timeout");
            });
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    run_config_merge_json(cfg, j);
    return cfg;
}

}  // namespace evosr
