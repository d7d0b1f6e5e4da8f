#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "evosr/config.hpp"
#include "evosr/engine.hpp"
#include "evosr/errors.hpp"
#include "evosr/json_io.hpp"
#include "evosr/metrics.hpp"

namespace evosr {

/// One run's worth of report content: the resolved configuration plus the
/// solver outcome, labeled for multi-run comparisons.
struct RunRecord {
    std::string label;
    RunConfig config;
    SolveResult result;
};

inline constexpr const char* kReportFormatName = "evosr-report";
inline constexpr int kReportFormatVersion = 1;
inline constexpr const char* kTsFormulaNote =
    "distributed totals for ts follow the timing model as defined: worker-side "
    "partial selection replaces master selection and no master-side unmarshal or "
    "selection term is charged";

namespace detail {

inline PhaseTimings aggregate_timings(const SolveResult& result) {
    PhaseTimings total;
    for (const auto& gen : result.per_generation) {
        const auto& ph = gen.timings;
        total.t_r += ph.t_r;
        total.t_m += ph.t_m;
        total.t_f += ph.t_f;
        total.t_a += ph.t_a;
        total.t_s += ph.t_s;
        total.t_marshal += ph.t_marshal;
        total.t_trans += ph.t_trans;
        total.t_unmarshal += ph.t_unmarshal;
        if (total.per_slave.size() < ph.per_slave.size())
            total.per_slave.resize(ph.per_slave.size());
        for (std::size_t i = 0; i < ph.per_slave.size(); ++i) {
            total.per_slave[i].t_um += ph.per_slave[i].t_um;
            total.per_slave[i].t_m += ph.per_slave[i].t_m;
            total.per_slave[i].t_f += ph.per_slave[i].t_f;
            total.per_slave[i].t_a += ph.per_slave[i].t_a;
            total.per_slave[i].t_s_partial += ph.per_slave[i].t_s_partial;
        }
    }
    return total;
}

inline bool is_distributed(const RunRecord& rec) {
    return rec.config.topology.kind != TopologyKind::single;
}

inline double total_of(const PhaseTimings& ph, const RunRecord& rec) {
    return is_distributed(rec) ? t_distributed(ph, rec.config.params.selection) : t_single(ph);
}

inline nlohmann::json timings_to_json(const PhaseTimings& ph) {
    nlohmann::json slaves = nlohmann::json::array();
    for (const auto& s : ph.per_slave)
        slaves.push_back({{"t_um", s.t_um},
                          {"t_m", s.t_m},
                          {"t_f", s.t_f},
                          {"t_a", s.t_a},
                          {"t_s_partial", s.t_s_partial}});
    return nlohmann::json{{"t_r", ph.t_r},
                          {"t_m", ph.t_m},
                          {"t_f", ph.t_f},
                          {"t_a", ph.t_a},
                          {"t_s", ph.t_s},
                          {"t_marshal", ph.t_marshal},
                          {"t_trans", ph.t_trans},
                          {"t_unmarshal", ph.t_unmarshal},
                          {"per_slave", slaves}};
}

inline PhaseTimings timings_from_json(const nlohmann::json& j) {
    PhaseTimings ph;
    ph.t_r = as_real<ParseError>(j.at("t_r"), "timings.t_r");
    ph.t_m = as_real<ParseError>(j.at("t_m"), "timings.t_m");
    ph.t_f = as_real<ParseError>(j.at("t_f"), "timings.t_f");
    ph.t_a = as_real<ParseError>(j.at("t_a"), "timings.t_a");
    ph.t_s = as_real<ParseError>(j.at("t_s"), "timings.t_s");
    ph.t_marshal = as_real<ParseError>(j.at("t_marshal"), "timings.t_marshal");
    ph.t_trans = as_real<ParseError>(j.at("t_trans"), "timings.t_trans");
    ph.t_unmarshal = as_real<ParseError>(j.at("t_unmarshal"), "timings.t_unmarshal");
    for (const auto& s : j.at("per_slave")) {
        SlavePhase sp;
        sp.t_um = as_real<ParseError>(s.at("t_um"), "per_slave.t_um");
        sp.t_m = as_real<ParseError>(s.at("t_m"), "per_slave.t_m");
        sp.t_f = as_real<ParseError>(s.at("t_f"), "per_slave.t_f");
        sp.t_a = as_real<ParseError>(s.at("t_a"), "per_slave.t_a");
        sp.t_s_partial = as_real<ParseError>(s.at("t_s_partial"), "per_slave.t_s_partial");
        ph.per_slave.push_back(sp);
    }
    return ph;
}

/// The unique single-topology baseline, when the record set has exactly one.
inline std::optional<std::size_t> baseline_index(const std::vector<RunRecord>& records) {
    std::optional<std::size_t> found;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (is_distributed(records[i])) continue;
        if (found) return std::nullopt;
        found = i;
    }
    return found;
}

}  // namespace detail

inline nlohmann::json report_to_json(const std::vector<RunRecord>& records) {
    if (records.empty()) throw EmptyCollection("report needs at least one run");
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& rec : records) {
        nlohmann::json gens = nlohmann::json::array();
        for (std::size_t t = 0; t < rec.result.per_generation.size(); ++t) {
            const auto& gen = rec.result.per_generation[t];
            gens.push_back({{"generation", t},
                            {"champion_error", gen.champion_error},
                            {"champion_omega", gen.champion_omega},
                            {"timings", detail::timings_to_json(gen.timings)},
                            {"t_total", detail::total_of(gen.timings, rec)}});
        }
        const PhaseTimings totals = detail::aggregate_timings(rec.result);
        nlohmann::json totals_json = detail::timings_to_json(totals);
        totals_json["t_total"] =
            rec.result.per_generation.empty() ? 0.0 : detail::total_of(totals, rec);
        runs.push_back({{"label", rec.label},
                        {"config", run_config_to_json(rec.config)},
                        {"result",
                         {{"converged", rec.result.converged},
                          {"aborted", rec.result.aborted},
                          {"abort_reason", rec.result.abort_reason},
                          {"generations", rec.result.generations},
                          {"champion_error", rec.result.champion_error},
                          {"champion_omega", rec.result.champion_omega},
                          {"champion_x", rec.result.champion_x},
                          {"per_generation", gens},
                          {"totals", totals_json}}}});
    }

    nlohmann::json doc{{"format", kReportFormatName},
                       {"version", kReportFormatVersion},
                       {"notes", nlohmann::json::array({kTsFormulaNote})},
                       {"runs", runs}};

    if (const auto base = detail::baseline_index(records)) {
        const PhaseTimings base_total = detail::aggregate_timings(records[*base].result);
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& rec : records) {
            if (!detail::is_distributed(rec) || rec.result.per_generation.empty()) continue;
            const PhaseTimings dist_total = detail::aggregate_timings(rec.result);
            const double ts = t_single(base_total);
            const double td = t_distributed(dist_total, rec.config.params.selection);
            if (!(td > 0.0)) continue;
            const auto sp = compute_speedup(ts, td, rec.config.topology.slave_count);
            rows.push_back({{"label", rec.label},
                            {"t_single", ts},
                            {"t_distributed", td},
                            {"speedup", sp.speedup},
                            {"improvement", sp.improvement},
                            {"improvement_pct", sp.improvement * 100.0}});
        }
        if (!rows.empty())
            doc["comparison"] = {{"single", records[*base].label}, {"rows", rows}};
    }
    return doc;
}

inline std::string render_report_json(const std::vector<RunRecord>& records) {
    return report_to_json(records).dump(2) + "\n";
}

inline std::string render_report_csv(const std::vector<RunRecord>& records) {
    if (records.empty()) throw EmptyCollection("report needs at least one run");
    std::string out;
    for (const auto& rec : records) {
        out += "# config ";
        out += rec.label;
        out += ": ";
        out += run_config_to_json(rec.config).dump();
        out += "\n";
    }
    out +=
        "run,topology,selection,slaves,generation,champion_error,champion_omega,"
        "t_r,t_m,t_f,t_a,t_s,t_marshal,t_trans,t_unmarshal,t_total,speedup,improvement_pct\n";

    const auto base = detail::baseline_index(records);
    const auto row = [&](const RunRecord& rec, const std::string& generation,
                         double champion_error, double champion_omega, const PhaseTimings& ph,
                         std::optional<double> base_total) {
        out += rec.label;
        out += ',';
        out += topology_name(rec.config.topology.kind);
        out += ',';
        out += selection_name(rec.config.params.selection);
        out += ',';
        out += std::to_string(rec.config.topology.slave_count);
        out += ',';
        out += generation;
        out += ',';
        append_real(out, champion_error);
        out += ',';
        append_real(out, champion_omega);
        for (double v : {ph.t_r, ph.t_m, ph.t_f, ph.t_a, ph.t_s, ph.t_marshal, ph.t_trans,
                         ph.t_unmarshal}) {
            out += ',';
            append_real(out, v);
        }
        const double total = detail::total_of(ph, rec);
        out += ',';
        append_real(out, total);
        if (base_total && detail::is_distributed(rec) && total > 0.0) {
            const auto sp =
                compute_speedup(*base_total, total, rec.config.topology.slave_count);
            out += ',';
            append_real(out, sp.speedup);
            out += ',';
            append_real(out, sp.improvement * 100.0);
        } else {
            out += ",,";
        }
        out += '\n';
    };

    for (const auto& rec : records) {
        for (std::size_t t = 0; t < rec.result.per_generation.size(); ++t) {
            const auto& gen = rec.result.per_generation[t];
            std::optional<double> base_total;
            if (base && *base < records.size() &&
                t < records[*base].result.per_generation.size())
                base_total = detail::total_of(records[*base].result.per_generation[t].timings,
                                              records[*base]);
            row(rec, std::to_string(t), gen.champion_error, gen.champion_omega, gen.timings,
                base_total);
        }
        if (!rec.result.per_generation.empty()) {
            std::optional<double> base_total;
            if (base)
                base_total = detail::total_of(detail::aggregate_timings(records[*base].result),
                                              records[*base]);
            row(rec, "total", rec.result.champion_error, rec.result.champion_omega,
                detail::aggregate_timings(rec.result), base_total);
        }
    }
    return out;
}

/// Writes the report in the selected format. The content is fully rendered
/// before the file is opened, so an invalid record set never leaves a
/// partial file behind.
inline void emit_report(const std::vector<RunRecord>& records, const std::string& path,
                        const std::string& format) {
    if (records.empty()) throw EmptyCollection("report needs at least one run");
    std::string content;
    if (format == "json")
        content = render_report_json(records);
    else if (format == "csv")
        content = render_report_csv(records);
    else
        throw InvalidParams("unknown report format: " + format);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open report file: " + path);
    out << content;
    if (!out) throw IoError("failed writing report file: " + path);
}

/// Parses a JSON report back into records, for merging runs produced by
/// separate invocations into one comparison report.
inline std::vector<RunRecord> report_from_json(const nlohmann::json& doc) {
    if (!doc.is_object() || doc.value("format", "") != kReportFormatName)
        throw ParseError("not a solver report document");
    std::vector<RunRecord> records;
    try {
        for (const auto& run : doc.at("runs")) {
            RunRecord rec;
            rec.label = run.at("label").get<std::string>();
            rec.config = run_config_from_json(run.at("config"));
            const auto& res = run.at("result");
            rec.result.converged = res.at("converged").get<bool>();
            rec.result.aborted = res.at("aborted").get<bool>();
            rec.result.abort_reason = res.at("abort_reason").get<std::string>();
            rec.result.generations = as_int<ParseError>(res.at("generations"), "generations");
            rec.result.champion_error =
                as_real<ParseError>(res.at("champion_error"), "champion_error");
            rec.result.champion_omega =
                as_real<ParseError>(res.at("champion_omega"), "champion_omega");
            for (const auto& v : res.at("champion_x"))
                rec.result.champion_x.push_back(as_real<ParseError>(v, "champion_x"));
            for (const auto& gen : res.at("per_generation")) {
                GenerationStats stats;
                stats.champion_error =
                    as_real<ParseError>(gen.at("champion_error"), "champion_error");
                stats.champion_omega =
                    as_real<ParseError>(gen.at("champion_omega"), "champion_omega");
                stats.timings = detail::timings_from_json(gen.at("timings"));
                rec.result.per_generation.push_back(std::move(stats));
            }
            records.push_back(std::move(rec));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("report: ") + e.what());
    }
    return records;
}

inline std::vector<RunRecord> load_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open report file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("report " + path + ": " + e.what());
    }
    return report_from_json(doc);
}

}  // namespace evosr
