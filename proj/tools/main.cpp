// evosr: evolutionary relaxation solver for dense linear systems.
//
// One binary, six workflows:
//   solve        single-process run
//   simulate     deterministic in-process virtual cluster
//   master       networked cluster master (slaves dial in)
//   slave        networked cluster worker
//   gen-problem  write a benchmark system to a problem file
//   report       merge run reports into one comparison report
//
// Exit codes: 0 success/convergence, 2 generation limit reached,
// 3 aborted cluster run, 64 usage error, 1 other runtime failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evosr/evosr.hpp"

namespace {

using namespace evosr;

constexpr int kExitOk = 0;
constexpr int kExitNoConvergence = 2;
constexpr int kExitAborted = 3;
constexpr int kExitUsage = 64;
constexpr int kExitFailure = 1;

/// Pre-scan for --config so file values become the defaults that flags then
/// override. Returns the merged configuration and the raw document (to tell
/// which keys the file itself set).
nlohmann::json load_config_document(const std::vector<std::string>& args) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a == "--config" && i + 1 < args.size())
            path = args[i + 1];
        else if (a.rfind("--config=", 0) == 0)
            path = a.substr(9);
    }
    if (path.empty()) return nlohmann::json::object();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("config file " + path + ": " + e.what());
    }
}

struct RunFlags {
    std::string problem = "p1";
    std::string selection = "bas";
    std::string format;
    std::string config_path;  // consumed by the pre-scan; registered so CLI11 accepts it
    bool problem_seed_given = false;
};

void add_run_options(CLI::App* cmd, RunConfig& cfg, RunFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON config file; flags override its values");
    cmd->add_option("--problem", flags.problem,
                    "benchmark family p1..p6, or 'file' with --problem-file")
        ->check(CLI::IsMember({"p1", "p2", "p3", "p4", "p5", "p6", "file"}));
    cmd->add_option("--problem-file", cfg.problem.path, "problem file for --problem file");
    cmd->add_option("--n", cfg.problem.n, "system dimension for generated problems");
    cmd->add_option("--problem-seed", cfg.problem.seed,
                    "seed for problem generation (defaults to --seed)");
    cmd->add_flag("--ensure-dominance", cfg.problem.ensure_dominance,
                  "rescale diagonals to 1.05x the off-diagonal row sum");
    cmd->add_option("--pop", cfg.params.pop_size, "population size (even)");
    cmd->add_option("--epsilon", cfg.params.epsilon, "convergence threshold");
    cmd->add_option("--max-gens", cfg.params.max_generations, "generation limit");
    cmd->add_option("--omega-lo", cfg.params.omega_lo, "lower relaxation factor bound");
    cmd->add_option("--omega-hi", cfg.params.omega_hi, "upper relaxation factor bound");
    cmd->add_option("--gamma", cfg.params.gamma, "bas damping exponent");
    cmd->add_option("--lambda", cfg.params.lambda, "ts damping scale (> 10)");
    cmd->add_option("--p-max", cfg.params.p_max, "ts perturbation bound, worse omega");
    cmd->add_option("--p-min", cfg.params.p_min, "ts perturbation bound, better omega");
    cmd->add_option("--selection", flags.selection, "selection method")
        ->check(CLI::IsMember({"bas", "ts"}));
    cmd->add_option("--init-clip", cfg.params.init_clip, "initial component clamp");
    cmd->add_option("--seed", cfg.seed, "run seed");
    cmd->add_option("--out", cfg.out_path, "report output path");
    cmd->add_option("--format", flags.format, "report format")
        ->check(CLI::IsMember({"json", "csv"}));
}

/// Applies post-parse defaults and conversions shared by the run commands.
void finalize_run_config(CLI::App* cmd, RunConfig& cfg, RunFlags& flags,
                         const nlohmann::json& config_doc) {
    cfg.problem.family = parse_family(flags.problem);
    cfg.params.selection = parse_selection(flags.selection);
    if (!flags.format.empty()) cfg.format = flags.format;
    const bool file_set_problem_seed =
        config_doc.contains("problem") && config_doc["problem"].contains("seed");
    if (cmd->count("--problem-seed") == 0 && !file_set_problem_seed)
        cfg.problem.seed = cfg.seed;
    if (cfg.problem.family == ProblemFamily::file && cfg.problem.path.empty())
        throw InvalidParams("--problem file requires --problem-file PATH");
}

LinearSystem build_system(const ProblemSpec& spec) {
    if (spec.family == ProblemFamily::file) return load_system(spec.path);
    return generate(spec);
}

void print_summary(const RunRecord& rec, double wall_seconds) {
    const auto& r = rec.result;
    std::printf("%s: %s after %lld generations, champion error %.6e (omega %.4f)\n",
                rec.label.c_str(),
                r.aborted ? ("aborted (" + r.abort_reason + ")").c_str()
                          : (r.converged ? "converged" : "generation limit reached"),
                static_cast<long long>(r.generations), r.champion_error, r.champion_omega);
    std::printf("  wall %.3fs, report written to %s\n", wall_seconds, rec.config.out_path.c_str());
}

int finish_run(RunRecord rec, double wall_seconds) {
    emit_report({rec}, rec.config.out_path, rec.config.format);
    print_summary(rec, wall_seconds);
    if (rec.result.aborted) return kExitAborted;
    return rec.result.converged ? kExitOk : kExitNoConvergence;
}

int run_local(RunConfig cfg, TopologyKind kind) {
    validate_topology(cfg.topology, cfg.params);
    cfg.params.validate();
    const LinearSystem sys = build_system(cfg.problem);
    Stopwatch sw;
    RunRecord rec;
    rec.config = cfg;
    rec.label = std::string(topology_name(kind)) +
                (kind == TopologyKind::single
                     ? ""
                     : "-" + std::to_string(cfg.topology.slave_count));
    rec.result = run_solver(sys, cfg.params, cfg.topology, cfg.seed);
    return finish_run(std::move(rec), sw.seconds());
}

int run_master(RunConfig cfg) {
    validate_topology(cfg.topology, cfg.params);
    cfg.params.validate();
    const LinearSystem sys = build_system(cfg.problem);
    ClusterConfig cluster;
    cluster.role = ClusterConfig::Role::master;
    cluster.endpoint = parse_endpoint(cfg.listen);
    cluster.slave_count = cfg.topology.slave_count;
    cluster.handshake_timeout = cfg.handshake_timeout;
    cluster.gather_timeout = cfg.gather_timeout;
    Stopwatch sw;
    RunRecord rec;
    rec.config = cfg;
    rec.label = "network-" + std::to_string(cfg.topology.slave_count);
    rec.result = master_run(sys, cfg.params, cluster, cfg.seed);
    return finish_run(std::move(rec), sw.seconds());
}

int run_slave(const std::string& connect, double handshake_timeout) {
    ClusterConfig cluster;
    cluster.role = ClusterConfig::Role::slave;
    cluster.endpoint = parse_endpoint(connect);
    cluster.handshake_timeout = handshake_timeout;
    slave_serve(cluster);
    std::printf("slave: terminated by master, exiting\n");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"evolutionary relaxation solver for dense linear systems"};
    app.require_subcommand(1);

    const std::vector<std::string> raw_args(argv + 1, argv + argc);

    RunConfig cfg;
    RunFlags flags;
    int expect_slaves = 5;
    std::string connect = "127.0.0.1:7201";
    std::vector<std::string> report_inputs;
    std::string report_out;
    std::string report_format = "csv";
    int solve_slaves = 1;

    auto* solve = app.add_subcommand("solve", "run the solver in a single process");
    add_run_options(solve, cfg, flags);
    solve->add_option("--slaves", solve_slaves,
                      "accepted for validation; single runs use one worker");

    auto* simulate = app.add_subcommand("simulate", "run the in-process virtual cluster");
    add_run_options(simulate, cfg, flags);
    int sim_slaves = 5;
    simulate->add_option("--slaves", sim_slaves, "number of virtual slaves");

    auto* master = app.add_subcommand("master", "run the networked cluster master");
    add_run_options(master, cfg, flags);
    master->add_option("--listen", cfg.listen, "listen endpoint HOST:PORT");
    master->add_option("--expect", expect_slaves, "number of slaves to wait for");
    master->add_option("--handshake-timeout", cfg.handshake_timeout,
                       "seconds to wait for slave registration");
    master->add_option("--gather-timeout", cfg.gather_timeout,
                       "seconds to wait per generation gather");

    auto* slave = app.add_subcommand("slave", "serve as a networked cluster worker");
    double slave_handshake = 10.0;
    slave->add_option("--connect", connect, "master endpoint HOST:PORT");
    slave->add_option("--handshake-timeout", slave_handshake, "seconds to wait for the master");

    auto* gen = app.add_subcommand("gen-problem", "write a benchmark system to a file");
    std::string gen_problem = "p1";
    std::string gen_out;
    ProblemSpec gen_spec;
    gen->add_option("--problem", gen_problem, "benchmark family p1..p6")
        ->check(CLI::IsMember({"p1", "p2", "p3", "p4", "p5", "p6"}));
    gen->add_option("--n", gen_spec.n, "system dimension");
    gen->add_option("--problem-seed", gen_spec.seed, "generation seed");
    gen->add_flag("--ensure-dominance", gen_spec.ensure_dominance,
                  "rescale diagonals to 1.05x the off-diagonal row sum");
    gen->add_option("--out", gen_out, "output problem file")->required();

    auto* report = app.add_subcommand("report", "merge run reports into one comparison report");
    report->add_option("--inputs", report_inputs, "input JSON reports")->required();
    report->add_option("--out", report_out, "output path")->required();
    report->add_option("--format", report_format, "output format")
        ->check(CLI::IsMember({"json", "csv"}));

    nlohmann::json config_doc;
    try {
        config_doc = load_config_document(raw_args);
        if (!config_doc.empty()) run_config_merge_json(cfg, config_doc);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (solve->parsed()) {
            finalize_run_config(solve, cfg, flags, config_doc);
            cfg.topology = {TopologyKind::single, 1, {}};
            // an explicit worker count participates in validation before the
            // single-process constraint is enforced
            Topology requested{TopologyKind::virtual_cluster, solve_slaves, {}};
            validate_topology(requested, cfg.params);
            if (solve_slaves != 1)
                throw InvalidParams("solve runs a single process; use simulate or master "
                                    "for multi-slave runs");
            return run_local(cfg, TopologyKind::single);
        }
        if (simulate->parsed()) {
            finalize_run_config(simulate, cfg, flags, config_doc);
            if (simulate->count("--slaves") || cfg.topology.kind != TopologyKind::virtual_cluster)
                cfg.topology = {TopologyKind::virtual_cluster, sim_slaves, {}};
            cfg.topology.kind = TopologyKind::virtual_cluster;
            return run_local(cfg, TopologyKind::virtual_cluster);
        }
        if (master->parsed()) {
            finalize_run_config(master, cfg, flags, config_doc);
            if (master->count("--expect") || cfg.topology.kind != TopologyKind::network)
                cfg.topology = {TopologyKind::network, expect_slaves, {}};
            cfg.topology.kind = TopologyKind::network;
            return run_master(cfg);
        }
        if (slave->parsed()) return run_slave(connect, slave_handshake);
        if (gen->parsed()) {
            gen_spec.family = parse_family(gen_problem);
            const LinearSystem sys = generate(gen_spec);
            save_system(sys, gen_out);
            std::printf("wrote %s system of dimension %zu to %s\n",
                        std::string(family_name(gen_spec.family)).c_str(), sys.size(),
                        gen_out.c_str());
            return kExitOk;
        }
        if (report->parsed()) {
            std::vector<RunRecord> records;
            for (const auto& path : report_inputs) {
                auto loaded = load_report(path);
                records.insert(records.end(), std::make_move_iterator(loaded.begin()),
                               std::make_move_iterator(loaded.end()));
            }
            emit_report(records, report_out, report_format);
            std::printf("merged %zu runs into %s\n", records.size(), report_out.c_str());
            return kExitOk;
        }
    } catch (const InvalidParams& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const IndivisiblePopulation& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const DimensionTooSmall& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFailure;
    }
    return kExitUsage;
}
