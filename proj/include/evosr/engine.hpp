#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "evosr/errors.hpp"
#include "evosr/evolution.hpp"
#include "evosr/linear_system.hpp"
#include "evosr/metrics.hpp"
#include "evosr/problem.hpp"
#include "evosr/rng.hpp"
#include "evosr/selection.hpp"
#include "evosr/wire.hpp"

namespace evosr {

enum class TopologyKind { single, virtual_cluster, network };

inline std::string_view topology_name(TopologyKind k) {
    switch (k) {
        case TopologyKind::single: return "single";
        case TopologyKind::virtual_cluster: return "virtual";
        case TopologyKind::network: return "network";
    }
    return "?";
}

inline TopologyKind parse_topology(std::string_view s) {
    if (s == "single") return TopologyKind::single;
    if (s == "virtual") return TopologyKind::virtual_cluster;
    if (s == "network") return TopologyKind::network;
    throw InvalidParams("unknown topology: " + std::string(s));
}

struct Topology {
    TopologyKind kind = TopologyKind::single;
    int slave_count = 1;
    std::vector<std::string> endpoints;  // network only
};

/// Rejects population/worker combinations the pairing and partitioning
/// rules cannot serve: N must split into m equal blocks of even size >= 2.
inline void validate_topology(const Topology& topo, const EvoParams& params) {
    if (topo.slave_count < 1) throw InvalidParams("slave count must be at least 1");
    if (topo.kind == TopologyKind::single && topo.slave_count != 1)
        throw InvalidParams("single topology runs exactly one worker");
    const int n = params.pop_size;
    const int m = topo.slave_count;
    if (n % m != 0)
        throw IndivisiblePopulation("population of " + std::to_string(n) +
                                    " does not divide across " + std::to_string(m) + " slaves");
    const int block = n / m;
    if (block < 2 || block % 2 != 0)
        throw IndivisiblePopulation("per-slave block of " + std::to_string(block) +
                                    " must be even and at least 2");
}

/// Splits the population into m contiguous positional blocks of N/m members;
/// concatenating the blocks in order reproduces the population exactly.
inline std::vector<std::vector<Individual>> partition(const Population& pop, int m) {
    if (m < 1) throw InvalidParams("slave count must be at least 1");
    if (pop.size() % static_cast<std::size_t>(m) != 0)
        throw IndivisiblePopulation("population of " + std::to_string(pop.size()) +
                                    " does not divide across " + std::to_string(m) + " slaves");
    const std::size_t block = pop.size() / static_cast<std::size_t>(m);
    std::vector<std::vector<Individual>> parts(static_cast<std::size_t>(m));
    for (std::size_t i = 0; i < parts.size(); ++i)
        parts[i].assign(pop.members.begin() + static_cast<std::ptrdiff_t>(i * block),
                        pop.members.begin() + static_cast<std::ptrdiff_t>((i + 1) * block));
    return parts;
}

struct GenerationStats {
    double champion_error = kInf;
    double champion_omega = 0.0;
    PhaseTimings timings;
};

struct SolveResult {
    std::vector<double> champion_x;
    double champion_error = kInf;
    double champion_omega = 0.0;  // relaxation factor riding with the champion
    std::int64_t generations = 0;
    bool converged = false;
    bool aborted = false;
    std::string abort_reason;
    std::vector<GenerationStats> per_generation;
};

// ---------------------------------------------------------------------------
// worker kernel

struct SlaveReturn {
    std::vector<Individual> members;
    SlavePhase phase;
};

/// The per-generation slave pipeline: mutate with each individual's omega,
/// evaluate, adapt omegas pairwise, and for ts apply the partial twin
/// selection. Identical code runs in-process and inside the slave binary,
/// which is what makes every topology produce the same numbers.
inline SlaveReturn do_slave_work(std::vector<Individual> subpop, const LinearSystem& sys,
                                 const EvoParams& params, std::int64_t t,
                                 SelectionMethod selection, RngStream& rng) {
    SlaveReturn out;
    out.members = mutate_and_evaluate(std::move(subpop), sys, &out.phase);
    Stopwatch sw;
    out.members = adapt_subpop(std::move(out.members), t, params, rng);
    out.phase.t_a = sw.seconds();
    if (selection == SelectionMethod::ts) {
        sw.reset();
        out.members = select_ts_partial(std::move(out.members));
        out.phase.t_s_partial = sw.seconds();
    }
    return out;
}

/// Slave-side state machine shared by the virtual cluster and the networked
/// slave: caches the system, parameters and seed from the first assignment's
/// setup payload, verifies digests on every later assignment before any
/// computation, and owns the worker's random stream across generations.
class SlaveSession {
public:
    SubResult handle(const Assign& assign, double unmarshal_seconds) {
        if (assign.setup) {
            system_.emplace(assign.setup->system);
            params_ = assign.setup->params;
            seed_ = assign.setup->seed;
            system_digest_ = system_digest(*system_);
            params_digest_ = params_digest(params_);
        }
        if (!system_)
            throw DigestMismatch("assignment arrived before any setup payload");
        if (assign.system_digest != system_digest_)
            throw DigestMismatch("system digest " + digest_hex(assign.system_digest) +
                                 " does not match the cached system " +
                                 digest_hex(system_digest_));
        if (assign.params_digest != params_digest_)
            throw DigestMismatch("parameter digest mismatch against the cached parameters");
        if (assign.selection != params_.selection)
            throw DigestMismatch("assignment selection method disagrees with cached parameters");
        if (!rng_) {
            stream_id_ = assign.rng_stream_id;
            rng_.emplace(seed_, stream_id_);
        } else if (assign.rng_stream_id != stream_id_) {
            throw DigestMismatch("assignment changed the rng stream id mid-run");
        }

        auto work = do_slave_work(assign.subpop, *system_, params_, assign.t,
                                  assign.selection, *rng_);
        SubResult result;
        result.t = assign.t;
        result.subpop = std::move(work.members);
        result.timings = work.phase;
        result.timings.t_um = unmarshal_seconds;
        return result;
    }

private:
    std::optional<LinearSystem> system_;
    EvoParams params_;
    std::uint64_t seed_ = 0;
    std::uint64_t system_digest_ = 0;
    std::uint64_t params_digest_ = 0;
    std::uint32_t stream_id_ = 0;
    std::optional<RngStream> rng_;
};

// ---------------------------------------------------------------------------
// dispatch backends

struct CommSample {
    double t_marshal = 0.0;
    double t_trans = 0.0;
    double t_unmarshal = 0.0;
};

/// Delivers the partitioned generation to the workers and gathers their
/// results in slave order. dispatch() blocks until every block came back
/// (the gather barrier); transport problems surface as TransportError.
class Backend {
public:
    virtual ~Backend() = default;
    virtual std::vector<SlaveReturn> dispatch(std::int64_t t,
                                              const std::vector<std::vector<Individual>>& parts,
                                              CommSample& comm) = 0;
};

inline Assign make_assign(std::int64_t t, const std::vector<Individual>& part, int slave_index,
                          std::uint64_t sys_digest, std::uint64_t par_digest,
                          const EvoParams& params, bool include_setup, const LinearSystem& sys,
                          std::uint64_t seed) {
    Assign a;
    a.t = t;
    a.system_digest = sys_digest;
    a.params_digest = par_digest;
    a.selection = params.selection;
    a.rng_stream_id = worker_stream_id(slave_index);
    a.subpop = part;
    for (auto& ind : a.subpop) {  // only x and omega travel
        ind.error = kInf;
        ind.evaluated = false;
    }
    if (include_setup) a.setup.emplace(SetupPayload{sys, params, seed});
    return a;
}

/// Runs the worker blocks inside the master process.
///
/// With the codec engaged (virtual cluster) every block round-trips through
/// encode/decode exactly like the networked path, including the one-time
/// setup payload, so the virtual cluster exercises the full wire surface;
/// the 17-digit decimal codec is value-exact, so results match the direct
/// path bit for bit. Without it (single topology) blocks are handed to the
/// worker kernel directly.
class InProcessBackend : public Backend {
public:
    InProcessBackend(const LinearSystem& sys, const EvoParams& params, std::uint64_t seed,
                     int slave_count, bool use_codec)
        : sys_(sys),
          params_(params),
          seed_(seed),
          use_codec_(use_codec),
          sys_digest_(system_digest(sys)),
          par_digest_(params_digest(params)) {
        for (int i = 0; i < slave_count; ++i) {
            workers_.emplace_back(seed, worker_stream_id(i));
            sessions_.emplace_back();
        }
    }

    std::vector<SlaveReturn> dispatch(std::int64_t t,
                                      const std::vector<std::vector<Individual>>& parts,
                                      CommSample& comm) override {
        if (parts.size() != workers_.size())
            throw InvalidParams("partition count does not match worker count");
        std::vector<SlaveReturn> out;
        out.reserve(parts.size());
        for (std::size_t i = 0; i < parts.size(); ++i) {
            if (!use_codec_) {
                out.push_back(do_slave_work(parts[i], sys_, params_, t, params_.selection,
                                            workers_[i]));
                continue;
            }
            const Assign assign =
                make_assign(t, parts[i], static_cast<int>(i), sys_digest_, par_digest_, params_,
                            /*include_setup=*/t == 0, sys_, seed_);
            Stopwatch sw;
            const std::string assign_bytes = encode(assign);
            comm.t_marshal += sw.seconds();

            Stopwatch wait;
            double t_um = 0.0;
            FrameReader rx;
            rx.feed(assign_bytes);
            const Message decoded = *rx.next(&t_um);
            SubResult reply = sessions_[i].handle(std::get<Assign>(decoded), t_um);
            const std::string reply_bytes = encode(Message(std::move(reply)));
            const double wait_seconds = wait.seconds();

            sw.reset();
            double decode_seconds = 0.0;
            FrameReader tx;
            tx.feed(reply_bytes);
            Message reply_decoded = *tx.next(&decode_seconds);
            comm.t_unmarshal += sw.seconds();

            auto& sub = std::get<SubResult>(reply_decoded);
            comm.t_trans += std::max(0.0, wait_seconds - sub.timings.compute_total());
            out.push_back({std::move(sub.subpop), sub.timings});
        }
        return out;
    }

private:
    const LinearSystem& sys_;
    EvoParams params_;
    std::uint64_t seed_;
    bool use_codec_;
    std::uint64_t sys_digest_;
    std::uint64_t par_digest_;
    std::vector<RngStream> workers_;
    std::vector<SlaveSession> sessions_;
};

// ---------------------------------------------------------------------------
// generation loop

struct GenerationOutcome {
    Population next;
    Individual champion;
    PhaseTimings timings;
};

/// One full generation: recombine at the master, partition, run the worker
/// pipeline through the backend, gather, select.
///
/// bas selection competes the mutated offspring against the parents retained
/// from before recombination; keeping the entering champion in the pool is
/// what makes the champion-error sequence non-increasing. ts picks the
/// champion among the twinned offspring and clones it, unless its error
/// already meets the threshold, in which case cloning is skipped.
inline GenerationOutcome run_generation(const Population& pop, const LinearSystem& sys,
                                        const EvoParams& params, TopologyKind kind, int m,
                                        RngStream& master_rng, Backend& backend) {
    GenerationOutcome out;
    PhaseTimings& ph = out.timings;

    Stopwatch sw;
    const Population recombined = recombine(pop, master_rng);
    ph.t_r = sw.seconds();

    const auto parts = partition(recombined, m);
    CommSample comm;
    auto returns = backend.dispatch(pop.generation, parts, comm);
    if (returns.size() != parts.size())
        throw Error("dispatch returned a wrong number of worker results");

    Population offspring;
    offspring.dim = pop.dim;
    offspring.generation = pop.generation;
    std::size_t total = 0;
    for (std::size_t i = 0; i < returns.size(); ++i) {
        if (returns[i].members.size() != parts[i].size())
            throw Error("worker " + std::to_string(i) + " changed its block size");
        total += returns[i].members.size();
        offspring.members.insert(offspring.members.end(),
                                 std::make_move_iterator(returns[i].members.begin()),
                                 std::make_move_iterator(returns[i].members.end()));
        ph.t_m += returns[i].phase.t_m;
        ph.t_f += returns[i].phase.t_f;
        ph.t_a += returns[i].phase.t_a;
        if (kind != TopologyKind::single) ph.per_slave.push_back(returns[i].phase);
    }
    if (total != pop.size()) throw Error("work conservation violated across workers");
    if (kind != TopologyKind::single) {
        ph.t_marshal = comm.t_marshal;
        ph.t_trans = comm.t_trans;
        ph.t_unmarshal = comm.t_unmarshal;
    }

    sw.reset();
    if (params.selection == SelectionMethod::bas) {
        out.next = select_bas(pop, offspring);
        out.champion = out.next.members.front();
    } else {
        const std::size_t best = champion_index(offspring.members);
        out.champion = offspring.members[best];
        if (out.champion.error <= params.epsilon) {
            out.next = std::move(offspring);  // final generation, cloning skipped
        } else {
            out.next = select_ts_champion(offspring.members, pop.size());
        }
    }
    // for ts the worker-side twin pass is already in t_s_partial; this is
    // the remaining master-side selection cost (champion scan + cloning)
    ph.t_s = sw.seconds();

    out.next.dim = pop.dim;
    out.next.generation = pop.generation + 1;
    return out;
}

/// Full solve against an already-connected backend. Runs generations until
/// the champion error reaches epsilon or the generation limit, tracking the
/// best champion ever seen. Transport failures mid-run abort the loop and
/// return the partial result with the abort marker set.
inline SolveResult run_solver_with_backend(const LinearSystem& sys, const EvoParams& params,
                                           TopologyKind kind, int m, std::uint64_t seed,
                                           Backend& backend) {
    params.validate();
    Topology topo{kind, m, {}};
    validate_topology(topo, params);

    RngStream master(seed, kMasterStreamId);
    Population pop = init_population(params, sys.size(), master);
    evaluate_population(pop, sys);

    SolveResult res;
    const std::size_t first = champion_index(pop.members);
    Individual best = pop.members[first];

    try {
        for (std::int64_t t = 0; t < params.max_generations; ++t) {
            auto outcome = run_generation(pop, sys, params, kind, m, master, backend);
            pop = std::move(outcome.next);
            res.per_generation.push_back(
                {outcome.champion.error, outcome.champion.omega, std::move(outcome.timings)});
            ++res.generations;
            if (outcome.champion.error < best.error) best = outcome.champion;
            if (outcome.champion.error <= params.epsilon) {
                res.converged = true;
                break;
            }
        }
    } catch (const TransportError& e) {
        res.aborted = true;
        res.abort_reason = e.what();
    }

    res.champion_x = best.x;
    res.champion_error = best.error;
    res.champion_omega = best.omega;
    return res;
}

/// Entry point for the in-process topologies. Networked runs are driven by
/// the cluster module, which supplies its own backend.
inline SolveResult run_solver(const LinearSystem& sys, const EvoParams& params,
                              const Topology& topo, std::uint64_t seed) {
    if (topo.kind == TopologyKind::network)
        throw InvalidParams("networked runs are driven by the cluster master");
    validate_topology(topo, params);
    InProcessBackend backend(sys, params, seed, topo.slave_count,
                             /*use_codec=*/topo.kind == TopologyKind::virtual_cluster);
    return run_solver_with_backend(sys, params, topo.kind, topo.slave_count, seed, backend);
}

}  // namespace evosr
