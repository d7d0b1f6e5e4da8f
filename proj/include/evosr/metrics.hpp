#pragma once

#include <algorithm>
#include <chrono>
#include <vector>

#include "evosr/errors.hpp"
#include "evosr/selection.hpp"

namespace evosr {

class Stopwatch {
    using clock = std::chrono::steady_clock;

public:
    void reset() { t0_ = clock::now(); }
    double seconds() const {
        return std::chrono::duration<double>(clock::now() - t0_).count();
    }

private:
    clock::time_point t0_ = clock::now();
};

/// Phase costs measured on one worker for one generation, in seconds.
struct SlavePhase {
    double t_um = 0.0;         // unmarshalling the work assignment
    double t_m = 0.0;          // mutation
    double t_f = 0.0;          // fitness evaluation
    double t_a = 0.0;          // omega adaptation
    double t_s_partial = 0.0;  // worker-side twin selection (ts only)

    double compute_total() const { return t_um + t_m + t_f + t_a + t_s_partial; }
};

/// Per-generation cost samples. For single-process runs only the five core
/// phases are populated and per_slave stays empty; distributed runs fill the
/// aggregate fields with sums over workers plus the communication terms.
struct PhaseTimings {
    double t_r = 0.0;  // recombination (master)
    double t_m = 0.0;  // mutation, summed across workers
    double t_f = 0.0;  // fitness, summed across workers
    double t_a = 0.0;  // adaptation, summed across workers
    double t_s = 0.0;  // master-side selection
    double t_marshal = 0.0;    // encoding assignments, summed over subpopulations
    double t_trans = 0.0;      // transmission, summed over subpopulations
    double t_unmarshal = 0.0;  // decoding worker replies at the master
    std::vector<SlavePhase> per_slave;
};

/// Single-processor generation cost: recombination + mutation + fitness +
/// adaptation + selection.
inline double t_single(const PhaseTimings& ph) {
    if (!ph.per_slave.empty())
        throw InvalidParams("t_single expects timings from a single-process run");
    return ph.t_r + ph.t_m + ph.t_f + ph.t_a + ph.t_s;
}

/// Distributed generation cost. Communication terms are summed over
/// subpopulations while the compute term takes the slowest worker, which is
/// the worker that gates the gather barrier.
///
/// For ts the worker-side partial selection replaces master selection and
/// the model, as defined, carries no master-side unmarshal or selection
/// terms; the report schema notes this.
inline double t_distributed(const PhaseTimings& ph, SelectionMethod method) {
    if (ph.per_slave.empty())
        throw MissingSlaveSamples("distributed time requires per-slave phase samples");
    double max_compute = 0.0;
    for (const auto& s : ph.per_slave) {
        const double c = (method == SelectionMethod::bas) ? (s.t_m + s.t_f + s.t_a)
                                                          : (s.t_f + s.t_m + s.t_a + s.t_s_partial);
        max_compute = std::max(max_compute, c);
    }
    if (method == SelectionMethod::bas)
        return ph.t_r + ph.t_marshal + ph.t_trans + max_compute + ph.t_unmarshal + ph.t_s;
    return ph.t_r + ph.t_marshal + ph.t_trans + max_compute;
}

struct Speedup {
    double speedup = 0.0;      // single time / distributed time
    double improvement = 0.0;  // speedup / worker count, as a fraction
};

inline Speedup compute_speedup(double single_seconds, double distributed_seconds, int slaves) {
    if (slaves < 1) throw InvalidParams("slave count must be at least 1");
    if (!(distributed_seconds > 0.0))
        throw ZeroDistributedTime("distributed time must be positive");
    Speedup s;
    s.speedup = single_seconds / distributed_seconds;
    s.improvement = s.speedup / static_cast<double>(slaves);
    return s;
}

}  // namespace evosr
