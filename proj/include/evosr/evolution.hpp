#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "evosr/errors.hpp"
#include "evosr/linear_system.hpp"
#include "evosr/metrics.hpp"
#include "evosr/rng.hpp"
#include "evosr/selection.hpp"

namespace evosr {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// All exogenous knobs of the evolutionary solver.
struct EvoParams {
    int pop_size = 40;                    // N, must be even and >= 2
    double epsilon = 1e-8;                // convergence threshold on the champion error
    std::int64_t max_generations = 10000; // T
    double omega_lo = 0.05;               // relaxation factor domain, inside (0, 2)
    double omega_hi = 1.95;
    double gamma = 2.0;                   // bas damping exponent
    double lambda = 20.0;                 // ts damping scale, must exceed 10
    double p_max = 0.125;                 // ts perturbation bound for the worse omega
    double p_min = 0.0325;                // ts perturbation bound for the better omega
    SelectionMethod selection = SelectionMethod::bas;
    double init_clip = 15.0;              // initial solution components live in [-clip, clip]

    void validate() const {
        if (pop_size < 2 || pop_size % 2 != 0)
            throw InvalidParams("population size must be even and at least 2");
        if (!(epsilon > 0.0)) throw InvalidParams("epsilon must be positive");
        if (max_generations < 0) throw InvalidParams("generation limit must be non-negative");
        if (!(omega_lo < omega_hi))
            throw InvalidParams("omega bounds must satisfy omega_lo < omega_hi");
        if (!(gamma > 0.0)) throw InvalidParams("gamma must be positive");
        if (selection == SelectionMethod::ts && !(lambda > 10.0))
            throw InvalidParams("ts selection requires lambda > 10");
        if (!(init_clip > 0.0)) throw InvalidParams("init_clip must be positive");
    }
};

/// One candidate: a solution vector paired with its personal relaxation
/// factor and the cached residual of x. error is +infinity until evaluated
/// and stays +infinity for divergent (non-finite) candidates.
struct Individual {
    std::vector<double> x;
    double omega = 0.0;
    double error = kInf;
    bool evaluated = false;

    friend bool operator==(const Individual&, const Individual&) = default;
};

/// Ordered list of individuals. Ordering matters: partitioning into worker
/// blocks and the pairwise adaptation/selection walk positions.
struct Population {
    std::vector<Individual> members;
    std::int64_t generation = 0;  // t
    std::size_t dim = 0;          // solution dimension n

    std::size_t size() const { return members.size(); }
};

/// Draws N individuals: components Gaussian(0, 5) clamped to the init box,
/// omega uniform in its domain, errors unevaluated. Consumes, per
/// individual, dim gaussian draws followed by one uniform draw.
inline Population init_population(const EvoParams& params, std::size_t dim, RngStream& rng) {
    if (params.pop_size < 2 || params.pop_size % 2 != 0)
        throw InvalidParams("population size must be even and at least 2");
    if (dim < 2) throw InvalidParams("solution dimension must be at least 2");
    Population pop;
    pop.dim = dim;
    pop.generation = 0;
    pop.members.resize(static_cast<std::size_t>(params.pop_size));
    for (auto& ind : pop.members) {
        ind.x.resize(dim);
        for (auto& c : ind.x)
            c = std::clamp(rng.gaussian(0.0, 5.0), -params.init_clip, params.init_clip);
        ind.omega = rng.uniform(params.omega_lo, params.omega_hi);
        ind.error = kInf;
        ind.evaluated = false;
    }
    return pop;
}

/// Row-stochastic N x N matrix: N^2 uniform(0,1) draws, each row normalized
/// by its sum (rows with a vanishing sum are redrawn).
inline std::vector<std::vector<double>> draw_stochastic_matrix(std::size_t n, RngStream& rng) {
    std::vector<std::vector<double>> r(n, std::vector<double>(n, 0.0));
    for (auto& row : r) {
        double sum = 0.0;
        do {
            sum = 0.0;
            for (auto& v : row) {
                v = rng.u01();
                sum += v;
            }
        } while (sum < 1e-9);
        for (auto& v : row) v /= sum;
    }
    return r;
}

/// X' = R X on the solution vectors; omegas stay with their slot, cached
/// errors are invalidated, the generation counter is untouched (the engine
/// advances it after selection).
inline Population recombine_with_matrix(const Population& pop,
                                        const std::vector<std::vector<double>>& r) {
    const std::size_t n = pop.size();
    if (r.size() != n) throw InvalidParams("recombination matrix must be N x N");
    Population out;
    out.dim = pop.dim;
    out.generation = pop.generation;
    out.members.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (r[i].size() != n) throw InvalidParams("recombination matrix must be N x N");
        auto& child = out.members[i];
        child.x.assign(pop.dim, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            const double w = r[i][j];
            const auto& px = pop.members[j].x;
            for (std::size_t k = 0; k < pop.dim; ++k) child.x[k] += w * px[k];
        }
        child.omega = pop.members[i].omega;
        child.error = kInf;
        child.evaluated = false;
    }
    return out;
}

inline Population recombine(const Population& pop, RngStream& rng) {
    return recombine_with_matrix(pop, draw_stochastic_matrix(pop.size(), rng));
}

/// Applies one relaxation sweep per individual with that individual's own
/// omega, then refreshes the cached residual. Divergent results (non-finite
/// components) get error = +infinity and their vector is reset to zero so
/// that no NaN leaks into later recombinations or onto the wire.
///
/// When a phase sink is supplied the mutation and fitness passes are timed
/// separately into it.
inline std::vector<Individual> mutate_and_evaluate(std::vector<Individual> subpop,
                                                   const LinearSystem& sys,
                                                   SlavePhase* phase = nullptr) {
    Stopwatch sw;
    for (auto& ind : subpop) ind.x = jacobi_sr_step(sys, ind.x, ind.omega);
    if (phase) phase->t_m += sw.seconds();

    sw.reset();
    for (auto& ind : subpop) {
        if (!all_finite(ind.x)) {
            ind.x.assign(sys.size(), 0.0);
            ind.error = kInf;
        } else {
            ind.error = residual_error(sys, ind.x);
        }
        ind.evaluated = true;
    }
    if (phase) phase->t_f += sw.seconds();
    return subpop;
}

/// Time-variant damping of the adaptation noise.
///   bas: (1 - t/T)^gamma, reaching zero at the final generation
///   ts:  lambda * ln(1 + 1/(t + lambda)), positive and decreasing
inline double tva_factor(SelectionMethod method, std::int64_t t, const EvoParams& params) {
    if (t < 0) throw InvalidParams("generation counter must be non-negative");
    if (method == SelectionMethod::bas) {
        if (params.max_generations < 1)
            throw InvalidParams("bas damping needs a positive generation limit");
        if (t > params.max_generations)
            throw InvalidParams("generation counter exceeds the generation limit");
        const double frac =
            static_cast<double>(t) / static_cast<double>(params.max_generations);
        return std::pow(1.0 - frac, params.gamma);
    }
    if (!(params.lambda > 10.0)) throw InvalidParams("ts damping requires lambda > 10");
    return params.lambda * std::log1p(1.0 / (static_cast<double>(t) + params.lambda));
}

/// Core omega update for an ordered (worse, better) pair, with the two
/// perturbations already drawn:
///   worse:  w_x' = (0.5 + p_x) (w_x + w_y)   -- pulled toward the better one
///   better: w_y' = w_y + p_y (bound - w_y)   -- nudged toward the boundary
///           on its side of the pair (upper when w_y > w_x, lower otherwise)
/// Both results are clamped into the omega domain.
inline std::pair<double, double> adapt_omegas(double omega_worse, double omega_better,
                                              double p_x, double p_y, const EvoParams& params) {
    double wx = (0.5 + p_x) * (omega_worse + omega_better);
    double wy = (omega_better > omega_worse)
                    ? omega_better + p_y * (params.omega_hi - omega_better)
                    : omega_better + p_y * (params.omega_lo - omega_better);
    wx = std::clamp(wx, params.omega_lo, params.omega_hi);
    wy = std::clamp(wy, params.omega_lo, params.omega_hi);
    return {wx, wy};
}

/// Draws the perturbations for one pair and applies adapt_omegas. Two
/// gaussian draws are consumed, worse first.
///
/// bas scales the worse-side draw by |w_y - w_x| / (2 (w_x + w_y)), the
/// magnitude at which the update lands exactly on the better omega, damped
/// by the time-variant factor. The better-side draw is taken in absolute
/// value so the move always points at the boundary; its scale is the full
/// remaining distance fraction upward (1) and half of it downward (1/2).
/// ts uses plain gaussian draws scaled by the p_max / p_min bounds.
inline std::pair<double, double> adapt_pair(const Individual& worse, const Individual& better,
                                            std::int64_t t, const EvoParams& params,
                                            RngStream& rng) {
    const double damp = tva_factor(params.selection, t, params);
    const double wx = worse.omega;
    const double wy = better.omega;
    double p_x = 0.0;
    double p_y = 0.0;
    if (params.selection == SelectionMethod::bas) {
        const double ex = std::abs(wy - wx) / (2.0 * (wx + wy));
        p_x = ex * rng.gaussian(0.0, 0.25) * damp;
        const double ey = (wy > wx) ? 1.0 : 0.5;
        p_y = ey * std::abs(rng.gaussian(0.0, 0.25)) * damp;
    } else {
        p_x = rng.gaussian(0.0, 0.25) * params.p_max * damp;
        p_y = rng.gaussian(0.0, 0.25) * params.p_min * damp;
    }
    return adapt_omegas(wx, wy, p_x, p_y, params);
}

/// Walks consecutive positional pairs (0,1), (2,3), ... and adapts each
/// pair's omegas, lower error playing the better role. Pairs with exactly
/// equal errors are skipped and consume no draws. Solution vectors are
/// never touched.
inline std::vector<Individual> adapt_subpop(std::vector<Individual> subpop, std::int64_t t,
                                            const EvoParams& params, RngStream& rng) {
    if (subpop.size() % 2 != 0)
        throw OddSubpopulation("adaptation walks pairs; subpopulation size must be even");
    for (const auto& ind : subpop)
        if (!ind.evaluated) throw UnevaluatedError("adaptation requires evaluated errors");
    for (std::size_t i = 0; i + 1 < subpop.size(); i += 2) {
        auto& a = subpop[i];
        auto& b = subpop[i + 1];
        if (a.error == b.error) continue;
        if (a.error > b.error) {
            auto [wx, wy] = adapt_pair(a, b, t, params, rng);
            a.omega = wx;
            b.omega = wy;
        } else {
            auto [wx, wy] = adapt_pair(b, a, t, params, rng);
            b.omega = wx;
            a.omega = wy;
        }
    }
    return subpop;
}

/// Elitist pool selection: the N lowest-error individuals of the 2N-member
/// parents-plus-offspring union, returned sorted ascending by error. Ties
/// prefer offspring, then the lower original index, which keeps distributed
/// and single runs byte-identical. Position 0 is the champion.
inline Population select_bas(const Population& parents, const Population& offspring) {
    const std::size_t n = parents.size();
    if (offspring.size() != n)
        throw InvalidParams("selection expects equally sized parent and offspring sets");
    struct Key {
        double error;
        int source;  // 0 offspring, 1 parent
        std::size_t index;
    };
    std::vector<Key> keys;
    keys.reserve(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!offspring.members[i].evaluated)
            throw UnevaluatedError("selection requires evaluated offspring errors");
        keys.push_back({offspring.members[i].error, 0, i});
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!parents.members[i].evaluated)
            throw UnevaluatedError("selection requires evaluated parent errors");
        keys.push_back({parents.members[i].error, 1, i});
    }
    std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
        if (a.error != b.error) return a.error < b.error;
        if (a.source != b.source) return a.source < b.source;
        return a.index < b.index;
    });
    Population out;
    out.dim = parents.dim;
    out.generation = parents.generation;
    out.members.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto& key = keys[k];
        out.members.push_back(key.source == 0 ? offspring.members[key.index]
                                              : parents.members[key.index]);
    }
    return out;
}

/// Worker-side twin selection: each consecutive pair keeps its lower-error
/// member twice (ties keep the earlier one), preserving cardinality.
inline std::vector<Individual> select_ts_partial(std::vector<Individual> subpop) {
    if (subpop.size() % 2 != 0)
        throw OddSubpopulation("twin selection walks pairs; subpopulation size must be even");
    for (const auto& ind : subpop)
        if (!ind.evaluated) throw UnevaluatedError("twin selection requires evaluated errors");
    for (std::size_t i = 0; i + 1 < subpop.size(); i += 2) {
        const std::size_t winner = (subpop[i + 1].error < subpop[i].error) ? i + 1 : i;
        if (winner != i) subpop[i] = subpop[winner];
        subpop[i + 1] = subpop[i];
    }
    return subpop;
}

/// Master-side half of ts: clone the minimum-error individual (earliest
/// position on ties) n_out times to form the next population.
inline Population select_ts_champion(const std::vector<Individual>& collected,
                                     std::size_t n_out) {
    if (collected.empty()) throw EmptyCollection("champion selection needs candidates");
    std::size_t best = 0;
    for (std::size_t i = 0; i < collected.size(); ++i) {
        if (!collected[i].evaluated)
            throw UnevaluatedError("champion selection requires evaluated errors");
        if (collected[i].error < collected[best].error) best = i;
    }
    Population out;
    out.dim = collected[best].x.size();
    out.members.assign(n_out, collected[best]);
    return out;
}

inline void evaluate_population(Population& pop, const LinearSystem& sys) {
    for (auto& ind : pop.members) {
        ind.error = all_finite(ind.x) ? residual_error(sys, ind.x) : kInf;
        ind.evaluated = true;
    }
}

/// Index of the minimum-error member, earliest position on ties.
inline std::size_t champion_index(const std::vector<Individual>& members) {
    if (members.empty()) throw EmptyCollection("empty population has no champion");
    std::size_t best = 0;
    for (std::size_t i = 1; i < members.size(); ++i)
        if (members[i].error < members[best].error) best = i;
    return best;
}

}  // namespace evosr
