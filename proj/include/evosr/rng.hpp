#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace evosr {

namespace detail {

// splitmix64 finalizer; spreads a seed/stream pair over the full 64-bit space.
inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

}  // namespace detail

/// Seeded random stream with role-derived substreams.
///
/// Identical (seed, stream_id) pairs replay the identical value sequence in
/// any process, which is what makes single, virtual and networked runs agree.
/// Substream convention used by the solver: 0 is the master, worker k uses
/// k+1, and problem generation uses kProblemStreamId.
///
/// The distributions are implemented by hand on top of mt19937_64 rather than
/// through <random>'s distribution templates, whose output is not pinned down
/// by the standard and varies between library implementations.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint32_t stream_id)
        : seed_(seed),
          stream_id_(stream_id),
          gen_(detail::mix64(seed + detail::kGolden * (static_cast<std::uint64_t>(stream_id) + 1))) {}

    std::uint64_t seed() const { return seed_; }
    std::uint32_t stream_id() const { return stream_id_; }

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform draw in [0, 1) with 53 random mantissa bits.
    double u01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Uniform draw in [lo, hi).
    double uniform(double lo, double hi) { return lo + u01() * (hi - lo); }

    /// Gaussian draw via the Marsaglia polar method. The spare variate is
    /// cached, so the stream state includes it; construct streams per role
    /// and keep them alive for the whole run.
    double gaussian(double mean, double sd) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + sd * spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * u01() - 1.0;
            v = 2.0 * u01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return mean + sd * u * f;
    }

private:
    std::uint64_t seed_;
    std::uint32_t stream_id_;
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Master-side operations (population init, recombination) draw from stream 0.
inline constexpr std::uint32_t kMasterStreamId = 0;

/// Worker (slave) k, 0-based, draws from stream k+1.
inline constexpr std::uint32_t worker_stream_id(int worker_index) {
    return static_cast<std::uint32_t>(worker_index) + 1;
}

/// Problem generation uses its own substream so that generating a benchmark
/// system never perturbs the solver's draw sequence for the same seed.
inline constexpr std::uint32_t kProblemStreamId = 0x70726F62;  // "prob"

}  // namespace evosr
