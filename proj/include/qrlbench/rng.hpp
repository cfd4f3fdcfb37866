#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace qrlbench {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; bijective mixing of a 64-bit word.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Named substreams of a run's master seed. Values are part of the on-disk
/// reproducibility contract; do not renumber.
enum class Stream : std::uint64_t {
    Weights = 1,
    TrainEnv = 2,
    ValidationEnv = 3,
    Exploration = 4,
    Replay = 5,
    Bootstrap = 6,
    Evaluation = 7,
};

/// Counter-based split: (master, stream, index) -> independent seed.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                    std::uint64_t index = 0) noexcept
{
    return splitmix64(splitmix64(splitmix64(master) ^ (stream * 0xD1B54A32D192ED03ULL)) + index);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                    std::uint64_t index = 0) noexcept
{
    return derive_seed(master, static_cast<std::uint64_t>(stream), index);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(splitmix64(seed)); }

/// Uniform double in [0, 1) built from the top 53 bits; identical on every
/// standard library, unlike std::uniform_real_distribution.
inline double uniform01(Rng &rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng &rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Unbiased integer in [0, n) via rejection.
inline std::uint64_t uniform_index(Rng &rng, std::uint64_t n)
{
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = rng();
    while (x >= limit) {
        x = rng();
    }
    return x % n;
}

/// Standard normal via Box-Muller (portable across standard libraries).
inline double standard_normal(Rng &rng)
{
    double u1 = uniform01(rng);
    while (u1 <= 0.0) {
        u1 = uniform01(rng);
    }
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

} // namespace qrlbench
