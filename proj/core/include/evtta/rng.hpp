#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace evtta {

/// Deterministic RNG facade. std::mt19937_64 is bit-exact across platforms
/// but the standard distributions are not, so every draw is implemented here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next() { return eng_(); }

    /// Uniform integer in [lo, hi], both inclusive. Requires lo <= hi.
    std::uint64_t uniform_u64(std::uint64_t lo, std::uint64_t hi) {
        // Lemire multiply-shift; bias is negligible for the ranges used here
        // and the mapping is fully deterministic.
        const std::uint64_t span = hi - lo + 1;
        if (span == 0) return eng_(); // full 64-bit range
        const unsigned __int128 m =
            static_cast<unsigned __int128>(eng_()) * static_cast<unsigned __int128>(span);
        return lo + static_cast<std::uint64_t>(m >> 64);
    }

    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(uniform_u64(0, static_cast<std::uint64_t>(n) - 1));
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform_real(double a, double b) { return a + (b - a) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Box-Muller without state so the draw count per call is fixed (2).
    double normal(double mu = 0.0, double sigma = 1.0) {
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mu + sigma * r * std::cos(6.283185307179586476925287 * u2);
    }

    /// Exact Poisson via Knuth's product method, chunked so the exponential
    /// never underflows for large lambda.
    std::uint64_t poisson(double lambda) {
        std::uint64_t count = 0;
        while (lambda > 0.0) {
            const double chunk = lambda > 500.0 ? 500.0 : lambda;
            const double limit = std::exp(-chunk);
            double prod = 1.0;
            for (;;) {
                prod *= uniform01();
                if (prod <= limit) break;
                ++count;
            }
            lambda -= chunk;
        }
        return count;
    }

private:
    std::mt19937_64 eng_;
};

/// SplitMix64 step, used to derive independent stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives a sub-seed for a named purpose. Identical (base, path) pairs give
/// identical seeds; any change to the path decorrelates the stream.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = splitmix64(base);
    for (std::uint64_t p : path) h = splitmix64(h ^ p);
    return h;
}

/// Purpose tags for derive_seed paths.
namespace seed_tag {
inline constexpr std::uint64_t scene = 0x5343454eULL;     // "SCEN"
inline constexpr std::uint64_t burst = 0x42555253ULL;     // "BURS"
inline constexpr std::uint64_t drop = 0x44524f50ULL;      // "DROP"
inline constexpr std::uint64_t slices = 0x534c4943ULL;    // "SLIC"
inline constexpr std::uint64_t score = 0x53434f52ULL;     // "SCOR"
inline constexpr std::uint64_t shuffle = 0x53485546ULL;   // "SHUF"
inline constexpr std::uint64_t init = 0x494e4954ULL;      // "INIT"
inline constexpr std::uint64_t train = 0x5452414eULL;     // "TRAN"
inline constexpr std::uint64_t window = 0x57494e44ULL;    // "WIND"
inline constexpr std::uint64_t anchor = 0x414e4348ULL;    // "ANCH"
} // namespace seed_tag

} // namespace evtta
