#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace btpmbm {

using Rng = std::mt19937_64;

// Distribution objects in <random> are implementation-defined; these draw
// directly from the engine so sequences are the same on every platform.

inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, n), unbiased.
inline int uniform_index(Rng& rng, int n) {
    if (n <= 0) throw std::invalid_argument("uniform_index: empty range");
    const std::uint64_t range = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t x = 0;
    do {
        x = rng();
    } while (x >= limit);
    return static_cast<int>(x % range);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent stream for (root seed, stream id), e.g. one per Monte Carlo run.
inline Rng derive_rng(std::uint64_t root, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(root), static_cast<std::uint32_t>(root >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      static_cast<std::uint32_t>(splitmix64(root ^ splitmix64(stream)))};
    return Rng(seq);
}

/// Inverse-CDF draw from unnormalized log-probabilities.
inline std::size_t sample_log_categorical(std::span<const double> log_w, Rng& rng) {
    double m = -INFINITY;
    for (double v : log_w) m = std::max(m, v);
    if (m == -INFINITY) throw std::domain_error("degenerate mixture");
    double total = 0.0;
    for (double v : log_w) total += std::exp(v - m);
    double u = uniform01(rng) * total;
    std::size_t last = 0;
    for (std::size_t q = 0; q < log_w.size(); ++q) {
        const double p = std::exp(log_w[q] - m);
        if (p == 0.0) continue;
        last = q;
        if (u < p) return q;
        u -= p;
    }
    return last;
}

}  // namespace btpmbm
