#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace netpen {

// Deterministic seeding/draw helpers. Split files and stub detections must be
// byte-identical across reruns and platforms, so all draws go through explicit
// bit mappings instead of implementation-defined distributions.

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
inline double next_double(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, bound). Modulo draw; the bias is negligible for
/// the bounds used here (dataset sizes, class counts).
inline uint64_t next_below(std::mt19937_64& rng, uint64_t bound) {
    return bound == 0 ? 0 : rng() % bound;
}

/// Poisson draw via Knuth's multiplication method.
inline int next_poisson(std::mt19937_64& rng, double mean) {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    int k = 0;
    double p = 1.0;
    do {
        ++k;
        p *= next_double(rng);
    } while (p > limit);
    return k - 1;
}

/// Engine keyed by (seed, string id); repeat calls yield identical streams.
inline std::mt19937_64 keyed_engine(uint64_t seed, std::string_view id) {
    return std::mt19937_64(splitmix64(seed ^ fnv1a64(id)));
}

}  // namespace netpen
