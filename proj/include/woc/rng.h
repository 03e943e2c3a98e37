#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace woc {

// Deterministic splitmix64 generator with Box-Muller normals. Not std::mt19937
// on purpose: the stream must be identical across platforms and standard-library
// versions so datasets and parameter inits are byte-reproducible.
struct rng {
    uint64_t state;
    double spare = 0.0;
    bool has_spare = false;

    explicit rng(uint64_t seed) : state(seed) {}

    uint64_t next_u64() {
        state += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased-enough integer in [0, n) via 128-bit multiply.
    int64_t uniform_int(int64_t n) {
        if (n <= 0) throw std::invalid_argument("rng::uniform_int: n must be positive");
        return static_cast<int64_t>(
            (static_cast<unsigned __int128>(next_u64()) * static_cast<uint64_t>(n)) >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

    double normal(double mu = 0.0, double sigma = 1.0) {
        if (has_spare) {
            has_spare = false;
            return mu + sigma * spare;
        }
        const double u1 = 1.0 - uniform(); // (0, 1]: keeps log finite
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare = r * std::sin(theta);
        has_spare = true;
        return mu + sigma * r * std::cos(theta);
    }

    double exponential(double lambda) {
        if (lambda <= 0.0) throw std::invalid_argument("rng::exponential: lambda must be positive");
        return -std::log(1.0 - uniform()) / lambda;
    }
};

// Derive an independent stream seed from a base seed and an index/tag.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    rng r(a ^ (b * 0x9e3779b97f4a7c15ULL + 0x85ebca77c2b2ae63ULL));
    return r.next_u64();
}

} // namespace woc
