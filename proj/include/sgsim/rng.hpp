#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sgsim {

/// mt19937_64 with hand-rolled uniform/normal transforms so draws are
/// bit-identical for a given seed regardless of the standard library.
struct Rng {
    std::mt19937_64 eng;
    bool has_spare = false;
    double spare = 0.0;

    explicit Rng(uint64_t seed) : eng(seed) {}

    uint64_t raw() { return eng(); }

    /// [0, 1)
    double uniform() { return (eng() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    /// [0, n)
    int uniform_int(int n) { return (int)(uniform() * n); }

    /// Standard normal via Box-Muller.
    double normal() {
        if (has_spare) {
            has_spare = false;
            return spare;
        }
        double u1 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double th = 6.283185307179586476925286766559 * u2;
        spare = r * std::sin(th);
        has_spare = true;
        return r * std::cos(th);
    }

    double normal(double mean, double std) { return mean + std * normal(); }
};

/// Stateless seed mixer for deriving independent streams from one run seed.
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace sgsim
