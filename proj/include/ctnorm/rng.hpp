#pragma once

#include <cmath>
#include <cstdint>

namespace ctnorm {

// splitmix64 finalizer; the mixing core of every RNG here.
inline uint64_t mix64(uint64_t z)
{
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b)
{
    return mix64(a ^ (0x9e3779b97f4a7c15ull + b + (a << 6) + (a >> 2)));
}

// Counter-based generator: value i of stream (seed, key) is a pure function
// of its arguments, so draws are identical regardless of evaluation order
// or thread count.
struct KeyedRng {
    uint64_t state;

    explicit KeyedRng(uint64_t seed, uint64_t key = 0)
        : state(hash_combine(mix64(seed), key)) {}

    uint64_t at(uint64_t counter) const { return mix64(state ^ (counter * 0xda942042e4dd58b5ull)); }

    // uniform in [0, 1)
    double uniform_at(uint64_t counter) const
    {
        return double(at(counter) >> 11) * 0x1.0p-53;
    }

    // standard normal, Box-Muller on two sub-draws of one counter
    double normal_at(uint64_t counter) const
    {
        uint64_t bits = at(counter);
        uint64_t b2 = mix64(bits);
        double u1 = double((bits >> 11) + 1) * 0x1.0p-53; // (0, 1]
        double u2 = double(b2 >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
};

// Sequential stream for single-threaded consumers (model init, patch
// sampling). Same mixing core, explicit position so state serializes as
// one integer.
struct StreamRng {
    uint64_t base;
    uint64_t pos = 0;

    explicit StreamRng(uint64_t seed, uint64_t key = 0) : base(hash_combine(mix64(seed), key)) {}

    uint64_t next() { return mix64(base ^ (++pos * 0xda942042e4dd58b5ull)); }

    double uniform() { return double(next() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n)
    uint64_t below(uint64_t n) { return n ? next() % n : 0; }

    double normal()
    {
        uint64_t bits = next();
        uint64_t b2 = mix64(bits);
        double u1 = double((bits >> 11) + 1) * 0x1.0p-53;
        double u2 = double(b2 >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
};

} // namespace ctnorm
