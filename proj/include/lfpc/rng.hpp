#pragma once
#include <cstdint>

namespace lfpc {

// Deterministic 64-bit generator (splitmix64). Used everywhere randomness is
// needed so that identical seeds give identical artifacts on every platform;
// standard-library distributions are implementation-defined and would not.
struct SplitMix64 {
    uint64_t state;

    explicit SplitMix64(uint64_t seed) : state(seed) {}

    uint64_t next() {
        state += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, n) without modulo bias
    uint64_t below(uint64_t n) {
        if (n == 0) return 0;
        return (uint64_t)(((unsigned __int128)next() * n) >> 64);
    }

    bool chance(int percent) { return below(100) < (uint64_t)percent; }
};

} // namespace lfpc
