#pragma once

#include <cmath>
#include <cstdint>

namespace gcamat {

// PCG32 (O'Neill). Chosen over <random> engines because its full state is two
// u64 words, which serializes exactly into checkpoints.
class Pcg32 {
public:
    Pcg32() { seed(0x853c49e6748fea9bULL, 0xda3e39cb94b95bdbULL); }
    explicit Pcg32(uint64_t initstate, uint64_t initseq = 1) { seed(initstate, initseq); }

    void seed(uint64_t initstate, uint64_t initseq = 1) {
        state_ = 0u;
        inc_ = (initseq << 1u) | 1u;
        next_u32();
        state_ += initstate;
        next_u32();
    }

    uint32_t next_u32() {
        uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
        uint32_t rot = static_cast<uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
    }

    // Uniform double in [0, 1).
    double uniform() { return next_u32() * (1.0 / 4294967296.0); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi], inclusive. Unbiased rejection sampling.
    int uniform_int(int lo, int hi) {
        uint32_t range = static_cast<uint32_t>(hi - lo) + 1u;
        if (range == 0) return static_cast<int>(next_u32());  // full 32-bit range
        uint32_t limit = UINT32_MAX - UINT32_MAX % range;
        uint32_t r;
        do {
            r = next_u32();
        } while (r >= limit);
        return lo + static_cast<int>(r % range);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller. Two draws per call, no cached spare, so
    // the state advance per call is fixed.
    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    uint64_t state() const { return state_; }
    uint64_t inc() const { return inc_; }
    void set_raw(uint64_t state, uint64_t inc) {
        state_ = state;
        inc_ = inc;
    }

private:
    uint64_t state_ = 0;
    uint64_t inc_ = 0;
};

// SplitMix64 step; used to derive independent per-index sample seeds from one
// run seed so that worker count never affects content.
inline uint64_t mix_seed(uint64_t seed, uint64_t index) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace gcamat
