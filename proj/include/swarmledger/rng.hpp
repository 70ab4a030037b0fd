#pragma once

#include <cassert>
#include <cstdint>

namespace swarmledger {

// splitmix64. std::mt19937_64 would also be portable, but the std
// distributions on top of it are not pinned across standard libraries,
// and artifact bytes must be identical for a given (seed, config)
// everywhere. So both the engine and the draws are spelled out here.
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // inclusive on both ends, rejection-sampled so every value is
    // equally likely
    uint64_t uniform_u64(uint64_t lo, uint64_t hi) {
        assert(lo <= hi);
        uint64_t span = hi - lo;
        if (span == 0xffffffffffffffffull) return next_u64();
        uint64_t n = span + 1;
        uint64_t limit = 0xffffffffffffffffull - (0xffffffffffffffffull % n + 1) % n;
        uint64_t x;
        do {
            x = next_u64();
        } while (x > limit);
        return lo + x % n;
    }

    // probability is quantized to millionths once, so the accept/reject
    // decision is an integer compare rather than a float compare
    bool bernoulli(double p) {
        if (p <= 0.0) return false;
        if (p >= 1.0) return true;
        uint64_t threshold = static_cast<uint64_t>(p * 1000000.0 + 0.5);
        return uniform_u64(0, 999999) < threshold;
    }

    // 53-bit mantissa in [0,1)
    double uniform_real01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

  private:
    uint64_t state_;
};

// stable derivation of stream seeds (per node, per purpose) from the
// run seed, so adding a stream never shifts an existing one
inline uint64_t derive_seed(uint64_t root, uint64_t lane) {
    Rng mix(root ^ (lane * 0xd6e8feb86659fd93ull + 0xa5a5a5a5a5a5a5a5ull));
    mix.next_u64();
    return mix.next_u64();
}

}  // namespace swarmledger
