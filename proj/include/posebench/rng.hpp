#pragma once

#include <cmath>
#include <cstdint>

namespace posebench {

// SplitMix64 output function (Steele, Lea & Flood 2014). Bijective mix of a
// 64-bit word; the constants are the published ones, so any implementation of
// SplitMix64 reproduces these streams bit for bit.
inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Counter-based generator: draw i of stream `key` is
//   splitmix64(key + i * GOLDEN)
// where GOLDEN = 0x9e3779b97f4a7c15. Substreams are keyed by hashing the
// root seed with an index (`substream`), so corrupting scene 17 draws the
// same values no matter how many scenes ran before it or on which thread.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    static std::uint64_t substream(std::uint64_t seed, std::uint64_t index) {
        return splitmix64(splitmix64(seed) ^ (index + 0x9e3779b97f4a7c15ULL));
    }

    static CounterRng for_substream(std::uint64_t seed, std::uint64_t index) {
        return CounterRng(substream(seed, index));
    }

    std::uint64_t next_u64() {
        std::uint64_t v = splitmix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
        ++counter_;
        return v;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Rejection-free modulo is fine here: n is
    // always tiny compared to 2^64, so the bias is far below test resolution.
    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    // Standard normal via Box-Muller. Always consumes exactly two draws so
    // counter positions stay aligned across call sites.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

// Order-insensitive key derivation for nested substreams (scene, instance,
// cell, ...). Chain of splitmix64 mixes; collision-free enough for test-rig
// sized index spaces.
inline std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b) {
    return splitmix64(splitmix64(a) ^ (b + 0x9e3779b97f4a7c15ULL));
}

inline std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix_keys(mix_keys(a, b), c);
}

inline std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                              std::uint64_t d) {
    return mix_keys(mix_keys(a, b, c), d);
}

}  // namespace posebench
